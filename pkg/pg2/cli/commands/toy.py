import argparse
import logging

from pydantic import ValidationError

from pg2.core.errors import ConfigError
from pg2.data.pairs import build_pairs
from pg2.data.toy import make_toy_dataset
from pg2.models.dataset import ToySpec

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("toy", help="write the synthetic stick-figure dataset")
    parser.add_argument("--out", required=True, help="dataset directory")
    parser.add_argument("--identities", type=int, default=6)
    parser.add_argument("--images", type=int, default=4, help="images per identity")
    parser.add_argument("--test-identities", type=int, default=2)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--width", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.set_defaults(handler=cmd_make_toy_dataset)


def cmd_make_toy_dataset(args: argparse.Namespace) -> int:
    try:
        spec = ToySpec(
            num_identities=args.identities,
            images_per_identity=args.images,
            test_identities=args.test_identities,
            image_height=args.height,
            image_width=args.width,
            seed=args.seed,
        )
    except ValidationError as e:
        raise ConfigError(f"invalid toy spec: {e.errors()[0]['msg']}")

    index = make_toy_dataset(spec, args.out)
    print(f"[OK] {len(index)} images, {len(build_pairs(index))} ordered pairs in {args.out}")
    return 0
