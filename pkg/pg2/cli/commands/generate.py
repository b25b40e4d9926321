import argparse
import logging
from pathlib import Path

import torch
from PIL import Image, UnidentifiedImageError
from torchvision.utils import save_image

from pg2.cli.common import output_dir
from pg2.core.config import TrainStage
from pg2.core.errors import DataError, UsageError
from pg2.core.manifest import RunManifest
from pg2.data.index import read_annotations
from pg2.data.loader import image_to_tensor, tensor_to_image
from pg2.pose_codec import encode_heatmaps, render_pose
from pg2.trainer import generate, load_checkpoint

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("generate", help="render a condition person in one or more target poses")
    parser.add_argument("--g1", help="stage-I checkpoint (optional when --g2 is a stage-2 checkpoint)")
    parser.add_argument("--g2", help="stage-2 checkpoint; enables refinement")
    parser.add_argument("--condition", required=True, help="condition image")
    parser.add_argument("--poses", required=True, help="keypoint CSV in the annotation format, one pose per row")
    parser.add_argument("--out", help="output directory")
    parser.set_defaults(handler=cmd_generate)


def cmd_generate(args: argparse.Namespace) -> int:
    manifest = RunManifest(kind="generate")
    if not args.g1 and not args.g2:
        raise UsageError("give --g1, --g2 or both")
    g2 = load_checkpoint(args.g2) if args.g2 else None
    if g2 is not None and g2.stage != TrainStage.STAGE2:
        raise UsageError(f"--g2 must be a stage-2 checkpoint, got stage {g2.stage.value}")
    g1 = load_checkpoint(args.g1) if args.g1 else g2

    try:
        with Image.open(args.condition) as image:
            condition = image_to_tensor(image)
    except (OSError, UnidentifiedImageError) as e:
        raise DataError(f"cannot read condition image {args.condition}: {e}")
    poses = read_annotations(args.poses)
    if not poses:
        raise DataError(f"{args.poses} holds no poses")

    coarse, refined = generate(g1, g2, condition, poses)

    out = output_dir(args, f"generate-{Path(args.condition).stem}")
    height, width = condition.shape[1:]
    tiles, written = [], ["grid.png"]
    for k, kp in enumerate(poses):
        tensor_to_image(coarse[k]).save(out / f"coarse_{k:03d}.png")
        written.append(f"coarse_{k:03d}.png")
        row = [condition, render_pose(encode_heatmaps(kp, height, width)), coarse[k].cpu()]
        if refined is not None:
            tensor_to_image(refined[k]).save(out / f"refined_{k:03d}.png")
            written.append(f"refined_{k:03d}.png")
            row.append(refined[k].cpu())
        tiles.extend(row)
    columns = 4 if refined is not None else 3
    save_image(torch.stack(tiles), out / "grid.png", nrow=columns, normalize=True, value_range=(-1, 1), padding=2)

    source = g2 if g2 is not None else g1
    manifest.seed = source.config.train.seed
    manifest.config = source.config.model_dump(mode="json", by_alias=True)
    manifest.config_hash = source.config_hash
    manifest.g1_hash = g1.g1_hash
    manifest.iteration = source.iteration
    manifest.extra = {"condition": args.condition, "poses": args.poses, "g1": args.g1, "g2": args.g2}
    manifest.finish(out, written)
    print(f"[OK] {len(poses)} poses -> {out}")
    return 0
