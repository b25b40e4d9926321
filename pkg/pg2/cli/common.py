import argparse
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torchvision.utils import save_image

from pg2.core import settings
from pg2.core.config import RunConfig
from pg2.core.errors import UsageError
from pg2.data.index import DatasetIndex, read_index
from pg2.data.loader import PairDataset, PairLoader
from pg2.data.pairs import build_pairs, sample_test_pairs
from pg2.models.dataset import PairRecord
from pg2.models.pose import PoseTensor
from pg2.pose_codec import render_pose

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run config JSON (defaults apply when omitted)")
    parser.add_argument("--seed", type=int, help="override train.seed")
    parser.add_argument("--data", help="override data.root")
    parser.add_argument("--out", help="output directory (default: under PG2_RUNS_DIR)")


def load_run_config(args: argparse.Namespace, **train_overrides) -> RunConfig:
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    train = {"seed": getattr(args, "seed", None), **train_overrides}
    return config.with_overrides(train=train, data={"root": getattr(args, "data", None)})


def output_dir(args: argparse.Namespace, default_name: str) -> Path:
    path = Path(args.out) if getattr(args, "out", None) else Path(settings.RUNS_DIR) / default_name
    path.mkdir(parents=True, exist_ok=True)
    return path


def open_index(config: RunConfig, which: str = "train") -> DatasetIndex:
    name = config.data.train_index if which == "train" else config.data.test_index
    return read_index(Path(config.data.root) / name)


def open_pairs(config: RunConfig, which: str = "train") -> Tuple[List[PairRecord], PairDataset]:
    index = open_index(config, which)
    pairs = build_pairs(index, config.data.pairs_cap_per_identity, config.train.seed)
    if which == "test":
        pairs = sample_test_pairs(pairs, config.data.test_pairs, config.data.test_seed)
    loader = PairLoader(
        index,
        image_size=(config.g1.image_height, config.g1.image_width),
        morphology=config.morphology,
    )
    return pairs, PairDataset(pairs, loader)


def parse_floats(text: Optional[str]) -> List[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got '{text}'")


def save_sample_grid(path: Path, batch: Dict[str, torch.Tensor], outputs: Sequence[torch.Tensor]) -> None:
    """One row per pair: condition, target pose, target, then each output"""
    tiles = []
    for i in range(outputs[0].shape[0]):
        pose = render_pose(PoseTensor(batch["pose"][i].numpy().astype(np.uint8)))
        tiles += [batch["condition"][i], pose, batch["target"][i]] + [o[i] for o in outputs]
    save_image(torch.stack(tiles), path, nrow=3 + len(outputs), normalize=True, value_range=(-1, 1), padding=2)
