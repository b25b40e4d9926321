import argparse
import csv
import logging
from pathlib import Path
from typing import List

from pg2.cli.common import add_config_flags, load_run_config, open_pairs, output_dir, save_sample_grid
from pg2.core.config import TrainStage
from pg2.core.errors import CheckpointMismatchError
from pg2.core.manifest import RunManifest
from pg2.metrics.evaluation import EvaluationReport, evaluate_model, generate_for_dataset
from pg2.metrics.oracles import build_oracle
from pg2.trainer import load_checkpoint, variant_name

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "variant", "pairs", "ssim", "mask_ssim",
    "inception_score", "inception_std", "mask_inception_score", "mask_inception_std",
]
GRID_PAIRS = 8


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="SSIM, mask-SSIM, IS and mask-IS on held-out pairs")
    add_config_flags(parser)
    parser.add_argument("--checkpoint", action="append", required=True, help="trained checkpoint (repeatable)")
    parser.add_argument("--oracle", default="palette", help="uniform, palette or inception")
    parser.add_argument("--splits", type=int, default=10)
    parser.add_argument("--test-pairs", type=int, help="override data.test_pairs")
    parser.set_defaults(handler=cmd_evaluate)


def write_report(path: Path, reports: List[EvaluationReport]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for report in reports:
            writer.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in report.row().items()})


def write_per_pair(path: Path, reports: List[EvaluationReport]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["variant", "index", "identity", "ssim", "mask_ssim"])
        for report in reports:
            for p in report.per_pair:
                writer.writerow([report.variant, p.index, p.identity, f"{p.ssim:.6f}", f"{p.mask_ssim:.6f}"])


def print_table(reports: List[EvaluationReport]) -> None:
    print(f"{'variant':<18}{'SSIM':>8}{'mask-SSIM':>11}{'IS':>8}{'mask-IS':>9}")
    for r in reports:
        print(f"{r.variant:<18}{r.ssim:>8.3f}{r.mask_ssim:>11.3f}{r.inception_score:>8.3f}{r.mask_inception_score:>9.3f}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = load_run_config(args)
    if args.test_pairs:
        config = config.with_overrides(data={"test_pairs": args.test_pairs})
    oracle = build_oracle(args.oracle)

    manifest = RunManifest(kind="evaluate", seed=config.train.seed, config=config.model_dump(mode="json", by_alias=True))
    size = (config.g1.image_height, config.g1.image_width)
    states = [load_checkpoint(path) for path in args.checkpoint]
    for path, state in zip(args.checkpoint, states):
        trained = (state.config.g1.image_height, state.config.g1.image_width)
        if trained != size:
            raise CheckpointMismatchError(f"{path} was trained at {trained[0]}x{trained[1]}, data is {size[0]}x{size[1]}")
    _, data = open_pairs(config, "test")

    reports, samples = [], []
    for state in states:
        g2 = state if state.stage == TrainStage.STAGE2 else None
        variant = variant_name(state.config, state.stage)
        reports.append(evaluate_model(state, g2, data, oracle, variant, splits=args.splits))
        batch, output = next(generate_for_dataset(state, g2, data, batch_size=GRID_PAIRS))
        samples.append(output)

    out = output_dir(args, "evaluate")
    write_report(out / "report.csv", reports)
    write_per_pair(out / "per_pair.csv", reports)
    # Columns: condition, target pose, target, then one output per checkpoint
    save_sample_grid(out / "samples.png", batch, samples)
    manifest.extra = {
        "checkpoints": args.checkpoint,
        "variants": [r.variant for r in reports],
        "oracle": args.oracle,
        "splits": args.splits,
        "test_pairs": len(data),
    }
    manifest.finish(out, ["per_pair.csv", "report.csv", "samples.png"])
    print_table(reports)
    print(f"[OK] report written to {out / 'report.csv'}")
    return 0
