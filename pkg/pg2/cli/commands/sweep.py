"""Stage-II lambda sweep: one run per lambda from a shared stage-I checkpoint."""
import argparse
import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Tuple

from pg2.cli.common import add_config_flags, load_run_config, open_pairs, output_dir, parse_floats, save_sample_grid
from pg2.core.config import RunConfig, TrainStage
from pg2.core.errors import UsageError
from pg2.core.manifest import RunManifest
from pg2.metrics.evaluation import evaluate_model, generate_for_dataset
from pg2.metrics.oracles import build_oracle
from pg2.trainer import load_checkpoint, train_stage2

logger = logging.getLogger(__name__)

GRID_PAIRS = 8


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="train stage 2 for each lambda and compare")
    add_config_flags(parser)
    parser.add_argument("--g1", required=True, help="stage-I checkpoint shared by all runs")
    parser.add_argument("--lambdas", required=True, help="comma-separated, e.g. 0,1,100")
    parser.add_argument("--iterations", type=int, help="override train.max_iterations")
    parser.add_argument("--oracle", default="palette")
    parser.add_argument("--parallel", type=int, default=1, help="worker processes (1 = sequential)")
    parser.set_defaults(handler=cmd_sweep_lambda)


def run_lambda(job: Tuple[str, str, str]) -> Dict[str, float]:
    """Train one lambda point; arguments are JSON/path strings so the job pickles"""
    config_json, g1_path, run_dir = job
    config = RunConfig.model_validate_json(config_json)
    g1 = load_checkpoint(g1_path)
    _, data = open_pairs(config, "train")
    state = train_stage2(data, g1, config, run_dir)
    return {"lambda": config.loss.lambda_, "masked_l1": state.history[-1]["masked_l1"]}


def cmd_sweep_lambda(args: argparse.Namespace) -> int:
    lambdas = parse_floats(args.lambdas)
    if not lambdas or any(v < 0 for v in lambdas):
        raise UsageError("--lambdas needs one or more non-negative values")
    manifest = RunManifest(kind="sweep")
    base = load_run_config(args, stage=TrainStage.STAGE2.value, max_iterations=args.iterations)
    out = output_dir(args, f"sweep-{base.config_hash()[:8]}")
    g1 = load_checkpoint(args.g1)

    jobs = []
    for lam in lambdas:
        config = base.with_overrides(loss={"lambda": lam})
        jobs.append((config.model_dump_json(by_alias=True), args.g1, str(out / f"lambda_{lam:g}")))

    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            finals = list(pool.map(run_lambda, jobs))
    else:
        finals = [run_lambda(job) for job in jobs]

    oracle = build_oracle(args.oracle)
    _, test_data = open_pairs(base, "test")
    rows: List[Dict[str, float]] = []
    batch, coarse = next(generate_for_dataset(g1, None, test_data, batch_size=GRID_PAIRS))
    columns = [coarse]
    for final, (_, _, run_dir) in zip(finals, jobs):
        state = load_checkpoint(Path(run_dir) / "checkpoint.pt")
        report = evaluate_model(g1, state, test_data, oracle, f"lambda={final['lambda']:g}")
        rows.append({**final, "ssim": report.ssim, "mask_ssim": report.mask_ssim, "mask_is": report.mask_inception_score})
        _, refined = next(generate_for_dataset(g1, state, test_data, batch_size=GRID_PAIRS))
        columns.append(refined)

    with (out / "sweep.csv").open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["lambda", "masked_l1", "ssim", "mask_ssim", "mask_is"])
        writer.writeheader()
        writer.writerows(rows)

    # Columns: condition, target pose, target, coarse, then one refined image per lambda
    save_sample_grid(out / "sweep_grid.png", batch, columns)

    manifest.seed = base.train.seed
    manifest.config = base.model_dump(mode="json", by_alias=True)
    manifest.config_hash = base.config_hash()
    manifest.g1_hash = g1.g1_hash
    manifest.extra = {"lambdas": lambdas, "g1": args.g1, "oracle": args.oracle, "parallel": args.parallel}
    manifest.finish(out, ["sweep.csv", "sweep_grid.png"] + [Path(run_dir).name for _, _, run_dir in jobs])
    for row in rows:
        print(f"[OK] lambda={row['lambda']:g} masked_l1={row['masked_l1']:.4g} mask-SSIM={row['mask_ssim']:.3f}")
    return 0
