import argparse
import logging

from pg2.cli.common import add_config_flags, load_run_config, open_pairs, output_dir
from pg2.core.config import TrainStage
from pg2.core.errors import UsageError
from pg2.trainer import load_checkpoint, train_one_stage, train_stage1, train_stage2, variant_name

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train stage 1, stage 2 or the one-stage ablation")
    add_config_flags(parser)
    parser.add_argument("--stage", choices=[s.value for s in TrainStage], help="override train.stage")
    parser.add_argument("--resume", help="checkpoint to continue from; must match the config hash")
    parser.add_argument("--g1", help="stage-I checkpoint (required for stage 2)")
    parser.add_argument("--iterations", type=int, help="override train.max_iterations")
    parser.set_defaults(handler=cmd_train)


def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args, stage=args.stage, max_iterations=args.iterations)
    stage = config.train.stage

    # Every compatibility check runs before the data is touched
    resume = load_checkpoint(args.resume, expected=config) if args.resume else None
    if resume is not None and resume.stage != stage:
        raise UsageError(f"resume checkpoint is stage {resume.stage.value}, config is stage {stage.value}")
    g1 = None
    if stage == TrainStage.STAGE2:
        if not args.g1 and resume is None:
            raise UsageError("stage 2 needs --g1 <stage-I checkpoint>")
        if args.g1:
            g1 = load_checkpoint(args.g1)

    _, data = open_pairs(config, "train")
    variant = variant_name(config, stage)
    run_dir = output_dir(args, f"{variant}-{config.config_hash()[:8]}")
    print(f"[RUN] {variant}: {len(data)} pairs, iterations {config.train.max_iterations}, output {run_dir}")

    if stage == TrainStage.STAGE1:
        state = train_stage1(data, config, run_dir, resume=resume)
    elif stage == TrainStage.STAGE2:
        state = train_stage2(data, g1, config, run_dir, resume=resume)
    else:
        state = train_one_stage(data, config, run_dir, resume=resume)

    last = state.history[-1] if state.history else {}
    summary = " ".join(f"{k}={v:.4g}" for k, v in last.items() if k != "iteration")
    print(f"[OK] {variant} at iteration {state.iteration} {summary}")
    return 0
