"""Training loops for stage I, stage II and the one-stage G1+D ablation.

Every stage shares one loop: batches come from ScheduleBatchSampler, so the
data seen at iteration t depends only on (seed, t); the step function owns
the forward/backward/update for its networks and returns scalar losses.
"""
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Union

import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from pg2.core import settings
from pg2.core.config import PoseEmbedding, ReconstructionLoss, RunConfig, TrainStage
from pg2.core.errors import CheckpointMismatchError, ConfigError, NumericalError
from pg2.core.manifest import RunManifest
from pg2.data.loader import PairDataset, ScheduleBatchSampler
from pg2.losses import adversarial_g_loss, d_loss, g2_total_loss, pose_mask_l1
from pg2.models.train_state import TrainState
from pg2.trainer.checkpoint import save_checkpoint
from pg2.trainer.loss_log import LossLog
from pg2.trainer.state import init_state, set_requires_grad

logger = logging.getLogger(__name__)

StepFn = Callable[[TrainState, Dict[str, torch.Tensor]], Dict[str, float]]

STAGE1_COLUMNS = ["masked_l1"]
ADVERSARIAL_COLUMNS = ["d_loss", "g_adv", "masked_l1", "d_real", "d_fake"]


def variant_name(config: RunConfig, stage: TrainStage) -> str:
    """Ablation row label for a trained configuration"""
    if stage == TrainStage.STAGE2:
        return "G1+G2+D"
    if stage == TrainStage.ONE_STAGE:
        return "G1+D"
    mode = config.g1.embedding_mode
    if mode == PoseEmbedding.CE:
        return "G1-CE-L1"
    if mode == PoseEmbedding.HME:
        return "G1-HME-L1"
    if config.train.reconstruction == ReconstructionLoss.L1:
        return "G1-L1"
    return "G1-poseMaskLoss"


def pose_input(batch: Dict[str, torch.Tensor], mode: PoseEmbedding) -> torch.Tensor:
    return batch["coords"] if mode == PoseEmbedding.CE else batch["pose"]


def loss_mask(batch: Dict[str, torch.Tensor], config: RunConfig) -> torch.Tensor:
    if config.train.reconstruction == ReconstructionLoss.L1:
        return torch.zeros_like(batch["mask"])
    return batch["mask"]


def _to_device(batch: Dict[str, object], device: torch.device) -> Dict[str, object]:
    return {k: v.to(device) if isinstance(v, torch.Tensor) else v for k, v in batch.items()}


def _fail(state: TrainState, detail: str, losses: Dict[str, float]) -> None:
    iteration = state.iteration + 1
    dump_path = None
    if state.run_dir is not None:
        dump_path = save_checkpoint(state, Path(state.run_dir) / "failure.pt")
        with open(Path(state.run_dir) / "failure.txt", "w") as f:
            f.write(f"iteration={iteration}\n")
            for name, value in losses.items():
                f.write(f"{name}={value}\n")
    logger.error(f"Non-finite loss at iteration {iteration}: {detail}")
    raise NumericalError(f"{detail} at iteration {iteration}", iteration=iteration, dump_path=str(dump_path) if dump_path else None)


def _require_finite(state: TrainState, name: str, loss: torch.Tensor, losses: Dict[str, float]) -> None:
    if not torch.isfinite(loss):
        _fail(state, f"{name} is {loss.item()}", losses)


def stage1_step(state: TrainState, batch: Dict[str, torch.Tensor]) -> Dict[str, float]:
    config = state.config
    g1, opt = state.networks["g1"], state.optimizers["g1"]
    g1.train()
    coarse = g1(batch["condition"], pose_input(batch, config.g1.embedding_mode))
    loss = pose_mask_l1(coarse, batch["target"], loss_mask(batch, config), config.loss.reduction)
    _require_finite(state, "masked_l1", loss, {})

    opt.zero_grad()
    loss.backward()
    opt.step()
    return {"masked_l1": loss.item()}


def _adversarial_step(
    state: TrainState,
    condition: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
    produce: Callable[[], torch.Tensor],
    generator_opts: List[torch.optim.Optimizer],
) -> Dict[str, float]:
    """D update(s) on (condition, target) vs (condition, fake), then one generator update"""
    config = state.config
    d, opt_d = state.networks["d"], state.optimizers["d"]
    eps = config.loss.prob_eps

    fake = produce()
    set_requires_grad(d, True)
    for _ in range(config.train.d_steps_per_g_step):
        d_real = d(condition, target)
        d_fake = d(condition, fake.detach())
        loss_d = d_loss(d_real, d_fake, eps)
        _require_finite(state, "d_loss", loss_d, {})
        opt_d.zero_grad()
        loss_d.backward()
        opt_d.step()

    set_requires_grad(d, False)
    d_fake_g = d(condition, fake)
    g_adv = adversarial_g_loss(d_fake_g, eps)
    l1 = pose_mask_l1(fake, target, mask, config.loss.reduction)
    loss_g = g2_total_loss(d_fake_g, fake, target, mask, config.loss)
    losses = {
        "d_loss": loss_d.item(),
        "g_adv": g_adv.item(),
        "masked_l1": l1.item(),
        "d_real": d_real.mean().item(),
        "d_fake": d_fake.mean().item(),
    }
    _require_finite(state, "generator loss", loss_g, losses)
    for opt in generator_opts:
        opt.zero_grad()
    loss_g.backward()
    for opt in generator_opts:
        opt.step()
    set_requires_grad(d, True)
    return losses


def stage2_step(state: TrainState, batch: Dict[str, torch.Tensor]) -> Dict[str, float]:
    config = state.config
    g1, g2 = state.networks["g1"], state.networks["g2"]
    condition, target = batch["condition"], batch["target"]
    finetune = config.train.finetune_g1
    g2.train()
    if finetune:
        g1.train()

    captured: Dict[str, torch.Tensor] = {}

    def produce() -> torch.Tensor:
        with torch.set_grad_enabled(finetune):
            coarse = g1(condition, pose_input(batch, config.g1.embedding_mode))
        diff, refined = g2(condition, coarse)
        captured.update(coarse=coarse.detach(), diff=diff.detach(), refined=refined.detach())
        return refined

    opts = [state.optimizers["g2"]] + ([state.optimizers["g1"]] if finetune else [])
    losses = _adversarial_step(state, condition, target, loss_mask(batch, config), produce, opts)
    state.last_sample = captured
    return losses


def one_stage_step(state: TrainState, batch: Dict[str, torch.Tensor]) -> Dict[str, float]:
    config = state.config
    g1 = state.networks["g1"]
    g1.train()

    def produce() -> torch.Tensor:
        return g1(batch["condition"], pose_input(batch, config.g1.embedding_mode))

    return _adversarial_step(
        state, batch["condition"], batch["target"], loss_mask(batch, config), produce, [state.optimizers["g1"]]
    )


_STEPS: Dict[TrainStage, StepFn] = {
    TrainStage.STAGE1: stage1_step,
    TrainStage.STAGE2: stage2_step,
    TrainStage.ONE_STAGE: one_stage_step,
}


def run_training(state: TrainState, data: PairDataset, run_dir: Optional[Union[str, Path]] = None) -> TrainState:
    """Advance state from its iteration to config.train.max_iterations"""
    config = state.config
    cfg = config.train
    device = torch.device(settings.DEVICE)
    if settings.DETERMINISTIC:
        torch.use_deterministic_algorithms(True, warn_only=True)
    for net in state.networks.values():
        net.to(device)

    state.run_dir = Path(run_dir) if run_dir is not None else None
    remaining = cfg.max_iterations - state.iteration
    if remaining <= 0:
        logger.info(f"Nothing to do: state already at iteration {state.iteration}")
        return state

    step = _STEPS[state.stage]
    columns = STAGE1_COLUMNS if state.stage == TrainStage.STAGE1 else ADVERSARIAL_COLUMNS
    log = LossLog(state.run_dir / "loss_log.csv", columns) if state.run_dir else None
    manifest = None
    if state.run_dir is not None:
        manifest = RunManifest(
            kind=f"train-{state.stage.value}",
            seed=cfg.seed,
            config=config.model_dump(mode="json", by_alias=True),
            config_hash=state.config_hash,
            g1_hash=state.g1_hash,
            iteration=state.iteration,
            extra={"variant": variant_name(config, state.stage)},
        )
        config.dump(state.run_dir / "config.json")
        manifest.write(state.run_dir)

    sampler = ScheduleBatchSampler(
        len(data), cfg.batch_size, cfg.seed, state.iteration + 1, remaining, cfg.augment_flip
    )
    loader = DataLoader(data, batch_sampler=sampler, num_workers=settings.NUM_WORKERS)
    logger.info(f"Training {variant_name(config, state.stage)} from iteration {state.iteration + 1} to {cfg.max_iterations}")

    progress = tqdm(loader, total=remaining, disable=not settings.PROGRESS, desc=f"stage {state.stage.value}")
    try:
        _train_loop(state, progress, step, device, log)
    except NumericalError:
        if manifest is not None:
            manifest.iteration = state.iteration
            manifest.finish(state.run_dir, ["failure.pt", "failure.txt"], status="failed")
        raise

    if manifest is not None:
        manifest.iteration = state.iteration
        manifest.checkpoint = "checkpoint.pt"
        manifest.finish(state.run_dir, ["checkpoint.pt", "config.json", "loss_log.csv"])
    logger.info(f"Finished at iteration {state.iteration}: {state.history[-1]}")
    return state


def _train_loop(state: TrainState, progress, step: StepFn, device: torch.device, log: Optional[LossLog]) -> None:
    cfg = state.config.train
    for batch in progress:
        losses = step(state, _to_device(batch, device))
        if not all(math.isfinite(v) for v in losses.values()):
            _fail(state, "non-finite logged loss", losses)
        state.iteration += 1
        state.history.append({"iteration": state.iteration, **losses})

        at_end = state.iteration == cfg.max_iterations
        if state.iteration % cfg.log_every == 0 or state.iteration == 1 or at_end:
            progress.set_postfix({k: f"{v:.4g}" for k, v in losses.items()})
            if log is not None:
                log.append(state.iteration, losses)
            if state.last_sample:
                state.logged_samples.append({k: v.cpu() for k, v in state.last_sample.items()})
        if state.run_dir is not None and (state.iteration % cfg.checkpoint_every == 0 or at_end):
            state.rng_state = torch.get_rng_state()
            save_checkpoint(state, state.run_dir / "checkpoint.pt")


def _resume_with(resume: Optional[TrainState], config: RunConfig) -> Optional[TrainState]:
    # Schedule fields (max_iterations, checkpoint cadence) come from the new config
    if resume is not None:
        if resume.config_hash != config.config_hash():
            raise CheckpointMismatchError(
                f"resume state has config {resume.config_hash[:12]}, current config is {config.config_hash()[:12]}"
            )
        resume.config = config
    return resume


def _check_stage(config: RunConfig, stage: TrainStage) -> None:
    if config.train.stage != stage:
        raise ConfigError(f"config is for stage {config.train.stage.value}, not {stage.value}")


def train_stage1(
    data: PairDataset,
    config: RunConfig,
    run_dir: Optional[Union[str, Path]] = None,
    resume: Optional[TrainState] = None,
) -> TrainState:
    _check_stage(config, TrainStage.STAGE1)
    state = _resume_with(resume, config) or init_state(config, TrainStage.STAGE1)
    return run_training(state, data, run_dir)


def train_stage2(
    data: PairDataset,
    g1: Optional[TrainState],
    config: RunConfig,
    run_dir: Optional[Union[str, Path]] = None,
    resume: Optional[TrainState] = None,
) -> TrainState:
    """G1 is copied from the stage-I state and stays frozen unless finetune_g1 is set"""
    _check_stage(config, TrainStage.STAGE2)
    if resume is None and (g1 is None or g1.stage != TrainStage.STAGE1):
        raise ConfigError("stage II needs a stage-I state to start from")
    state = _resume_with(resume, config) or init_state(config, TrainStage.STAGE2, g1_parent=g1)
    return run_training(state, data, run_dir)


def train_one_stage(
    data: PairDataset,
    config: RunConfig,
    run_dir: Optional[Union[str, Path]] = None,
    resume: Optional[TrainState] = None,
) -> TrainState:
    _check_stage(config, TrainStage.ONE_STAGE)
    state = _resume_with(resume, config) or init_state(config, TrainStage.ONE_STAGE)
    return run_training(state, data, run_dir)
