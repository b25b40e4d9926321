import copy
import logging
from typing import Dict, Iterable, Optional

import torch
from torch import nn

from pg2.core.config import RunConfig, TrainConfig, TrainStage
from pg2.core.errors import CheckpointMismatchError
from pg2.models.train_state import TrainState
from pg2.nets import build_discriminator, build_g1, build_g2

logger = logging.getLogger(__name__)


def make_adam(params: Iterable[nn.Parameter], cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=cfg.learning_rate, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_eps)


def set_requires_grad(net: nn.Module, flag: bool) -> None:
    for p in net.parameters():
        p.requires_grad_(flag)


def build_networks(config: RunConfig, stage: TrainStage) -> Dict[str, nn.Module]:
    """Fresh networks for a stage, built in a fixed order from the current torch seed"""
    h, w = config.g1.image_height, config.g1.image_width
    networks: Dict[str, nn.Module] = {"g1": build_g1(config.g1)}
    if stage == TrainStage.STAGE2:
        networks["g2"] = build_g2(config.resolved_g2())
    if stage in (TrainStage.STAGE2, TrainStage.ONE_STAGE):
        networks["d"] = build_discriminator(config.d, h, w)
    return networks


def trainable_names(config: RunConfig, stage: TrainStage) -> list:
    if stage == TrainStage.STAGE1:
        return ["g1"]
    if stage == TrainStage.ONE_STAGE:
        return ["g1", "d"]
    names = ["g2", "d"]
    if config.train.finetune_g1:
        names.append("g1")
    return names


def build_optimizers(networks: Dict[str, nn.Module], config: RunConfig, stage: TrainStage) -> Dict[str, torch.optim.Adam]:
    return {name: make_adam(networks[name].parameters(), config.train) for name in trainable_names(config, stage)}


def init_state(config: RunConfig, stage: TrainStage, g1_parent: Optional[TrainState] = None) -> TrainState:
    """New TrainState at iteration 0; stage II copies G1 from its stage-I parent"""
    torch.manual_seed(config.train.seed)
    networks = build_networks(config, stage)

    if stage == TrainStage.STAGE2:
        if g1_parent is None:
            raise CheckpointMismatchError("stage II needs a trained stage-I generator")
        if g1_parent.g1_hash != config.g1_hash():
            raise CheckpointMismatchError(
                f"stage-I checkpoint was trained for a different G1 ({g1_parent.g1_hash[:12]} != {config.g1_hash()[:12]})"
            )
        networks["g1"] = copy.deepcopy(g1_parent.networks["g1"])
        if not config.train.finetune_g1:
            set_requires_grad(networks["g1"], False)
            networks["g1"].eval()
        logger.info(f"Stage II seeded from stage-I G1 at iteration {g1_parent.iteration}")

    optimizers = build_optimizers(networks, config, stage)
    return TrainState(
        stage=stage,
        config=config,
        networks=networks,
        optimizers=optimizers,
        iteration=0,
        rng_state=torch.get_rng_state(),
        g1_hash=config.g1_hash(),
    )
