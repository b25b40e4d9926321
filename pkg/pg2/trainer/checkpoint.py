"""Checkpoint persistence.

A checkpoint stores every network's parameters, every optimizer's moments,
the iteration, the torch RNG state and the config with its hash. Loading
rebuilds the networks from the stored config, so a checkpoint is usable
without the file it was trained from.
"""
import logging
import os
from pathlib import Path
from typing import Optional, Union

import torch
from pydantic import ValidationError

from pg2.core.config import RunConfig, TrainStage
from pg2.core.errors import CheckpointMismatchError, DataError
from pg2.models.train_state import TrainState
from pg2.trainer.state import build_networks, build_optimizers, set_requires_grad

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def save_checkpoint(state: TrainState, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": FORMAT_VERSION,
        "stage": state.stage.value,
        "config": state.config.model_dump(mode="json", by_alias=True),
        "config_hash": state.config_hash,
        "geometry_hash": state.config.geometry_hash(),
        "g1_hash": state.g1_hash,
        "iteration": state.iteration,
        "networks": {name: net.state_dict() for name, net in state.networks.items()},
        "optimizers": {name: opt.state_dict() for name, opt in state.optimizers.items()},
        "rng_state": torch.get_rng_state(),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    logger.debug(f"Saved checkpoint {path} at iteration {state.iteration}")
    return path


def load_checkpoint(path: Union[str, Path], expected: Optional[RunConfig] = None) -> TrainState:
    """Rebuild a TrainState; with expected, refuse when the config hashes differ"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise DataError(f"unreadable checkpoint {path}: {e}")

    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointMismatchError(f"checkpoint format {version} is not {FORMAT_VERSION}")

    try:
        config = RunConfig.model_validate(payload["config"])
    except ValidationError as e:
        raise CheckpointMismatchError(f"checkpoint config no longer validates: {e.errors()[0]['msg']}")
    if config.config_hash() != payload["config_hash"]:
        raise CheckpointMismatchError("stored config does not match its recorded hash")
    if config.geometry_hash() != payload.get("geometry_hash"):
        raise CheckpointMismatchError("stored network geometry does not match the stored config")
    if expected is not None and expected.config_hash() != payload["config_hash"]:
        raise CheckpointMismatchError(
            f"checkpoint {path.name} was trained with config {payload['config_hash'][:12]}, "
            f"current config is {expected.config_hash()[:12]}"
        )

    stage = TrainStage(payload["stage"])
    networks = build_networks(config, stage)
    try:
        for name, net in networks.items():
            net.load_state_dict(payload["networks"][name])
    except (KeyError, RuntimeError) as e:
        raise CheckpointMismatchError(f"checkpoint parameters do not fit the config: {e}")

    if stage == TrainStage.STAGE2 and not config.train.finetune_g1:
        set_requires_grad(networks["g1"], False)
        networks["g1"].eval()

    optimizers = build_optimizers(networks, config, stage)
    for name, opt in optimizers.items():
        opt.load_state_dict(payload["optimizers"][name])

    rng_state = payload["rng_state"]
    torch.set_rng_state(rng_state)
    logger.info(f"Loaded {stage.value} checkpoint {path} at iteration {payload['iteration']}")
    return TrainState(
        stage=stage,
        config=config,
        networks=networks,
        optimizers=optimizers,
        iteration=payload["iteration"],
        rng_state=rng_state,
        g1_hash=payload["g1_hash"],
    )
