from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Deque, Dict, List, Optional

import torch
from torch import nn

if TYPE_CHECKING:
    from pg2.core.config import RunConfig, TrainStage

# Stage-II samples kept from the most recent log points
MAX_LOGGED_SAMPLES = 64


@dataclass
class TrainState:
    """Everything a run needs to continue: networks, Adam moments, iteration, rng.

    history, run_dir and the samples are runtime-only and never written to a checkpoint.
    """

    stage: TrainStage
    config: RunConfig
    networks: Dict[str, nn.Module]
    optimizers: Dict[str, torch.optim.Optimizer]
    iteration: int = 0
    rng_state: Optional[torch.Tensor] = None
    # Hash of the G1 section the networks were built for (shared with a stage-I parent)
    g1_hash: str = ""
    history: List[Dict[str, Any]] = field(default_factory=list)
    run_dir: Optional[Path] = None
    last_sample: Dict[str, torch.Tensor] = field(default_factory=dict)
    logged_samples: Deque[Dict[str, torch.Tensor]] = field(default_factory=lambda: deque(maxlen=MAX_LOGGED_SAMPLES))

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()
