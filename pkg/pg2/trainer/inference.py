import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import torch

from pg2.core.config import PoseEmbedding
from pg2.core.errors import CheckpointMismatchError, ShapeError
from pg2.models.pose import KeypointSet
from pg2.models.train_state import TrainState
from pg2.pose_codec import encode_heatmaps, heatmaps_to_tensor

logger = logging.getLogger(__name__)


def _pose_batch(poses: Sequence[KeypointSet], mode: PoseEmbedding, height: int, width: int) -> torch.Tensor:
    if mode == PoseEmbedding.CE:
        return torch.from_numpy(np.stack([kp.coordinate_vector() for kp in poses]))
    return torch.stack([heatmaps_to_tensor(encode_heatmaps(kp, height, width)) for kp in poses])


@torch.no_grad()
def generate(
    g1: TrainState,
    g2: Optional[TrainState],
    condition: torch.Tensor,
    kp: Union[KeypointSet, Sequence[KeypointSet]],
) -> Tuple[torch.Tensor, Optional[torch.Tensor]]:
    """Coarse (and refined, when g2 is given) images of the condition person in each pose.

    condition is (3, H, W) or (1, 3, H, W); K poses give (K, 3, H, W) outputs.
    """
    cfg = g1.config.g1
    if g2 is not None and g2.g1_hash != g1.g1_hash:
        raise CheckpointMismatchError(
            f"stage-II state was trained on G1 {g2.g1_hash[:12]}, given G1 is {g1.g1_hash[:12]}"
        )

    if condition.dim() == 3:
        condition = condition.unsqueeze(0)
    expected = (1, 3, cfg.image_height, cfg.image_width)
    if tuple(condition.shape) != expected:
        raise ShapeError(f"condition must be {expected[1:]} for this model, got {tuple(condition.shape)}")

    poses = [kp] if isinstance(kp, KeypointSet) else list(kp)
    if not poses:
        raise ShapeError("no target poses given")
    pose = _pose_batch(poses, cfg.embedding_mode, cfg.image_height, cfg.image_width)

    net_g1 = g1.networks["g1"]
    device = next(net_g1.parameters()).device
    cond = condition.to(device).expand(len(poses), -1, -1, -1)
    net_g1.eval()
    coarse = net_g1(cond, pose.to(device))

    refined = None
    if g2 is not None:
        net_g2 = g2.networks["g2"]
        net_g2.eval()
        _, refined = net_g2(cond, coarse)
    return coarse, refined
