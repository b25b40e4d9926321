"""Pose-mask L1 reconstruction loss and the binary cross-entropy adversarial losses.

Probabilities are clamped into [eps, 1 - eps] before the logarithm. With the
sum reduction the loss is summed over pixels and channels and averaged over
the batch; the mean reduction averages over every element, so lambda must
be rescaled by the pixel count when switching between the two.
"""
from typing import Union

import torch

from pg2.core.config import LossConfig, Reduction
from pg2.core.errors import NumericalError, RangeError, ShapeError

DEFAULT_EPS = 1e-7

Probability = Union[torch.Tensor, float]


def _as_tensor(value: Probability) -> torch.Tensor:
    return value if isinstance(value, torch.Tensor) else torch.tensor(float(value), dtype=torch.float64)


def pose_mask_l1(
    gen: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
    reduction: Reduction = Reduction.SUM,
) -> torch.Tensor:
    """|gen - target| weighted by (1 + mask); mask broadcasts over the colour channels"""
    if gen.shape != target.shape:
        raise ShapeError(f"generated {tuple(gen.shape)} and target {tuple(target.shape)} differ")
    if mask.dim() == gen.dim() - 1:
        mask = mask.unsqueeze(-3)
    if mask.shape[-2:] != gen.shape[-2:] or mask.shape[-3] not in (1, gen.shape[-3]):
        raise ShapeError(f"mask {tuple(mask.shape)} does not broadcast onto {tuple(gen.shape)}")

    weighted = (gen - target).abs() * (1.0 + mask)
    if reduction == Reduction.MEAN:
        return weighted.mean()
    batch = gen.shape[0] if gen.dim() == 4 else 1
    return weighted.sum() / batch


def bce(pred: Probability, label: float, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """-[label * ln(pred) + (1 - label) * ln(1 - pred)], averaged over a batch"""
    pred = _as_tensor(pred)
    if not torch.all(torch.isfinite(pred)):
        raise NumericalError("bce received a non-finite probability")
    if torch.any(pred < -eps) or torch.any(pred > 1.0 + eps):
        raise RangeError("bce expects probabilities in (0, 1)")
    pred = pred.clamp(eps, 1.0 - eps)
    loss = -(label * torch.log(pred) + (1.0 - label) * torch.log(1.0 - pred))
    return loss.mean()


def d_loss(d_real: Probability, d_fake: Probability, eps: float = DEFAULT_EPS) -> torch.Tensor:
    return bce(d_real, 1.0, eps) + bce(d_fake, 0.0, eps)


def adversarial_g_loss(d_fake: Probability, eps: float = DEFAULT_EPS) -> torch.Tensor:
    return bce(d_fake, 1.0, eps)


def g2_total_loss(
    d_fake: Probability,
    gen: torch.Tensor,
    target: torch.Tensor,
    mask: torch.Tensor,
    cfg: LossConfig,
) -> torch.Tensor:
    """Adversarial term plus lambda-weighted pose-mask L1 of the refined image"""
    adversarial = adversarial_g_loss(d_fake, cfg.prob_eps)
    if cfg.lambda_ == 0:
        return adversarial
    return adversarial + cfg.lambda_ * pose_mask_l1(gen, target, mask, cfg.reduction)
