"""Structural similarity on normalized image tensors.

Images in [-1, 1] are mapped to [0, 1] and compared with an 11x11 Gaussian
window (sigma 1.5), K1 = 0.01, K2 = 0.03. Only windows lying fully inside
the image are scored. Computation is float64 throughout.
"""
from typing import Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from pg2.core.errors import MetricError
from pg2.models.pose import PoseMask

WINDOW_SIZE = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03
C1 = K1**2
C2 = K2**2

MaskLike = Union[PoseMask, np.ndarray, torch.Tensor]


def gaussian_window(size: int = WINDOW_SIZE, sigma: float = SIGMA) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - size // 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def _prepare(a: torch.Tensor, b: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    if a.shape != b.shape:
        raise MetricError(f"ssim inputs differ in shape: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() == 3:
        a, b = a.unsqueeze(0), b.unsqueeze(0)
    if a.dim() != 4:
        raise MetricError(f"expected (C, H, W) or (B, C, H, W), got {tuple(a.shape)}")
    if a.shape[-1] < WINDOW_SIZE or a.shape[-2] < WINDOW_SIZE:
        raise MetricError(f"{a.shape[-2]}x{a.shape[-1]} image is smaller than the {WINDOW_SIZE}x{WINDOW_SIZE} window")
    to_unit = lambda x: (x.detach().to(torch.float64).cpu() + 1.0) / 2.0
    return to_unit(a), to_unit(b)


def _local_stats(a: torch.Tensor, b: torch.Tensor):
    channels = a.shape[1]
    window = gaussian_window().expand(channels, 1, WINDOW_SIZE, WINDOW_SIZE)

    def blur(x):
        return F.conv2d(x, window, groups=channels)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def ssim_maps(a: torch.Tensor, b: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """Per-window luminance and contrast-structure terms, shape (B, C, H-10, W-10)"""
    mu_a, mu_b, var_a, var_b, cov = _local_stats(*_prepare(a, b))
    luminance = (2 * mu_a * mu_b + C1) / (mu_a**2 + mu_b**2 + C1)
    contrast_structure = (2 * cov + C2) / (var_a + var_b + C2)
    return luminance, contrast_structure


def ssim_per_image(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    luminance, contrast_structure = ssim_maps(a, b)
    return (luminance * contrast_structure).mean(dim=(1, 2, 3))


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean SSIM over windows and channels (and the batch, if batched)"""
    return float(ssim_per_image(a, b).mean())


def ssim_components(a: torch.Tensor, b: torch.Tensor) -> Tuple[float, float]:
    luminance, contrast_structure = ssim_maps(a, b)
    return float(luminance.mean()), float(contrast_structure.mean())


def _mask_tensor(mask: MaskLike) -> torch.Tensor:
    if isinstance(mask, PoseMask):
        mask = mask.mask
    if isinstance(mask, np.ndarray):
        mask = torch.from_numpy(mask)
    return mask.to(torch.float64)


def apply_mask(image: torch.Tensor, mask: MaskLike) -> torch.Tensor:
    """Background becomes -1, which is 0 after mapping to [0, 1]"""
    m = _mask_tensor(mask)
    if m.dim() == image.dim() - 1:
        m = m.unsqueeze(-3)
    if m.shape[-2:] != image.shape[-2:]:
        raise MetricError(f"mask {tuple(m.shape[-2:])} does not match image {tuple(image.shape[-2:])}")
    image = image.to(torch.float64)
    return image * m - (1.0 - m)


def mask_ssim(a: torch.Tensor, b: torch.Tensor, mask: MaskLike) -> float:
    return ssim(apply_mask(a, mask), apply_mask(b, mask))


def mask_ssim_per_image(a: torch.Tensor, b: torch.Tensor, masks: torch.Tensor) -> torch.Tensor:
    """masks is (B, H, W) or (B, 1, H, W)"""
    return ssim_per_image(apply_mask(a, masks), apply_mask(b, masks))
