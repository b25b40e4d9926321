"""Keypoints -> network-ready heatmaps and foreground masks, plus pose-aware flipping.

Coordinates follow image conventions: x is the column, y the row. Heatmap
disks and limb bands use exact integer arithmetic so that results do not
depend on edge orientation, edge order or mirroring.
"""
import colorsys
import logging
from typing import Optional, Tuple

import numpy as np
import torch
from skimage.morphology import closing, dilation, disk

from pg2.core.errors import ShapeError
from pg2.models.pose import (
    FLIP_PERMUTATION,
    INVISIBLE,
    NUM_KEYPOINTS,
    KeypointSet,
    MorphologyParams,
    PoseMask,
    PoseTensor,
)

logger = logging.getLogger(__name__)


def _pixel_grid(height: int, width: int) -> Tuple[np.ndarray, np.ndarray]:
    rows = np.arange(height, dtype=np.int64)[:, None]
    cols = np.arange(width, dtype=np.int64)[None, :]
    return rows, cols


def _check_dimensions(height: int, width: int, radius: int) -> None:
    if height <= 0 or width <= 0:
        raise ShapeError(f"image dimensions must be positive, got {height}x{width}")
    if radius < 0:
        raise ShapeError(f"radius must be non-negative, got {radius}")
    if height < 2 * radius + 1 or width < 2 * radius + 1:
        raise ShapeError(f"{height}x{width} image cannot hold a radius-{radius} disk")


def encode_heatmaps(kp: KeypointSet, height: int, width: int, radius: int = 4) -> PoseTensor:
    """One binary channel per joint: 1 where (row - y)^2 + (col - x)^2 <= radius^2"""
    _check_dimensions(height, width, radius)
    kp.check_bounds(height, width)

    rows, cols = _pixel_grid(height, width)
    channels = np.zeros((NUM_KEYPOINTS, height, width), dtype=np.uint8)
    for k, point in enumerate(kp.points):
        if point.visible:
            channels[k] = (rows - point.y) ** 2 + (cols - point.x) ** 2 <= radius**2
    return PoseTensor(channels=channels, radius=radius)


def _segment_band(a: np.ndarray, b: np.ndarray, rows: np.ndarray, cols: np.ndarray, thickness: float) -> np.ndarray:
    # distance(pixel, segment ab) <= thickness / 2, compared in squared integer form
    limit = thickness**2
    ax, ay = int(a[0]), int(a[1])
    bx, by = int(b[0]), int(b[1])
    px, py = cols - ax, rows - ay
    qx, qy = cols - bx, rows - by

    band = (4 * (px * px + py * py) <= limit) | (4 * (qx * qx + qy * qy) <= limit)
    dx, dy = bx - ax, by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0:
        return band

    dot = px * dx + py * dy
    cross = px * dy - py * dx
    between = (dot >= 0) & (dot <= length_sq)
    return band | (between & (4 * cross * cross <= limit * length_sq))


def compute_pose_mask(
    kp: KeypointSet,
    height: int,
    width: int,
    params: Optional[MorphologyParams] = None,
) -> PoseMask:
    """Foreground mask: thick limbs + keypoint disks, then dilation and closing.

    Fewer than two visible keypoints yields an all-zero mask, which turns the
    pose-mask loss into plain L1 for that sample.
    """
    params = params or MorphologyParams()
    kp.check_bounds(height, width)

    mask = np.zeros((height, width), dtype=bool)
    if kp.visible_count < 2:
        return PoseMask(mask=mask.astype(np.uint8), provenance=params)

    rows, cols = _pixel_grid(height, width)
    coords = kp.to_array()
    visible = kp.visible_mask

    for a, b in params.edges:
        if visible[a] and visible[b]:
            mask |= _segment_band(coords[a], coords[b], rows, cols, params.limb_thickness)

    radius_sq = params.keypoint_radius**2
    for k in np.flatnonzero(visible):
        x, y = coords[k]
        mask |= (rows - y) ** 2 + (cols - x) ** 2 <= radius_sq

    mask = mask.astype(np.uint8)
    if params.dilation_radius > 0:
        mask = dilation(mask, disk(params.dilation_radius))
    if params.closing_radius > 0:
        for _ in range(params.closing_iterations):
            mask = closing(mask, disk(params.closing_radius))

    return PoseMask(mask=(mask > 0).astype(np.uint8), provenance=params)


def flip_keypoints(kp: KeypointSet, width: int) -> KeypointSet:
    """Mirror x -> width - 1 - x and swap left/right joints"""
    coords = kp.to_array()
    visible = kp.visible_mask
    flipped = []
    for k in range(NUM_KEYPOINTS):
        source = FLIP_PERMUTATION[k]
        if visible[source]:
            flipped.append((width - 1 - int(coords[source, 0]), int(coords[source, 1])))
        else:
            flipped.append(INVISIBLE)
    return KeypointSet.from_coordinates(flipped)


def flip_image(img: torch.Tensor) -> torch.Tensor:
    return torch.flip(img, dims=(-1,))


def flip_pair(img: torch.Tensor, kp: KeypointSet) -> Tuple[torch.Tensor, KeypointSet]:
    height, width = img.shape[-2], img.shape[-1]
    kp.check_bounds(height, width)
    return flip_image(img), flip_keypoints(kp, width)


def _joint_colours() -> np.ndarray:
    colours = [colorsys.hsv_to_rgb(k / NUM_KEYPOINTS, 1.0, 1.0) for k in range(NUM_KEYPOINTS)]
    return np.asarray(colours, dtype=np.float32)


def render_pose(pose: PoseTensor) -> torch.Tensor:
    """Heatmaps painted one colour per joint on black, as a [-1, 1] image"""
    colours = _joint_colours()
    canvas = np.zeros((pose.height, pose.width, 3), dtype=np.float32)
    for k in range(NUM_KEYPOINTS):
        canvas[pose.channels[k] > 0] = colours[k]
    return torch.from_numpy(canvas).permute(2, 0, 1) * 2.0 - 1.0


def heatmaps_to_tensor(pose: PoseTensor) -> torch.Tensor:
    return torch.from_numpy(pose.channels.astype(np.float32))


def mask_to_tensor(mask: PoseMask) -> torch.Tensor:
    return torch.from_numpy(mask.mask.astype(np.float32)).unsqueeze(0)
