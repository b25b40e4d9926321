import enum
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pg2.core.errors import DataError

NUM_KEYPOINTS = 18
INVISIBLE = (-1, -1)


class Joint(enum.IntEnum):
    NOSE = 0
    NECK = 1
    R_SHOULDER = 2
    R_ELBOW = 3
    R_WRIST = 4
    L_SHOULDER = 5
    L_ELBOW = 6
    L_WRIST = 7
    R_HIP = 8
    R_KNEE = 9
    R_ANKLE = 10
    L_HIP = 11
    L_KNEE = 12
    L_ANKLE = 13
    R_EYE = 14
    L_EYE = 15
    R_EAR = 16
    L_EAR = 17


# Left/right partners, swapped by a horizontal flip
FLIP_PAIRS: List[Tuple[Joint, Joint]] = [
    (Joint.R_SHOULDER, Joint.L_SHOULDER),
    (Joint.R_ELBOW, Joint.L_ELBOW),
    (Joint.R_WRIST, Joint.L_WRIST),
    (Joint.R_HIP, Joint.L_HIP),
    (Joint.R_KNEE, Joint.L_KNEE),
    (Joint.R_ANKLE, Joint.L_ANKLE),
    (Joint.R_EYE, Joint.L_EYE),
    (Joint.R_EAR, Joint.L_EAR),
]

FLIP_PERMUTATION: List[int] = list(range(NUM_KEYPOINTS))
for _right, _left in FLIP_PAIRS:
    FLIP_PERMUTATION[_right], FLIP_PERMUTATION[_left] = int(_left), int(_right)

# 17-edge connectivity of the 18-joint estimator convention
SKELETON_EDGES: List[Tuple[int, int]] = [
    (Joint.NECK, Joint.R_SHOULDER),
    (Joint.NECK, Joint.L_SHOULDER),
    (Joint.R_SHOULDER, Joint.R_ELBOW),
    (Joint.R_ELBOW, Joint.R_WRIST),
    (Joint.L_SHOULDER, Joint.L_ELBOW),
    (Joint.L_ELBOW, Joint.L_WRIST),
    (Joint.NECK, Joint.R_HIP),
    (Joint.R_HIP, Joint.R_KNEE),
    (Joint.R_KNEE, Joint.R_ANKLE),
    (Joint.NECK, Joint.L_HIP),
    (Joint.L_HIP, Joint.L_KNEE),
    (Joint.L_KNEE, Joint.L_ANKLE),
    (Joint.NECK, Joint.NOSE),
    (Joint.NOSE, Joint.R_EYE),
    (Joint.R_EYE, Joint.R_EAR),
    (Joint.NOSE, Joint.L_EYE),
    (Joint.L_EYE, Joint.L_EAR),
]
SKELETON_EDGES = [(int(a), int(b)) for a, b in SKELETON_EDGES]


class Keypoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: int
    y: int
    visible: bool

    @model_validator(mode="after")
    def check_sentinel(self):
        if not self.visible and (self.x, self.y) != INVISIBLE:
            raise ValueError(f"invisible keypoint must carry {INVISIBLE}, got ({self.x}, {self.y})")
        if self.visible and (self.x < 0 or self.y < 0):
            raise ValueError(f"visible keypoint has negative coordinate ({self.x}, {self.y})")
        return self


class KeypointSet(BaseModel):
    """18 ordered keypoints (x = column, y = row); (-1, -1) marks an invisible joint"""

    model_config = ConfigDict(frozen=True)

    points: List[Keypoint]

    @field_validator("points")
    @classmethod
    def check_count(cls, points):
        if len(points) != NUM_KEYPOINTS:
            raise ValueError(f"expected {NUM_KEYPOINTS} keypoints, got {len(points)}")
        return points

    @classmethod
    def from_coordinates(cls, coords: Sequence[Sequence[int]]) -> "KeypointSet":
        points = []
        for x, y in coords:
            x, y = int(x), int(y)
            visible = (x, y) != INVISIBLE
            points.append(Keypoint(x=x, y=y, visible=visible))
        return cls(points=points)

    @classmethod
    def invisible(cls) -> "KeypointSet":
        return cls.from_coordinates([INVISIBLE] * NUM_KEYPOINTS)

    def to_array(self) -> np.ndarray:
        """(18, 2) int array of (x, y); sentinel rows stay (-1, -1)"""
        return np.array([(p.x, p.y) for p in self.points], dtype=np.int64)

    def coordinate_vector(self) -> np.ndarray:
        # Flattened (x0, y0, x1, y1, ...) for the coordinate embedding
        return self.to_array().reshape(-1).astype(np.float32)

    @property
    def visible_mask(self) -> np.ndarray:
        return np.array([p.visible for p in self.points], dtype=bool)

    @property
    def visible_count(self) -> int:
        return int(self.visible_mask.sum())

    def check_bounds(self, height: int, width: int) -> None:
        for k, p in enumerate(self.points):
            if p.visible and not (0 <= p.x < width and 0 <= p.y < height):
                raise DataError(
                    f"keypoint {Joint(k).name} at ({p.x}, {p.y}) outside {height}x{width} image"
                )


class MorphologyParams(BaseModel):
    """How a skeleton is turned into a foreground mask"""

    edges: List[Tuple[int, int]] = Field(default_factory=lambda: list(SKELETON_EDGES))
    limb_thickness: float = Field(8.0, gt=0)
    keypoint_radius: int = Field(4, ge=0)
    dilation_radius: int = Field(5, ge=0)
    closing_radius: int = Field(5, ge=0)
    closing_iterations: int = Field(1, ge=0)

    @field_validator("edges")
    @classmethod
    def check_edges(cls, edges):
        for a, b in edges:
            if not (0 <= a < NUM_KEYPOINTS and 0 <= b < NUM_KEYPOINTS) or a == b:
                raise ValueError(f"invalid skeleton edge ({a}, {b})")
        return edges


@dataclass(frozen=True)
class PoseTensor:
    channels: np.ndarray  # (18, H, W) uint8 in {0, 1}
    radius: int = 4

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


@dataclass(frozen=True)
class PoseMask:
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    provenance: MorphologyParams
