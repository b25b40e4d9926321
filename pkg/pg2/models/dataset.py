from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from pydantic import BaseModel, ConfigDict, Field, model_validator

from pg2.models.pose import KeypointSet, PoseMask, PoseTensor


class ImageRecord(BaseModel):
    """One row of a dataset index; image_path is relative to the index directory"""

    model_config = ConfigDict(frozen=True)

    identity: str
    image_path: str
    annotation_row_id: int = Field(ge=0)


class PairRecord(BaseModel):
    """Directional pair: appearance comes from condition, pose from target"""

    model_config = ConfigDict(frozen=True)

    condition: ImageRecord
    target: ImageRecord

    @model_validator(mode="after")
    def check_identity(self):
        if self.condition.identity != self.target.identity:
            raise ValueError("pair crosses identities")
        if self.condition.image_path == self.target.image_path:
            raise ValueError("pair repeats one image")
        return self

    @property
    def identity(self) -> str:
        return self.condition.identity


@dataclass
class PairSample:
    condition_image: torch.Tensor  # (3, H, W) in [-1, 1]
    target_image: torch.Tensor
    target_keypoints: KeypointSet
    identity: str
    pose: PoseTensor
    mask: PoseMask
    flipped: bool = False


class ToySpec(BaseModel):
    """Synthetic stick-figure dataset; generation is a pure function of this spec"""

    num_identities: int = Field(6, ge=1)
    images_per_identity: int = Field(4, ge=1)
    image_height: int = Field(64, ge=16)
    image_width: int = Field(32, ge=16)
    seed: int = Field(0, ge=0)
    # Identities held out for testing, picked by seed
    test_identities: int = Field(2, ge=0)

    @model_validator(mode="after")
    def check_split(self):
        if self.test_identities >= self.num_identities:
            raise ValueError("test split would leave no training identities")
        return self

    def identity_names(self) -> List[str]:
        return [f"id{i:03d}" for i in range(self.num_identities)]


class Appearance(BaseModel):
    shirt: Tuple[int, int, int]
    pants: Tuple[int, int, int]
    skin: Tuple[int, int, int]
    shirt_class: int
    pants_class: int
    background: Optional[Tuple[int, int, int]] = None
    # Build, in pixels at 64-pixel scale
    torso_width: int = Field(5, ge=1)
    limb_width: int = Field(3, ge=1)
    shoulder_span: float = Field(5.0, gt=0)
    leg_length: float = Field(11.0, gt=0)
