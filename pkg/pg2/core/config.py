import enum
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pg2.core.errors import ConfigError
from pg2.models.pose import MorphologyParams

logger = logging.getLogger(__name__)


class PoseEmbedding(enum.Enum):
    HEATMAP = "heatmap-concat"
    CE = "CE"
    HME = "HME"


class Reduction(enum.Enum):
    SUM = "sum"
    MEAN = "mean"


class TrainStage(enum.Enum):
    STAGE1 = "1"
    STAGE2 = "2"
    ONE_STAGE = "one-stage"


class ReconstructionLoss(enum.Enum):
    POSE_MASK = "pose_mask"
    L1 = "l1"


class G1Config(BaseModel):
    num_blocks: int = Field(5, ge=2)
    base_filters: int = Field(32, ge=1)
    bottleneck_dim: int = Field(64, ge=1)
    image_height: int = Field(128, ge=1)
    image_width: int = Field(64, ge=1)
    embedding_mode: PoseEmbedding = PoseEmbedding.HEATMAP
    # CE: two fully-connected layers over the 36 coordinates
    coord_hidden_dim: int = Field(128, ge=1)
    # CE / HME: width of the pose vector joined at the bottleneck
    pose_feature_dim: int = Field(64, ge=1)
    init_std: float = Field(0.02, gt=0)

    @property
    def input_channels(self) -> int:
        return 3 + 18 if self.embedding_mode == PoseEmbedding.HEATMAP else 3

    @property
    def bottom_height(self) -> int:
        return self.image_height // 2 ** (self.num_blocks - 1)

    @property
    def bottom_width(self) -> int:
        return self.image_width // 2 ** (self.num_blocks - 1)

    @model_validator(mode="after")
    def check_geometry(self):
        factor = 2 ** (self.num_blocks - 1)
        if self.image_height % factor or self.image_width % factor:
            raise ValueError(
                f"image {self.image_height}x{self.image_width} not divisible by 2^(N-1)={factor}"
            )
        return self


class G2Config(BaseModel):
    # None means N - 2 of the stage-I generator
    num_blocks: Optional[int] = Field(None, ge=1)
    base_filters: int = Field(32, ge=1)
    init_std: float = Field(0.02, gt=0)

    @property
    def input_channels(self) -> int:
        return 3 + 3


class DConfig(BaseModel):
    base_filters: int = Field(64, ge=1)
    num_layers: int = Field(4, ge=1)
    leaky_slope: float = Field(0.2, ge=0)
    init_std: float = Field(0.02, gt=0)

    @property
    def input_channels(self) -> int:
        return 3 + 3


class LossConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lambda_: float = Field(10.0, ge=0, alias="lambda")
    reduction: Reduction = Reduction.SUM
    prob_eps: float = Field(1e-7, gt=0, lt=0.5)


class TrainConfig(BaseModel):
    stage: TrainStage = TrainStage.STAGE1
    learning_rate: float = Field(2e-5, gt=0)
    beta1: float = Field(0.5, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(16, gt=0)
    max_iterations: int = Field(22000, gt=0)
    seed: int = Field(0, ge=0)
    augment_flip: bool = True
    checkpoint_every: int = Field(1000, gt=0)
    log_every: int = Field(10, gt=0)
    reconstruction: ReconstructionLoss = ReconstructionLoss.POSE_MASK
    d_steps_per_g_step: int = Field(1, ge=1)
    finetune_g1: bool = False


class DataConfig(BaseModel):
    root: str = "data/toy"
    train_index: str = "train_index.csv"
    test_index: str = "test_index.csv"
    pairs_cap_per_identity: Optional[int] = Field(None, ge=1)
    test_pairs: int = Field(12800, ge=1)
    test_seed: int = 0


# Schedule fields that may change between a run and its resume
_RESUME_FREE_FIELDS = {"max_iterations", "checkpoint_every", "log_every"}


class RunConfig(BaseModel):
    """The single source of hyperparameters for a run"""

    g1: G1Config = Field(default_factory=G1Config)
    g2: G2Config = Field(default_factory=G2Config)
    d: DConfig = Field(default_factory=DConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    morphology: MorphologyParams = Field(default_factory=MorphologyParams)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    @model_validator(mode="after")
    def check_stages(self):
        if self.train.stage == TrainStage.STAGE2 and self.g2_blocks < 1:
            raise ValueError("stage-II generator needs N - 2 >= 1 blocks; use N >= 3")
        factor = 2 ** self.d.num_layers
        if self.g1.image_height % factor or self.g1.image_width % factor:
            raise ValueError(
                f"discriminator with {self.d.num_layers} stride-2 layers needs image dims divisible by {factor}"
            )
        return self

    @property
    def g2_blocks(self) -> int:
        return self.g2.num_blocks if self.g2.num_blocks is not None else self.g1.num_blocks - 2

    def resolved_g2(self) -> G2Config:
        """G2 section with its depth filled in from the stage-I generator"""
        return self.g2.model_copy(update={"num_blocks": self.g2_blocks})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            return cls.model_validate_json(path.read_text())
        except ValidationError as e:
            raise ConfigError(f"invalid config {path}: {e.errors()[0]['msg']}")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json", by_alias=True), indent=2, sort_keys=True)

    def dump(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())

    def with_overrides(self, **sections: Dict[str, Any]) -> "RunConfig":
        """Copy with per-section field overrides, re-validated"""
        data = self.model_dump(mode="json", by_alias=True)
        for section, fields in sections.items():
            data[section].update({k: v for k, v in fields.items() if v is not None})
        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid override: {e.errors()[0]['msg']}")

    def config_hash(self) -> str:
        data = self.model_dump(mode="json", by_alias=True)
        for name in _RESUME_FREE_FIELDS:
            data["train"].pop(name, None)
        # Data location does not change the trajectory of a resumed run
        data.pop("data", None)
        return _digest(data)

    def geometry(self) -> Dict[str, Any]:
        return {
            "image_height": self.g1.image_height,
            "image_width": self.g1.image_width,
            "g1": self.g1.model_dump(mode="json"),
            "g2_num_blocks": self.g2_blocks,
        }

    def geometry_hash(self) -> str:
        return _digest(self.geometry())

    def g1_hash(self) -> str:
        # What a stage-I checkpoint must agree on to seed stage II
        return section_hash(self.g1)


def section_hash(section: BaseModel) -> str:
    return _digest(section.model_dump(mode="json", by_alias=True))


def _digest(data: Any) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
