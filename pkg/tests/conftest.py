import os

os.environ.setdefault("PG2_PROGRESS", "False")
os.environ.setdefault("PG2_NUM_WORKERS", "0")

from pathlib import Path

import pytest
import torch

from pg2.core.config import RunConfig, TrainStage
from pg2.data.index import read_index
from pg2.data.loader import PairDataset, PairLoader
from pg2.data.pairs import build_pairs
from pg2.data.toy import make_toy_dataset
from pg2.models.dataset import ToySpec

REPO_ROOT = Path(__file__).resolve().parent.parent
TOY_CONFIG = REPO_ROOT / "configs" / "toy.json"


def tiny_config(**train) -> RunConfig:
    """Smallest geometry every network accepts: 32x16, N=3, D with 4 layers"""
    config = RunConfig(
        g1={"num_blocks": 3, "base_filters": 4, "bottleneck_dim": 8, "image_height": 32, "image_width": 16,
            "coord_hidden_dim": 8, "pose_feature_dim": 4},
        g2={"base_filters": 4},
        d={"base_filters": 4, "num_layers": 4},
    )
    return config.with_overrides(train=train) if train else config


@pytest.fixture
def tiny():
    return tiny_config()


@pytest.fixture(scope="session")
def toy_spec() -> ToySpec:
    # 4 training identities x 4 images, 2 held-out identities
    return ToySpec(num_identities=6, images_per_identity=4, test_identities=2, image_height=64, image_width=32)


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory, toy_spec) -> Path:
    root = tmp_path_factory.mktemp("toy")
    make_toy_dataset(toy_spec, root)
    return root


@pytest.fixture(scope="session")
def toy_config(toy_dir) -> RunConfig:
    return RunConfig.load(TOY_CONFIG).with_overrides(data={"root": str(toy_dir)})


def open_split(config: RunConfig, name: str) -> PairDataset:
    index = read_index(Path(config.data.root) / name)
    loader = PairLoader(index, image_size=(config.g1.image_height, config.g1.image_width), morphology=config.morphology)
    return PairDataset(build_pairs(index), loader)


@pytest.fixture(scope="session")
def toy_train(toy_config) -> PairDataset:
    return open_split(toy_config, toy_config.data.train_index)


@pytest.fixture(scope="session")
def toy_test(toy_config) -> PairDataset:
    return open_split(toy_config, toy_config.data.test_index)


@pytest.fixture(scope="session")
def stage1_run(tmp_path_factory, toy_config, toy_train):
    """Stage-I toy run shared by the stage-II, sweep and evaluation tests"""
    from pg2.trainer import train_stage1

    run_dir = tmp_path_factory.mktemp("stage1")
    config = toy_config.with_overrides(train={"max_iterations": 1500, "checkpoint_every": 500})
    torch.manual_seed(0)
    state = train_stage1(toy_train, config, run_dir)
    return state, run_dir


@pytest.fixture(scope="session")
def stage2_config(toy_config) -> RunConfig:
    return toy_config.with_overrides(train={"stage": TrainStage.STAGE2.value, "max_iterations": 500, "checkpoint_every": 500})
