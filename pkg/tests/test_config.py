import json

import pytest
from pydantic import ValidationError

from pg2.core.config import G1Config, PoseEmbedding, Reduction, RunConfig, TrainStage
from pg2.core.errors import ConfigError

from conftest import REPO_ROOT


@pytest.mark.parametrize("name", ["toy", "market", "deepfashion"])
def test_presets_validate(name):
    config = RunConfig.load(REPO_ROOT / "configs" / f"{name}.json")
    assert config.resolved_g2().num_blocks == config.g1.num_blocks - 2
    assert config.loss.reduction == Reduction.SUM


def test_market_preset_matches_published_setting():
    config = RunConfig.load(REPO_ROOT / "configs" / "market.json")
    assert (config.g1.image_height, config.g1.image_width, config.g1.num_blocks) == (128, 64, 5)
    assert config.train.batch_size == 16
    assert config.train.max_iterations == 22000
    assert (config.train.beta1, config.train.beta2, config.train.learning_rate) == (0.5, 0.999, 2e-5)


def test_defaults():
    config = RunConfig()
    assert config.g1.embedding_mode == PoseEmbedding.HEATMAP
    assert config.g1.input_channels == 21
    assert config.loss.lambda_ == 10.0
    assert config.train.stage == TrainStage.STAGE1


def test_geometry_must_divide():
    with pytest.raises(ValidationError):
        G1Config(num_blocks=5, image_height=100, image_width=64)


def test_stage2_needs_three_blocks():
    shallow = RunConfig(g1={"num_blocks": 2, "image_height": 32, "image_width": 16}, d={"num_layers": 1})
    assert shallow.train.stage == TrainStage.STAGE1
    assert shallow.g2.num_blocks is None
    with pytest.raises(ValidationError):
        RunConfig(g1={"num_blocks": 2, "image_height": 32, "image_width": 16}, d={"num_layers": 1}, train={"stage": "2"})
    with pytest.raises(ConfigError):
        shallow.with_overrides(train={"stage": "2"})


def test_g2_depth_follows_g1():
    config = RunConfig()
    deeper = config.with_overrides(g1={"num_blocks": 6, "image_height": 256, "image_width": 256})
    assert config.g2.num_blocks is None and deeper.g2.num_blocks is None
    assert (config.g2_blocks, deeper.g2_blocks) == (3, 4)
    pinned = config.with_overrides(g2={"num_blocks": 2})
    assert pinned.resolved_g2().num_blocks == 2
    assert pinned.geometry_hash() != config.geometry_hash()


def test_invalid_values_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"loss": {"lambda": -1}}))
    with pytest.raises(ConfigError):
        RunConfig.load(path)
    path.write_text(json.dumps({"train": {"beta1": 1.0}}))
    with pytest.raises(ConfigError):
        RunConfig.load(path)
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.json")


def test_hash_ignores_schedule_only():
    base = RunConfig()
    longer = base.with_overrides(train={"max_iterations": 5, "log_every": 3})
    assert longer.config_hash() == base.config_hash()
    other = base.with_overrides(train={"seed": 3})
    assert other.config_hash() != base.config_hash()
    assert other.g1_hash() == base.g1_hash()


def test_json_round_trip(tmp_path):
    config = RunConfig().with_overrides(loss={"lambda": 2.5})
    config.dump(tmp_path / "c.json")
    loaded = RunConfig.load(tmp_path / "c.json")
    assert loaded == config
    assert json.loads(config.to_json())["loss"]["lambda"] == 2.5
