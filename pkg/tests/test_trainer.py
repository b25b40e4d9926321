import math

import pytest
import torch

from pg2.core.config import LossConfig, RunConfig, TrainStage
from pg2.core.errors import CheckpointMismatchError, ConfigError, DataError, NumericalError, ShapeError
from pg2.data.toy import make_toy_dataset
from pg2.losses import g2_total_loss, pose_mask_l1
from pg2.metrics import build_oracle
from pg2.metrics.evaluation import evaluate_model
from pg2.models.dataset import ToySpec
from pg2.trainer import (
    LossLog,
    generate,
    init_state,
    load_checkpoint,
    save_checkpoint,
    train_one_stage,
    train_stage1,
    train_stage2,
    variant_name,
)
from pg2.trainer.stages import one_stage_step, pose_input, run_training, stage1_step
from pg2.trainer.state import make_adam

from conftest import open_split, tiny_config


@pytest.fixture(scope="module")
def tiny_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny")
    make_toy_dataset(ToySpec(num_identities=3, images_per_identity=3, test_identities=1, image_height=32, image_width=16), root)
    return root


@pytest.fixture
def tiny_setup(tiny_dir):
    config = tiny_config(batch_size=2, max_iterations=2, learning_rate=1e-3).with_overrides(data={"root": str(tiny_dir)})
    return config, open_split(config, "train_index.csv")


def stage2_of(config: RunConfig, **train) -> RunConfig:
    return config.with_overrides(train={"stage": TrainStage.STAGE2.value, **train})


def params_equal(a: torch.nn.Module, b: torch.nn.Module) -> bool:
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


def test_adam_first_step_matches_closed_form(tiny):
    cfg = tiny.train.model_copy(update={"learning_rate": 1e-3})
    p = torch.nn.Parameter(torch.tensor([0.3, -1.2, 2.0, 0.0], dtype=torch.float64))
    opt = make_adam([p], cfg)
    assert opt.defaults["betas"] == (0.5, 0.999)
    start = p.detach().clone()
    grad = torch.tensor([0.5, -2.0, 1e-3, 4.0], dtype=torch.float64)
    p.grad = grad.clone()
    opt.step()
    # bias-corrected first step: m_hat = g, v_hat = g^2
    expected = start - cfg.learning_rate * grad / (grad.abs() + cfg.adam_eps)
    assert torch.allclose(p.detach(), expected, atol=1e-10, rtol=0)


def test_same_seed_same_first_iteration(tiny_setup):
    config, data = tiny_setup
    one = config.with_overrides(train={"max_iterations": 1})
    a, b = train_stage1(data, one), train_stage1(data, one)
    assert a.history == b.history
    assert params_equal(a.networks["g1"], b.networks["g1"])

    other = train_stage1(data, one.with_overrides(train={"seed": 7}))
    assert not params_equal(a.networks["g1"], other.networks["g1"])


def test_resume_continues_the_same_trajectory(tiny_setup, tmp_path):
    config, data = tiny_setup
    full = train_stage1(data, config)

    train_stage1(data, config.with_overrides(train={"max_iterations": 1}), tmp_path)
    resumed = load_checkpoint(tmp_path / "checkpoint.pt", expected=config)
    assert resumed.iteration == 1
    resumed = train_stage1(data, config, tmp_path, resume=resumed)

    assert resumed.iteration == 2
    assert resumed.history[-1] == full.history[-1]
    assert params_equal(resumed.networks["g1"], full.networks["g1"])
    iterations = [int(row["iteration"]) for row in LossLog.read(tmp_path / "loss_log.csv")]
    assert iterations == [1, 2]


def test_resume_refuses_other_config(tiny_setup, tmp_path):
    config, data = tiny_setup
    train_stage1(data, config.with_overrides(train={"max_iterations": 1}), tmp_path)
    changed = config.with_overrides(loss={"lambda": 3.0})
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(tmp_path / "checkpoint.pt", expected=changed)
    state = load_checkpoint(tmp_path / "checkpoint.pt")
    with pytest.raises(CheckpointMismatchError):
        train_stage1(data, changed, resume=state)


def test_checkpoint_files(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "none.pt")
    (tmp_path / "junk.pt").write_bytes(b"not a checkpoint")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "junk.pt")


def test_checkpoint_geometry_is_verified(tiny, tmp_path):
    path = save_checkpoint(init_state(tiny, TrainStage.STAGE1), tmp_path / "checkpoint.pt")
    assert load_checkpoint(path).config.geometry_hash() == tiny.geometry_hash()
    payload = torch.load(path, weights_only=True)
    payload["geometry_hash"] = "0" * 64
    torch.save(payload, path)
    with pytest.raises(CheckpointMismatchError, match="geometry"):
        load_checkpoint(path)


def test_loss_log_is_monotone(tmp_path):
    path = tmp_path / "log.csv"
    log = LossLog(path, ["masked_l1"])
    for i in (1, 2, 3):
        assert log.append(i, {"masked_l1": 1.0 / i})
    reopened = LossLog(path, ["masked_l1"])
    assert not reopened.append(2, {"masked_l1": 9.0})
    assert reopened.append(4, {"masked_l1": 0.25})
    rows = LossLog.read(path)
    assert [int(r["iteration"]) for r in rows] == [1, 2, 3, 4]
    assert float(rows[1]["masked_l1"]) == pytest.approx(0.5)


def test_wrong_stage_is_refused(tiny_setup):
    config, data = tiny_setup
    with pytest.raises(ConfigError):
        train_stage1(data, stage2_of(config))
    with pytest.raises(ConfigError):
        train_stage2(data, None, stage2_of(config))


def test_stage2_refuses_mismatched_g1(tiny_setup):
    config, data = tiny_setup
    stage1 = init_state(config, TrainStage.STAGE1)
    wider = stage2_of(config).with_overrides(g1={"base_filters": 8})
    with pytest.raises(CheckpointMismatchError):
        train_stage2(data, stage1, wider)


def flat_grad(net: torch.nn.Module) -> torch.Tensor:
    return torch.cat([p.grad.reshape(-1) for p in net.parameters() if p.grad is not None])


def test_one_stage_smoke(tiny_setup):
    config, data = tiny_setup
    config = config.with_overrides(train={"stage": TrainStage.ONE_STAGE.value, "max_iterations": 3})
    state = train_one_stage(data, config)
    again = train_one_stage(data, config)
    assert again.history == state.history
    assert params_equal(again.networks["g1"], state.networks["g1"])
    assert params_equal(again.networks["d"], state.networks["d"])
    assert set(state.networks) == {"g1", "d"}
    assert state.iteration == 3
    assert set(state.history[-1]) == {"iteration", "d_loss", "g_adv", "masked_l1", "d_real", "d_fake"}
    assert variant_name(config, TrainStage.ONE_STAGE) == "G1+D"


def test_one_stage_with_huge_lambda_follows_stage1(tiny_setup):
    config, data = tiny_setup
    adversarial = init_state(
        config.with_overrides(train={"stage": TrainStage.ONE_STAGE.value}, loss={"lambda": 1e6}), TrainStage.ONE_STAGE
    )
    plain = init_state(config, TrainStage.STAGE1)
    assert params_equal(adversarial.networks["g1"], plain.networks["g1"])

    batch = next(iter(torch.utils.data.DataLoader(data, batch_size=2)))
    one_stage_step(adversarial, batch)
    stage1_step(plain, batch)
    mixed, pure = flat_grad(adversarial.networks["g1"]), flat_grad(plain.networks["g1"])
    assert mixed.shape == pure.shape
    assert torch.nn.functional.cosine_similarity(mixed, pure, dim=0).item() > 0.99


def test_non_finite_loss_stops_the_run(tiny_setup, tmp_path):
    config, data = tiny_setup
    state = init_state(config, TrainStage.STAGE1)
    with torch.no_grad():
        state.networks["g1"].fc_in.weight.fill_(float("nan"))
    with pytest.raises(NumericalError) as info:
        run_training(state, data, tmp_path)
    assert info.value.iteration == 1
    assert info.value.exit_code == 3
    assert (tmp_path / "failure.pt").exists()
    assert "iteration=1" in (tmp_path / "failure.txt").read_text()


def test_generate(tiny_setup):
    config, data = tiny_setup
    g1 = init_state(config, TrainStage.STAGE1)
    g2 = init_state(stage2_of(config), TrainStage.STAGE2, g1_parent=g1)
    index = data.loader.index
    condition = data[0]["condition"]
    poses = [index.keypoints(r) for r in index.records[:5]]

    coarse, refined = generate(g1, g2, condition, poses)
    assert coarse.shape == refined.shape == (5, 3, 32, 16)
    again, _ = generate(g1, g2, condition, poses)
    assert torch.equal(coarse, again)

    single, none = generate(g1, None, condition, poses[0])
    assert single.shape == (1, 3, 32, 16) and none is None
    assert torch.allclose(single[0], coarse[0], atol=1e-6)

    with pytest.raises(ShapeError):
        generate(g1, None, condition[:, :16], poses)
    g2.g1_hash = "0" * 64
    with pytest.raises(CheckpointMismatchError):
        generate(g1, g2, condition, poses)


def test_large_lambda_follows_the_l1_gradient(tiny_setup):
    config, data = tiny_setup
    g1 = init_state(config, TrainStage.STAGE1)
    state = init_state(stage2_of(config), TrainStage.STAGE2, g1_parent=g1)
    g1_net, g2, d = (state.networks[k] for k in ("g1", "g2", "d"))
    batch = next(iter(torch.utils.data.DataLoader(data, batch_size=2)))
    params = [p for p in g2.parameters()]

    def grad_of(loss_fn):
        with torch.no_grad():
            coarse = g1_net(batch["condition"], pose_input(batch, config.g1.embedding_mode))
        _, refined = g2(batch["condition"], coarse)
        grads = torch.autograd.grad(loss_fn(refined), params)
        return torch.cat([g.reshape(-1) for g in grads])

    mixed = grad_of(lambda x: g2_total_loss(d(batch["condition"], x), x, batch["target"], batch["mask"], LossConfig(lambda_=1e6)))
    plain = grad_of(lambda x: pose_mask_l1(x, batch["target"], batch["mask"]))
    assert torch.nn.functional.cosine_similarity(mixed, plain, dim=0).item() > 0.99


@pytest.mark.slow
def test_stage1_learns(stage1_run):
    state, run_dir = stage1_run
    rows = LossLog.read(run_dir / "loss_log.csv")
    assert int(rows[0]["iteration"]) == 1
    assert float(rows[-1]["masked_l1"]) <= 0.5 * float(rows[0]["masked_l1"])
    assert (run_dir / "checkpoint.pt").exists()
    assert (run_dir / "manifest.json").exists()


@pytest.mark.slow
def test_stage2_trains_on_frozen_g1(stage1_run, stage2_config, toy_train, tmp_path):
    g1_state, _ = stage1_run
    frozen = {k: v.clone() for k, v in g1_state.networks["g1"].state_dict().items()}
    state = train_stage2(toy_train, g1_state, stage2_config, tmp_path)

    assert state.iteration == 500
    assert all(math.isfinite(v) for h in state.history for k, v in h.items())
    tail = state.history[-100:]
    assert sum(h["d_real"] for h in tail) > sum(h["d_fake"] for h in tail)

    # iteration 1, then every 10th up to 500
    assert len(state.logged_samples) == 51
    for sample in state.logged_samples:
        assert torch.equal(sample["refined"], torch.clamp(sample["coarse"] + sample["diff"], -1, 1))
    trained_g1 = state.networks["g1"].state_dict()
    assert all(torch.equal(trained_g1[k].cpu(), frozen[k].cpu()) for k in frozen)
    assert params_equal(state.networks["g1"], g1_state.networks["g1"])
    assert state.g1_hash == g1_state.g1_hash


@pytest.mark.slow
def test_lambda_sweep_orders_reconstruction(stage1_run, stage2_config, toy_train, tmp_path):
    g1_state, _ = stage1_run
    final = {}
    for lam in (0.0, 1.0, 100.0):
        run_dir = tmp_path / f"lambda_{lam:g}"
        config = stage2_config.with_overrides(loss={"lambda": lam})
        train_stage2(toy_train, g1_state, config, run_dir)
        final[lam] = float(LossLog.read(run_dir / "loss_log.csv")[-1]["masked_l1"])
    assert final[0.0] >= final[1.0] >= final[100.0]


@pytest.mark.slow
def test_training_improves_mask_ssim(stage1_run, toy_config, toy_test):
    trained, _ = stage1_run
    untrained = init_state(toy_config, TrainStage.STAGE1)
    oracle = build_oracle("palette")
    after = evaluate_model(trained, None, toy_test, oracle, "G1-poseMaskLoss")
    before = evaluate_model(untrained, None, toy_test, oracle, "untrained")
    assert after.pairs == before.pairs == len(toy_test)
    assert after.mask_ssim - before.mask_ssim >= 0.05
    assert after.inception_score >= 1.0


def test_variant_names_and_plain_l1(tiny_setup):
    config, data = tiny_setup
    assert variant_name(config, TrainStage.STAGE1) == "G1-poseMaskLoss"
    assert variant_name(config.with_overrides(g1={"embedding_mode": "CE"}), TrainStage.STAGE1) == "G1-CE-L1"
    assert variant_name(config.with_overrides(g1={"embedding_mode": "HME"}), TrainStage.STAGE1) == "G1-HME-L1"

    plain = config.with_overrides(train={"reconstruction": "l1", "max_iterations": 1})
    assert variant_name(plain, TrainStage.STAGE1) == "G1-L1"
    state = train_stage1(data, plain)
    assert state.iteration == 1
    assert math.isfinite(state.history[0]["masked_l1"])
