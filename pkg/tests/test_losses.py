import math

import pytest
import torch

from pg2.core.config import LossConfig, Reduction
from pg2.core.errors import NumericalError, RangeError, ShapeError
from pg2.losses import bce, d_loss, g2_total_loss, pose_mask_l1


def test_single_pixel_masked_l1():
    gen, target, mask = torch.full((1, 1, 1), 0.5), torch.zeros(1, 1, 1), torch.ones(1, 1)
    assert pose_mask_l1(gen, target, mask).item() == pytest.approx(1.0, abs=1e-6)


def test_masked_l1_identities():
    torch.manual_seed(0)
    a, b = torch.rand(2, 3, 8, 8), torch.rand(2, 3, 8, 8)
    mask = (torch.rand(2, 8, 8) > 0.5).float()
    assert pose_mask_l1(a, a, mask).item() == 0.0
    assert pose_mask_l1(a, b, mask).item() == pytest.approx(pose_mask_l1(b, a, mask).item())
    plain = (a - b).abs().sum().item() / 2
    assert pose_mask_l1(a, b, torch.zeros(2, 8, 8)).item() == pytest.approx(plain, rel=1e-6)
    assert pose_mask_l1(a, b, torch.ones(2, 8, 8)).item() == pytest.approx(2 * plain, rel=1e-6)
    mean = pose_mask_l1(a, b, torch.zeros(2, 8, 8), Reduction.MEAN).item()
    assert mean == pytest.approx((a - b).abs().mean().item(), rel=1e-6)


def test_masked_pixels_count_double():
    gen, target = torch.zeros(1, 1, 1, 2), torch.zeros(1, 1, 1, 2)
    mask = torch.tensor([[[1.0, 0.0]]])
    base = pose_mask_l1(gen, target, mask).item()
    masked = gen.clone()
    masked[..., 0] = 0.25
    unmasked = gen.clone()
    unmasked[..., 1] = 0.25
    assert pose_mask_l1(masked, target, mask).item() - base == pytest.approx(2 * (pose_mask_l1(unmasked, target, mask).item() - base))


def test_masked_l1_shape_errors():
    with pytest.raises(ShapeError):
        pose_mask_l1(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 5), torch.zeros(1, 4, 4))
    with pytest.raises(ShapeError):
        pose_mask_l1(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 4), torch.zeros(1, 5, 4))


def test_masked_l1_gradient():
    torch.manual_seed(3)
    gen = torch.rand(1, 3, 6, 6, dtype=torch.float64, requires_grad=True)
    target = torch.rand(1, 3, 6, 6, dtype=torch.float64)
    mask = (torch.rand(1, 6, 6) > 0.5).double()
    pose_mask_l1(gen, target, mask).backward()
    h = 1e-6
    flat = gen.detach().clone().view(-1)
    for i in torch.randperm(flat.numel())[:50]:
        if abs(flat[i] - target.view(-1)[i]) < 1e-4:
            continue
        plus, minus = flat.clone(), flat.clone()
        plus[i] += h
        minus[i] -= h
        numeric = (pose_mask_l1(plus.view_as(gen), target, mask) - pose_mask_l1(minus.view_as(gen), target, mask)).item() / (2 * h)
        analytic = gen.grad.view(-1)[i].item()
        assert abs(numeric - analytic) <= 1e-3 * abs(numeric)


def test_bce_values():
    assert bce(0.5, 1).item() == pytest.approx(math.log(2), abs=1e-6)
    assert bce(0.9, 0).item() == pytest.approx(-math.log(0.1), abs=1e-6)
    assert bce(1.0, 1).item() < 1e-6
    assert d_loss(0.5, 0.5).item() == pytest.approx(2 * math.log(2), abs=1e-6)
    assert d_loss(1 - 1e-7, 1e-7).item() < 1e-5
    assert d_loss(1e-3, 1 - 1e-3).item() > 10


def test_bce_rejects_bad_probabilities():
    with pytest.raises(RangeError):
        bce(1.5, 1)
    with pytest.raises(NumericalError):
        bce(float("nan"), 1)


def test_g2_total_loss():
    gen, target, mask = torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 4), torch.zeros(1, 4, 4)
    assert g2_total_loss(0.5, gen, target, mask, LossConfig(lambda_=7)).item() == pytest.approx(math.log(2), abs=1e-6)
    assert g2_total_loss(0.3, torch.ones(1, 3, 4, 4), target, mask, LossConfig(lambda_=0)).item() == pytest.approx(bce(0.3, 1).item())

    # lambda 10 with an L1 term of 0.2
    gen = torch.zeros(1, 1, 1, 1)
    gen[..., 0, 0] = 0.2
    total = g2_total_loss(0.5, gen, torch.zeros(1, 1, 1, 1), torch.zeros(1, 1, 1), LossConfig(lambda_=10))
    assert total.item() == pytest.approx(math.log(2) + 2.0, abs=1e-6)
