import pytest
import torch
from torch import nn

from pg2.core.config import G1Config, PoseEmbedding, RunConfig
from pg2.core.errors import ShapeError
from pg2.nets import build_discriminator, build_g1, build_g2, count_parameters


def inputs(cfg: G1Config, batch=2):
    image = torch.rand(batch, 3, cfg.image_height, cfg.image_width) * 2 - 1
    heatmaps = (torch.rand(batch, 18, cfg.image_height, cfg.image_width) > 0.9).float()
    return image, heatmaps


@pytest.mark.parametrize("n,h,w", [(5, 128, 64), (6, 256, 256)])
def test_published_geometries(n, h, w):
    config = RunConfig(g1={"num_blocks": n, "base_filters": 4, "bottleneck_dim": 8, "image_height": h, "image_width": w},
                       g2={"base_filters": 4}, d={"base_filters": 4})
    g1, g2 = build_g1(config.g1), build_g2(config.resolved_g2())
    image, heatmaps = inputs(config.g1, batch=1)

    coarse = g1(image, heatmaps)
    assert coarse.shape == (1, 3, h, w)
    assert torch.equal(coarse, g1(image, heatmaps))

    diff, refined = g2(image, coarse)
    assert diff.shape == refined.shape == (1, 3, h, w)
    assert config.g2_blocks == n - 2
    assert len(g2.encoder.blocks) == n - 2
    assert not any(isinstance(m, nn.Linear) for m in g2.modules())

    d = build_discriminator(config.d, h, w)
    p = d(image, coarse)
    assert p.shape == (1,)
    assert 0 < p.item() < 1


def test_convs_are_3x3_and_widen_linearly(tiny):
    g1 = build_g1(tiny.g1)
    for m in g1.modules():
        if isinstance(m, nn.Conv2d):
            assert m.kernel_size == (3, 3)
    widths = [block.body[0].in_channels for block in g1.encoder.blocks]
    assert widths == [b * tiny.g1.base_filters for b in range(1, tiny.g1.num_blocks + 1)]


def test_decoder_mirrors_encoder(tiny):
    g1 = build_g1(tiny.g1)
    image, heatmaps = inputs(tiny.g1)
    _, skips = g1.encoder(torch.cat([image, heatmaps], dim=1))
    sizes = [tuple(s.shape[2:]) for s in skips]
    assert sizes == [(32, 16), (16, 8), (8, 4)]


def test_skip_connections_are_live(tiny):
    g1 = build_g1(tiny.g1.model_copy(update={"init_std": 0.2}))
    image, heatmaps = inputs(tiny.g1)
    assert not torch.allclose(g1(image, heatmaps), g1(image, heatmaps, skip_connections=False))


def test_embedding_variants(tiny):
    ce_cfg = tiny.g1.model_copy(update={"embedding_mode": PoseEmbedding.CE})
    hme_cfg = tiny.g1.model_copy(update={"embedding_mode": PoseEmbedding.HME})
    heat = build_g1(tiny.g1)
    ce, hme = build_g1(ce_cfg), build_g1(hme_cfg)
    image, heatmaps = inputs(tiny.g1)

    coords = torch.full((2, 36), -1.0)
    assert ce(image, coords).shape == (2, 3, 32, 16)
    assert hme(image, heatmaps).shape == heat(image, heatmaps).shape
    assert count_parameters(ce) > count_parameters(heat)


def test_ce_parameter_count(tiny):
    cfg = tiny.g1
    ce_cfg = cfg.model_copy(update={"embedding_mode": PoseEmbedding.CE})
    heat, ce = build_g1(cfg), build_g1(ce_cfg)
    # CE drops the 18 heatmap input channels of the stem conv, adds the two FC layers
    # and widens fc_out by pose_feature_dim inputs
    stem_drop = 18 * cfg.base_filters * 9
    fc_embed = 36 * cfg.coord_hidden_dim + cfg.coord_hidden_dim + cfg.coord_hidden_dim * cfg.pose_feature_dim + cfg.pose_feature_dim
    fc_out_extra = cfg.pose_feature_dim * cfg.base_filters * cfg.bottom_height * cfg.bottom_width
    assert count_parameters(ce) - count_parameters(heat) == fc_embed + fc_out_extra - stem_drop


def test_shape_errors(tiny):
    g1 = build_g1(tiny.g1)
    image, heatmaps = inputs(tiny.g1)
    with pytest.raises(ShapeError):
        g1(image[:, :, :16], heatmaps)
    with pytest.raises(ShapeError):
        g1(image, heatmaps[:, :17])
    g2 = build_g2(tiny.resolved_g2())
    with pytest.raises(ShapeError):
        g2(image, image[:1])
    d = build_discriminator(tiny.d, 32, 16)
    with pytest.raises(ShapeError):
        d(image, image[:, :, :16])


def test_zero_g2_is_identity(tiny):
    g2 = build_g2(tiny.resolved_g2())
    for p in g2.parameters():
        nn.init.zeros_(p)
    coarse = torch.rand(2, 3, 32, 16) * 2 - 1
    diff, refined = g2(torch.rand(2, 3, 32, 16), coarse)
    assert torch.count_nonzero(diff) == 0
    assert torch.equal(refined, coarse)


def test_refined_is_clamped_sum(tiny):
    g2 = build_g2(tiny.resolved_g2().model_copy(update={"init_std": 0.3}))
    coarse = torch.rand(2, 3, 32, 16) * 2 - 1
    diff, refined = g2(torch.rand(2, 3, 32, 16), coarse)
    assert torch.equal(refined, torch.clamp(coarse + diff, -1, 1))
    inside = (coarse + diff).abs() < 1
    assert torch.allclose((refined - coarse)[inside], diff[inside], atol=1e-6)


def test_discriminator_properties(tiny):
    d = build_discriminator(tiny.d, 32, 16)
    c, x = torch.rand(4, 3, 32, 16), torch.rand(4, 3, 32, 16)
    p = d(c, x)
    assert torch.all((p > 0) & (p < 1))
    assert torch.equal(d(c, x.clone()), p)
    assert d(x, c).shape == p.shape


def _finite_difference_check(net, forward, param, count=50, h=1e-6, floor=1e-4):
    """Central differences at count random entries of param, relative error <= 1e-3.

    floor bounds the denominator near zero, above the float64 noise of the summed output.
    """
    torch.manual_seed(1)
    net.double()
    flat = param.data.view(-1)
    assert flat.numel() >= count
    positions = torch.randperm(flat.numel())[:count]
    net.zero_grad()
    forward().sum().backward()
    grad = param.grad.view(-1)
    for i in positions:
        original = flat[i].item()
        flat[i] = original + h
        plus = forward().sum().item()
        flat[i] = original - h
        minus = forward().sum().item()
        flat[i] = original
        numeric = (plus - minus) / (2 * h)
        analytic = grad[i].item()
        assert abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor) <= 1e-3, int(i)


def test_gradients_match_finite_differences(tiny):
    torch.manual_seed(0)
    g1 = build_g1(tiny.g1.model_copy(update={"init_std": 0.1}))
    image, heatmaps = inputs(tiny.g1)
    image, heatmaps = image.double(), heatmaps.double()
    _finite_difference_check(g1, lambda: g1(image, heatmaps), g1.fc_in.weight)

    g2 = build_g2(tiny.resolved_g2().model_copy(update={"init_std": 0.1}))
    coarse = torch.rand(2, 3, 32, 16, dtype=torch.float64)
    _finite_difference_check(g2, lambda: g2(image, coarse)[0], g2.encoder.stem[0].weight)

    d = build_discriminator(tiny.d.model_copy(update={"init_std": 0.1}), 32, 16)
    _finite_difference_check(d, lambda: d(image, coarse), d.head.weight)
