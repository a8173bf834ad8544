import pytest

from mffssr import ModelConfig
from mffssr.cost import conv_macs, conv_params, cost_report


def test_single_conv_counts():
    assert conv_params(3, 48, 3) == 1344
    assert conv_params(48, 48, 3, groups=48) == 48 * 9 + 48
    assert conv_macs(48, 48, 3, 128, 128) == 339_738_624


def test_default_totals():
    x4, x2 = cost_report(ModelConfig.for_scale(4)), cost_report(ModelConfig.for_scale(2))
    assert x4.total_params == 770_352
    assert x2.total_params == 864_268
    assert x4.macs_pair == 2 * x4.macs_single_view
    assert x4.input_hw == (128, 128)
    assert sum(x4.breakdown.values()) == x4.total_params


def test_macs_linear_in_height():
    cfg = ModelConfig.for_scale(4)
    a, b = cost_report(cfg, (32, 64)), cost_report(cfg, (64, 64))
    ca = cfg.num_blocks * cfg.cross_channels ** 2  # pooled channel attention does not scale
    assert b.macs_single_view - ca == 2 * (a.macs_single_view - ca)


def test_macs_conv_part_scales_with_area():
    # without cross-view attention every term is proportional to H * W
    cfg = ModelConfig.for_scale(4, cross_module="none")
    a, b = cost_report(cfg, (32, 32)), cost_report(cfg, (64, 64))
    ca = cfg.num_blocks * cfg.cross_channels ** 2  # pooled channel attention does not scale
    assert b.macs_single_view - ca == 4 * (a.macs_single_view - ca)


def test_attention_term_quadratic_in_width():
    cfg = ModelConfig.for_scale(4)
    none = ModelConfig(**{**cfg.to_dict(), "cross_module": "none"})
    for w in (32, 64):
        diff = cost_report(cfg, (16, w)).macs_single_view - cost_report(none, (16, w)).macs_single_view
        c2 = cfg.cross_channels
        stacks = 3 * (conv_macs(c2, c2, 1, 16, w) + conv_macs(c2, c2, 3, 16, w, c2)) + conv_macs(c2, c2, 1, 16, w)
        assert diff == cfg.num_blocks * (stacks + 2 * 16 * w * w * c2)


def test_fused_drops_pointwise_branch():
    cfg = ModelConfig.for_scale(4)
    full, fused = cost_report(cfg), cost_report(cfg, fused=True)
    per_block = conv_params(cfg.intra_channels, 2 * cfg.cross_channels, 1)
    assert full.total_params - fused.total_params == cfg.num_blocks * per_block


def test_report_text_mentions_flops():
    text = cost_report(ModelConfig.for_scale(4)).to_text(ModelConfig.for_scale(4))
    assert "770352" in text and "FLOPs (2*MACs)" in text
    assert "pair" in text


@pytest.mark.parametrize("theta", [0.25, 0.5, 0.75, 0.875])
def test_theta_changes_split(theta):
    cfg = ModelConfig.for_scale(4, theta=theta)
    assert cfg.intra_channels + cfg.cross_channels == cfg.expanded_channels
