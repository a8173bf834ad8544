import numpy as np
import pytest
import torch

import oracles
from conftest import randomize_, tiny_cfg
from mffssr.errors import ShapeError, UsageError
from mffssr.layers import CVIM, IRF, MFEF, SCAM, MFFBlock

pytestmark = pytest.mark.usefixtures("double")


def _proj_np(p, prefix, x):
    y = oracles.conv2d(x, p[f"{prefix}.0.weight"], p[f"{prefix}.0.bias"])
    c = y.shape[0]
    return oracles.conv2d(y, p[f"{prefix}.1.weight"], p[f"{prefix}.1.bias"], padding=1, groups=c)


def cvim_np(p, xl, xr):
    """Straight-line CVIM on (C, H, W) arrays; parameter dict keyed like the module."""
    l2r, _ = oracles.row_attention(_proj_np(p, "q_l", xl), _proj_np(p, "k_r", xr), _proj_np(p, "v_r", xr))
    r2l, _ = oracles.row_attention(_proj_np(p, "q_r", xr), _proj_np(p, "k_l", xl), _proj_np(p, "v_l", xl))
    l2r = oracles.conv2d(l2r, p["proj_l.weight"], p["proj_l.bias"])
    r2l = oracles.conv2d(r2l, p["proj_r.weight"], p["proj_r.bias"])
    return xl + p["gamma_l"][0] * l2r, xr + p["gamma_r"][0] * r2l


def kappa_np(p, ul, ur, c1):
    """Channel split, RepConv -> SimpleGate -> t * CA(t), plus the CVIM branch, for both views."""
    outs = []
    x2l, x2r = ul[c1:], ur[c1:]
    y2l, y2r = cvim_np({k[len("cross."):]: v for k, v in p.items() if k.startswith("cross.")}, x2l, x2r)
    for u, y2 in ((ul, y2l), (ur, y2r)):
        x1 = u[:c1]
        r = (oracles.conv2d(x1, p["repconv.conv3.weight"], p["repconv.conv3.bias"], padding=1)
             + oracles.conv2d(x1, p["repconv.conv1.weight"], p["repconv.conv1.bias"]))
        t = oracles.simple_gate(r)
        ca = oracles.channel_attention(t, p["ca.pconv.weight"], p["ca.pconv.bias"])
        outs.append(t * ca + y2)
    return outs


def test_kappa_bookkeeping():
    cfg = tiny_cfg()
    assert (cfg.expanded_channels, cfg.intra_channels, cfg.cross_channels) == (8, 6, 2)
    m = MFEF(cfg)
    k_l, k_r = m.kappa(torch.randn(1, 8, 4, 4), torch.randn(1, 8, 4, 4))
    assert k_l.shape == k_r.shape == (1, 2, 4, 4)


def test_kappa_matches_scalar_oracle():
    cfg = tiny_cfg()
    m = randomize_(MFEF(cfg))
    ul, ur = torch.randn(1, 8, 4, 4), torch.randn(1, 8, 4, 4)
    k_l, k_r = m.kappa(ul, ur)
    ref_l, ref_r = kappa_np(oracles.params_np(m), ul[0].numpy(), ur[0].numpy(), 6)
    np.testing.assert_allclose(k_l[0].detach().numpy(), ref_l, atol=1e-6)
    np.testing.assert_allclose(k_r[0].detach().numpy(), ref_r, atol=1e-6)


def test_kappa_passthrough_without_cross_module():
    cfg = tiny_cfg(cross_module="none")
    m = MFEF(cfg)
    with torch.no_grad():
        for p in m.repconv.parameters():
            p.zero_()
    u = torch.randn(1, 8, 4, 4)
    k, _ = m.kappa(u)
    assert torch.equal(k, u[:, 6:])


def test_kappa_requires_partner_for_cvim():
    m = MFEF(tiny_cfg())
    with pytest.raises(UsageError):
        m.kappa(torch.randn(1, 8, 4, 4))


def test_kappa_gate_variant_flag():
    cfg_lit, cfg_gate = tiny_cfg(), tiny_cfg(ca_literal=False)
    a, b = randomize_(MFEF(cfg_lit)), MFEF(cfg_gate)
    b.load_state_dict(a.state_dict())
    u = torch.randn(1, 8, 4, 4), torch.randn(1, 8, 4, 4)
    assert not torch.allclose(a.kappa(*u)[0], b.kappa(*u)[0])


def test_mfef_zero_weights_is_identity():
    m = MFEF(tiny_cfg())
    with torch.no_grad():
        for name, p in m.named_parameters():
            p.fill_(1.0 if name == "norm.weight" else 0.0)
    x_l, x_r = torch.randn(1, 8, 12, 12), torch.randn(1, 8, 12, 12)
    y_l, y_r = m(x_l, x_r)
    assert torch.equal(y_l, x_l) and torch.equal(y_r, x_r)


def test_mfef_shape_and_lka_toggle():
    full = randomize_(MFEF(tiny_cfg()))
    no_lka = MFEF(tiny_cfg(use_lka=False))
    no_lka.load_state_dict(full.state_dict(), strict=False)
    x = torch.randn(1, 8, 12, 12), torch.randn(1, 8, 12, 12)
    y_full, y_nb = full(*x), no_lka(*x)
    assert y_full[0].shape == (1, 8, 12, 12)
    assert not torch.allclose(y_full[0], y_nb[0])


def test_irf_residual_and_shape():
    irf = IRF(48, 4)
    with torch.no_grad():
        irf.pconv4.weight.zero_()
        irf.pconv4.bias.zero_()
    x = torch.randn(1, 48, 8, 8)
    assert torch.equal(irf(x), x)
    assert IRF(48)(x).shape == (1, 48, 8, 8)


def test_irf_matches_scalar_oracle():
    irf = randomize_(IRF(4, 4))
    x = torch.randn(1, 4, 2, 2)
    p = oracles.params_np(irf)
    xa = x[0].numpy()
    h = oracles.layer_norm(xa, p["norm.weight"], p["norm.bias"])
    h = oracles.conv2d(h, p["pconv3.weight"], p["pconv3.bias"])
    h = oracles.conv2d(h, p["dw3.weight"], p["dw3.bias"], padding=1, groups=h.shape[0])
    k = h.shape[0] // 2
    h = h[:k] * oracles.gelu(h[k:])
    ref = oracles.conv2d(h, p["pconv4.weight"], p["pconv4.bias"]) + xa
    np.testing.assert_allclose(irf(x)[0].detach().numpy(), ref, atol=1e-6)


def test_cvim_zero_gamma_passthrough():
    m = CVIM(4)
    assert torch.count_nonzero(m.gamma_l) == 0 and torch.count_nonzero(m.gamma_r) == 0
    xl, xr = torch.randn(2, 4, 5, 7), torch.randn(2, 4, 5, 7)
    yl, yr = m(xl, xr)
    assert torch.equal(yl, xl) and torch.equal(yr, xr)


def test_cvim_matches_oracle():
    m = randomize_(CVIM(3))
    xl, xr = torch.randn(1, 3, 3, 5), torch.randn(1, 3, 3, 5)
    yl, yr = m(xl, xr)
    rl, rr = cvim_np(oracles.params_np(m), xl[0].numpy(), xr[0].numpy())
    np.testing.assert_allclose(yl[0].detach().numpy(), rl, atol=1e-10)
    np.testing.assert_allclose(yr[0].detach().numpy(), rr, atol=1e-10)


def test_cvim_width_one_is_partner_value():
    m = randomize_(CVIM(3))
    xl, xr = torch.randn(1, 3, 6, 1), torch.randn(1, 3, 6, 1)
    l2r, r2l, w_l, w_r = m.cross_terms(xl, xr, return_weights=True)
    assert torch.equal(w_l, torch.ones_like(w_l)) and torch.equal(w_r, torch.ones_like(w_r))
    assert torch.allclose(l2r, m.proj_l(m.v_r(xr)), atol=1e-12)
    assert torch.allclose(r2l, m.proj_r(m.v_l(xl)), atol=1e-12)


@pytest.mark.parametrize("cls", [CVIM, SCAM])
def test_cross_attention_rows_are_distributions(cls):
    m = randomize_(cls(4), scale=1.0)
    xl, xr = torch.randn(2, 4, 3, 9), torch.randn(2, 4, 3, 9)
    *_, w_a, w_b = m.cross_terms(xl, xr, return_weights=True)
    for w in (w_a, w_b):
        assert (w >= 0).all()
        assert (w.sum(-1) - 1).abs().max().item() < 1e-6


@pytest.mark.parametrize("cls", [CVIM, SCAM])
def test_cross_modules_reject_shape_mismatch(cls):
    with pytest.raises(ShapeError):
        cls(4)(torch.randn(1, 4, 3, 5), torch.randn(1, 4, 3, 6))


def test_scam_zero_gamma_and_lighter_than_cvim():
    m = SCAM(12)
    xl, xr = torch.randn(1, 12, 4, 6), torch.randn(1, 12, 4, 6)
    yl, yr = m(xl, xr)
    assert torch.equal(yl, xl) and torch.equal(yr, xr)
    n_scam = sum(p.numel() for p in SCAM(12).parameters())
    n_cvim = sum(p.numel() for p in CVIM(12).parameters())
    assert n_scam < n_cvim


def test_block_shape_identity_and_composition():
    cfg = tiny_cfg()
    blk = randomize_(MFFBlock(cfg))
    x = torch.randn(1, 8, 6, 10), torch.randn(1, 8, 6, 10)
    assert blk(*x)[0].shape == (1, 8, 6, 10)

    twice = blk(*blk(*x))
    stack = torch.nn.ModuleList([MFFBlock(cfg), MFFBlock(cfg)])
    for b in stack:
        b.load_state_dict(blk.state_dict())
    y = x
    for b in stack:
        y = b(*y)
    assert torch.equal(y[0], twice[0]) and torch.equal(y[1], twice[1])

    with torch.no_grad():
        for lin in (blk.mfef.pconv2, blk.ffn.pconv4):
            lin.weight.zero_()
            lin.bias.zero_()
    y = blk(*x)
    assert torch.equal(y[0], x[0]) and torch.equal(y[1], x[1])
