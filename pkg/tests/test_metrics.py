import math

import numpy as np
import pytest

from mffssr.errors import ShapeError, UsageError
from mffssr.metrics import MetricReport, aggregate, evaluate_dataset, gaussian_window, psnr, ssim, ssim_map


def test_psnr_closed_forms():
    a = np.zeros((3, 8, 8))
    assert psnr(a, np.full_like(a, 0.5)) == pytest.approx(20 * math.log10(2), abs=1e-4)  # 6.0206
    assert psnr(a, np.full_like(a, 0.25)) == pytest.approx(12.0412, abs=1e-4)
    assert psnr(a, a) == math.inf


def test_psnr_symmetric_and_monotone(rng):
    x = rng.random((3, 16, 16))
    noise = rng.standard_normal(x.shape)
    y = x + 0.05 * noise
    assert psnr(x, y) == psnr(y, x)
    values = [psnr(x, x + s * noise) for s in (0.01, 0.02, 0.05, 0.1)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_psnr_border_and_shape():
    a = np.zeros((3, 10, 10))
    b = a.copy()
    b[:, 0, :] = 1.0
    assert psnr(a, b, border=1) == math.inf
    with pytest.raises(ShapeError):
        psnr(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


def test_gaussian_window():
    g = gaussian_window()
    assert g.shape == (11,)
    assert g.sum() == pytest.approx(1.0, abs=1e-15)
    assert g[5] == g.max() and np.allclose(g, g[::-1])


def test_ssim_identity_and_bounds(rng):
    x = rng.random((3, 24, 24))
    assert ssim(x, x) == pytest.approx(1.0, abs=1e-12)
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    v = ssim(x, y)
    assert -1.0 <= v < 1.0
    assert ssim(x, y) == pytest.approx(ssim(y, x), abs=1e-15)


def test_ssim_negative_for_inverted_binary():
    checker = (np.indices((32, 32)).sum(0) % 2).astype(np.float64)[None]
    assert ssim(checker, 1.0 - checker) < 0


def test_ssim_luminance_only_constant_images():
    # constant images: structure/contrast terms are c2/c2 = 1, only luminance remains
    a, b = 0.2, 0.6
    c1 = 0.01 ** 2
    expected = (2 * a * b + c1) / (a * a + b * b + c1)
    m = ssim_map(np.full((15, 15), a), np.full((15, 15), b))
    assert np.allclose(m, expected, atol=1e-12)


def test_ssim_interior_matches_skimage(rng):
    skm = pytest.importorskip("skimage.metrics")
    x = rng.random((40, 40))
    y = np.clip(x + 0.1 * rng.standard_normal(x.shape), 0, 1)
    _, ref = skm.structural_similarity(x, y, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                       use_sample_covariance=False, full=True)
    ours = ssim_map(x, y)
    assert np.allclose(ours[5:-5, 5:-5], ref[5:-5, 5:-5], atol=1e-10)


def test_aggregate_conventions():
    rows = [("a", 30.0, 32.0, 0.9, 0.8), ("b", 20.0, 24.0, 0.7, 0.5)]
    rep = aggregate(rows)
    assert rep.psnr_left == 25.0
    assert rep.psnr_avg == pytest.approx((31.0 + 22.0) / 2)
    assert rep.ssim_left == pytest.approx(0.8)
    assert rep.ssim_avg == pytest.approx((0.85 + 0.6) / 2)
    with pytest.raises(UsageError):
        aggregate([])


def test_report_json_roundtrip_with_infinity():
    rep = aggregate([("x", math.inf, 30.0, 1.0, 0.9)])
    text = rep.to_json()
    assert '"inf"' in text
    back = MetricReport.from_json(text)
    assert back.psnr_left == math.inf and back.per_image[0][2] == 30.0


def test_evaluate_dataset_with_oracle_model(rng):
    hr = rng.random((3, 8, 8))
    data = [("s0", None, None, hr, hr)]
    rep = evaluate_dataset(lambda l, r: (hr, hr * 0.5), data)
    assert rep.psnr_left == math.inf
    assert rep.per_image[0][2] == pytest.approx(psnr(hr, hr * 0.5))
    with pytest.raises(UsageError):
        evaluate_dataset(lambda l, r: (l, r), [])
