"""PSNR / SSIM on unit-range RGB, and dataset evaluation under both stereo conventions.

Images are (C, H, W) arrays (numpy or torch). No luminance conversion and,
by default, no border cropping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeError, UsageError

PSNR_INF = math.inf


def _as_array(x) -> np.ndarray:
    if hasattr(x, "detach"):
        x = x.detach().cpu().numpy()
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 4 and a.shape[0] == 1:
        a = a[0]
    if a.ndim == 2:
        a = a[None]
    return a


def _pair(x, y, border: int = 0) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(x), _as_array(y)
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    if border:
        a = a[:, border:-border, border:-border]
        b = b[:, border:-border, border:-border]
    return a, b


def psnr(x, y, peak: float = 1.0, border: int = 0) -> float:
    """``10 log10(peak^2 / MSE)``; returns ``inf`` for identical images."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    a, b = _pair(x, y, border)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_INF
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    # scipy's "reflect" is symmetric padding (d c b a | a b c d)
    out = correlate1d(img, win, axis=0, mode="reflect")
    return correlate1d(out, win, axis=1, mode="reflect")


def ssim_map(x, y, peak: float = 1.0, size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Per-pixel SSIM for single-channel (H, W) images, same size as the input."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    win = gaussian_window(size, sigma)
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    mu_a, mu_b = _filter(a, win), _filter(b, win)
    s_aa = _filter(a * a, win) - mu_a ** 2
    s_bb = _filter(b * b, win) - mu_b ** 2
    s_ab = _filter(a * b, win) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * s_ab + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (s_aa + s_bb + c2)
    return num / den


def ssim(x, y, peak: float = 1.0, border: int = 0) -> float:
    """Gaussian-window SSIM (11x11, sigma 1.5), computed per channel and averaged."""
    a, b = _pair(x, y, border)
    return float(np.mean([ssim_map(a[c], b[c], peak).mean() for c in range(a.shape[0])]))


@dataclass
class MetricReport:
    psnr_left: float
    ssim_left: float
    psnr_avg: float
    ssim_avg: float
    per_image: list[tuple[str, float, float, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def enc(v: float):
            return "inf" if math.isinf(v) else v

        return {
            "psnr_left": enc(self.psnr_left),
            "ssim_left": self.ssim_left,
            "psnr_avg": enc(self.psnr_avg),
            "ssim_avg": self.ssim_avg,
            "per_image": [
                {"id": i, "psnr_L": enc(pl), "psnr_R": enc(pr), "ssim_L": sl, "ssim_R": sr}
                for i, pl, pr, sl, sr in self.per_image
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        d = json.loads(text)

        def dec(v):
            return math.inf if v == "inf" else float(v)

        return cls(
            psnr_left=dec(d["psnr_left"]),
            ssim_left=float(d["ssim_left"]),
            psnr_avg=dec(d["psnr_avg"]),
            ssim_avg=float(d["ssim_avg"]),
            per_image=[
                (e["id"], dec(e["psnr_L"]), dec(e["psnr_R"]), float(e["ssim_L"]), float(e["ssim_R"]))
                for e in d["per_image"]
            ],
        )


def aggregate(per_image: Sequence[tuple[str, float, float, float, float]]) -> MetricReport:
    if not per_image:
        raise UsageError("cannot aggregate an empty dataset")
    arr = np.array([row[1:] for row in per_image], dtype=np.float64)
    pl, pr, sl, sr = arr.T
    return MetricReport(
        psnr_left=float(pl.mean()),
        ssim_left=float(sl.mean()),
        psnr_avg=float(((pl + pr) / 2).mean()),
        ssim_avg=float(((sl + sr) / 2).mean()),
        per_image=[tuple(r) for r in per_image],
    )


def evaluate_dataset(
    model: Callable,
    dataset: Iterable,
    peak: float = 1.0,
    border: int = 0,
) -> MetricReport:
    """Score ``model`` on ``dataset``.

    ``dataset`` yields ``(id, lr_left, lr_right, hr_left, hr_right)`` with
    (C, H, W) or (1, C, H, W) images. ``model(lr_left, lr_right)`` must
    return the super-resolved (left, right).
    """
    rows = []
    for sample_id, lr_l, lr_r, hr_l, hr_r in dataset:
        sr_l, sr_r = model(lr_l, lr_r)
        rows.append(
            (
                str(sample_id),
                psnr(sr_l, hr_l, peak, border),
                psnr(sr_r, hr_r, peak, border),
                ssim(sr_l, hr_l, peak, border),
                ssim(sr_r, hr_r, peak, border),
            )
        )
    if not rows:
        raise UsageError("evaluate_dataset needs a non-empty dataset")
    return aggregate(rows)
