"""Spatial MSE, frequency-domain Charbonnier, and their weighted sum.

Inputs are stereo pairs of (B, C, H, W) tensors. The DFT is unnormalised
(``norm="backward"``), so the frequency term scales with H*W.
"""

from __future__ import annotations

import torch

from .config import LossConfig
from .errors import ShapeError


def _stack(pair) -> torch.Tensor:
    left, right = pair
    if left.shape != right.shape:
        raise ShapeError(f"left/right shapes differ: {tuple(left.shape)} vs {tuple(right.shape)}")
    return torch.stack((left, right), dim=1)  # B, 2, C, H, W


def _both(sr, hr) -> tuple[torch.Tensor, torch.Tensor]:
    a, b = _stack(sr), _stack(hr)
    if a.shape != b.shape:
        raise ShapeError(f"sr/hr shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    return a, b


def mse_loss(sr, hr) -> torch.Tensor:
    a, b = _both(sr, hr)
    return (a - b).pow(2).mean()


def freq_charbonnier_loss(sr, hr, cfg: LossConfig = LossConfig()) -> torch.Tensor:
    """Per sample: sqrt(||FFT2(hr) - FFT2(sr)||_F^2 + eps^2), averaged over the batch.

    The Frobenius norm runs over both views, all channels, all frequency
    bins, and the real and imaginary parts.
    """
    a, b = _both(sr, hr)
    diff = torch.fft.fft2(b - a)  # linear, equals FFT(hr) - FFT(sr)
    sq = (diff.real.pow(2) + diff.imag.pow(2)).flatten(1).sum(dim=1)
    return torch.sqrt(sq + cfg.epsilon ** 2).mean()


def total_loss(sr, hr, cfg: LossConfig = LossConfig()) -> torch.Tensor:
    return mse_loss(sr, hr) + cfg.lam * freq_charbonnier_loss(sr, hr, cfg)
