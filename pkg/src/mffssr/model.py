"""The full stereo super-resolution network."""

from __future__ import annotations

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from . import functional as MF
from .config import ModelConfig
from .errors import ConfigError, DataError, ShapeError
from .layers import MFFBlock


class StereoPair(NamedTuple):
    left: torch.Tensor
    right: torch.Tensor

    def check(self, channels: int | None = None) -> "StereoPair":
        if self.left.shape != self.right.shape:
            raise ShapeError(f"left/right shapes differ: {tuple(self.left.shape)} vs {tuple(self.right.shape)}")
        if self.left.dim() != 4:
            raise ShapeError(f"expected (B, C, H, W) tensors, got {self.left.dim()} dims")
        if channels is not None and self.left.shape[1] != channels:
            raise ShapeError(f"expected {channels} channels, got {self.left.shape[1]}")
        return self


def shallow_extract(pair: StereoPair, weight: torch.Tensor, bias: torch.Tensor | None) -> StereoPair:
    """Shared 3x3 convolution on both 3-channel views."""
    StereoPair(*pair).check(channels=3)
    return StereoPair(F.conv2d(pair.left, weight, bias, padding=1), F.conv2d(pair.right, weight, bias, padding=1))


def upsample_reconstruct(
    deep: StereoPair, lr: StereoPair, weight: torch.Tensor, bias: torch.Tensor | None, scale: int
) -> StereoPair:
    """conv3x3 -> pixel shuffle on features, plus bilinear upsampling of the LR image."""
    if scale not in (2, 4):
        raise ConfigError(f"unsupported scale {scale}")
    out = []
    for feat, img in zip(deep, lr):
        out.append(MF.pixel_shuffle(F.conv2d(feat, weight, bias, padding=1), scale) + MF.bilinear_upsample(img, scale))
    return StereoPair(*out)


class MFFSSR(nn.Module):
    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        self.shallow = nn.Conv2d(3, cfg.channels, 3, padding=1)
        self.blocks = nn.ModuleList(MFFBlock(cfg) for _ in range(cfg.num_blocks))
        self.recon = nn.Conv2d(cfg.channels, 3 * cfg.scale ** 2, 3, padding=1)

    def forward(self, lr_left: torch.Tensor, lr_right: torch.Tensor) -> StereoPair:
        lr = StereoPair(lr_left, lr_right).check(channels=3)
        if not (torch.isfinite(lr_left).all() and torch.isfinite(lr_right).all()):
            raise DataError("input contains NaN or Inf")
        x_l, x_r = shallow_extract(lr, self.shallow.weight, self.shallow.bias)
        for block in self.blocks:
            x_l, x_r = block(x_l, x_r)
        return upsample_reconstruct(StereoPair(x_l, x_r), lr, self.recon.weight, self.recon.bias, self.cfg.scale)

    def switch_to_deploy(self) -> None:
        for m in self.modules():
            if hasattr(m, "switch_to_deploy") and m is not self:
                m.switch_to_deploy()


def build_model(cfg: ModelConfig, seed: int | None = 0, dtype: torch.dtype = torch.float32) -> MFFSSR:
    """Instantiate with a fixed seed so that weights are reproducible."""
    if seed is not None:
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            model = MFFSSR(cfg)
    else:
        model = MFFSSR(cfg)
    return model.to(dtype)


def mffssr_forward(lr_pair: StereoPair, model: MFFSSR) -> StereoPair:
    """Run inference on a stereo pair without tracking gradients."""
    with torch.no_grad():
        return model(*lr_pair)
