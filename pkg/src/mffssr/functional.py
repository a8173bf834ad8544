"""Stateless building blocks. All tensors are (B, C, H, W)."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F

from .errors import ShapeError


def _check_even(x: torch.Tensor, name: str) -> int:
    c = x.shape[1]
    if c % 2:
        raise ShapeError(f"{name} needs an even channel count, got {c}")
    return c // 2


def simple_gate(x: torch.Tensor) -> torch.Tensor:
    """Split channels in half and multiply the halves."""
    _check_even(x, "simple_gate")
    x1, x2 = x.chunk(2, dim=1)
    return x1 * x2


def nonlinear_gate(x: torch.Tensor) -> torch.Tensor:
    """Split channels in half; return ``x1 * x2 * Phi(x2)`` (exact GELU on the gate half)."""
    _check_even(x, "nonlinear_gate")
    x1, x2 = x.chunk(2, dim=1)
    return x1 * F.gelu(x2)


def layer_norm2d(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor, eps: float = 1e-6) -> torch.Tensor:
    """Normalise over channels at every spatial position, then apply a per-channel affine."""
    mu = x.mean(1, keepdim=True)
    var = (x - mu).pow(2).mean(1, keepdim=True)
    y = (x - mu) / torch.sqrt(var + eps)
    return weight.view(1, -1, 1, 1) * y + bias.view(1, -1, 1, 1)


def channel_attention(x: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor | None) -> torch.Tensor:
    """``x * pconv(avgpool(x))`` with no squashing nonlinearity."""
    pooled = x.mean(dim=(2, 3), keepdim=True)
    return x * F.conv2d(pooled, weight, bias)


def large_kernel_attention(
    x: torch.Tensor,
    dw5: tuple[torch.Tensor, torch.Tensor | None],
    dwd7: tuple[torch.Tensor, torch.Tensor | None],
    pw: tuple[torch.Tensor, torch.Tensor | None],
    dilation: int = 3,
) -> torch.Tensor:
    """5x5 depth-wise -> 7x7 dilated depth-wise -> 1x1, used as a multiplicative map on ``x``.

    Each parameter argument is a ``(weight, bias)`` pair.
    """
    c = x.shape[1]
    attn = F.conv2d(x, dw5[0], dw5[1], padding=2, groups=c)
    attn = F.conv2d(attn, dwd7[0], dwd7[1], padding=3 * dilation, dilation=dilation, groups=c)
    attn = F.conv2d(attn, pw[0], pw[1])
    return x * attn


def repconv_forward(
    x: torch.Tensor,
    w3: torch.Tensor,
    b3: torch.Tensor | None,
    w1: torch.Tensor,
    b1: torch.Tensor | None,
    has_identity: bool,
) -> torch.Tensor:
    """Multi-branch form: ``conv3x3(x) + conv1x1(x) [+ x]``."""
    if x.shape[1] != w3.shape[1]:
        raise ShapeError(f"repconv expects {w3.shape[1]} input channels, got {x.shape[1]}")
    out = F.conv2d(x, w3, b3, padding=1) + F.conv2d(x, w1, b1)
    if has_identity:
        out = out + x
    return out


def repconv_fuse(
    w3: torch.Tensor,
    b3: torch.Tensor | None,
    w1: torch.Tensor,
    b1: torch.Tensor | None,
    has_identity: bool,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Collapse the three branches into one 3x3 kernel and bias."""
    c_out, c_in = w3.shape[:2]
    kernel = w3 + F.pad(w1, (1, 1, 1, 1))
    if has_identity:
        if c_in != c_out:
            raise ShapeError("identity branch requires c_in == c_out")
        ident = torch.zeros_like(w3)
        idx = torch.arange(c_out)
        ident[idx, idx, 1, 1] = 1.0
        kernel = kernel + ident
    bias = torch.zeros(c_out, dtype=w3.dtype, device=w3.device)
    if b3 is not None:
        bias = bias + b3
    if b1 is not None:
        bias = bias + b1
    return kernel, bias


def row_attention(
    q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, return_weights: bool = False
):
    """Scaled dot-product attention along width, independently for every image row.

    ``q`` attends over the width positions of ``k``/``v`` on the same row.
    Returns a (B, C, H, W) tensor, plus the (B, H, W, W) weights if asked.
    """
    if q.shape != k.shape or k.shape != v.shape:
        raise ShapeError(f"attention operands differ in shape: {tuple(q.shape)}, {tuple(k.shape)}, {tuple(v.shape)}")
    c = q.shape[1]
    qr = q.permute(0, 2, 3, 1)  # B, H, W, C
    kt = k.permute(0, 2, 1, 3)  # B, H, C, W
    vr = v.permute(0, 2, 3, 1)
    weights = torch.softmax(torch.matmul(qr, kt) / math.sqrt(c), dim=-1)
    out = torch.matmul(weights, vr).permute(0, 3, 1, 2)
    if return_weights:
        return out, weights
    return out


def pixel_shuffle(x: torch.Tensor, scale: int) -> torch.Tensor:
    """Depth-to-space: (B, C*s*s, H, W) -> (B, C, s*H, s*W)."""
    if x.shape[1] % (scale * scale):
        raise ShapeError(f"channels {x.shape[1]} not divisible by scale^2={scale * scale}")
    return F.pixel_shuffle(x, scale)


def bilinear_upsample(x: torch.Tensor, scale: int) -> torch.Tensor:
    return F.interpolate(x, scale_factor=scale, mode="bilinear", align_corners=False)
