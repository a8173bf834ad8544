"""Parameterised modules: HAFEB pieces, RepConv, and the two cross-view modules."""

from __future__ import annotations

from dataclasses import dataclass, replace

import torch
import torch.nn as nn

from . import functional as MF
from .config import ModelConfig
from .errors import ShapeError, UsageError


def pconv(c_in: int, c_out: int) -> nn.Conv2d:
    return nn.Conv2d(c_in, c_out, 1, bias=True)


def dwconv(c: int, k: int, dilation: int = 1) -> nn.Conv2d:
    return nn.Conv2d(c, c, k, padding=dilation * (k // 2), dilation=dilation, groups=c, bias=True)


class LayerNorm2d(nn.Module):
    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        return MF.layer_norm2d(x, self.weight, self.bias, self.eps)


@dataclass
class RepConvParams:
    """Train-time branches of a RepConv, plus the fused deploy kernel once computed."""

    w3: torch.Tensor
    b3: torch.Tensor
    w1: torch.Tensor
    b1: torch.Tensor
    has_identity: bool
    fused: tuple[torch.Tensor, torch.Tensor] | None = None

    def fuse(self) -> "RepConvParams":
        return replace(self, fused=MF.repconv_fuse(self.w3, self.b3, self.w1, self.b1, self.has_identity))

    def forward(self, x: torch.Tensor, use_fused: bool = True) -> torch.Tensor:
        if use_fused and self.fused is not None:
            if x.shape[1] != self.fused[0].shape[1]:
                raise ShapeError(f"repconv expects {self.fused[0].shape[1]} input channels, got {x.shape[1]}")
            return torch.nn.functional.conv2d(x, self.fused[0], self.fused[1], padding=1)
        return MF.repconv_forward(x, self.w3, self.b3, self.w1, self.b1, self.has_identity)


class RepConv(nn.Module):
    """3x3 + 1x1 (+ identity when shapes allow) branches, fusable into a single 3x3 conv.

    With ``multi_branch=False`` this is a plain 3x3 convolution (the Net-B/Net-C ablation).
    """

    def __init__(self, c_in: int, c_out: int, multi_branch: bool = True):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        self.multi_branch = multi_branch
        self.has_identity = multi_branch and c_in == c_out
        self.conv3 = nn.Conv2d(c_in, c_out, 3, padding=1, bias=True)
        self.conv1 = nn.Conv2d(c_in, c_out, 1, bias=True) if multi_branch else None
        self.deployed = False

    def params(self) -> RepConvParams:
        if self.conv1 is None:
            w1 = torch.zeros(self.c_out, self.c_in, 1, 1, dtype=self.conv3.weight.dtype)
            b1 = torch.zeros(self.c_out, dtype=self.conv3.weight.dtype)
        else:
            w1, b1 = self.conv1.weight, self.conv1.bias
        return RepConvParams(self.conv3.weight, self.conv3.bias, w1, b1, self.has_identity)

    @torch.no_grad()
    def switch_to_deploy(self) -> None:
        if self.deployed or self.conv1 is None:
            self.deployed = True
            return
        kernel, bias = self.params().fuse().fused
        self.conv3.weight.copy_(kernel)
        self.conv3.bias.copy_(bias)
        self.conv1 = None
        self.has_identity = False
        self.deployed = True

    def forward(self, x):
        if self.conv1 is None:
            if x.shape[1] != self.c_in:
                raise ShapeError(f"repconv expects {self.c_in} input channels, got {x.shape[1]}")
            return self.conv3(x)
        return MF.repconv_forward(
            x, self.conv3.weight, self.conv3.bias, self.conv1.weight, self.conv1.bias, self.has_identity
        )


class ChannelAttention(nn.Module):
    def __init__(self, c: int):
        super().__init__()
        self.pconv = pconv(c, c)

    def forward(self, x):
        return MF.channel_attention(x, self.pconv.weight, self.pconv.bias)


class LargeKernelAttention(nn.Module):
    def __init__(self, c: int, dilation: int = 3):
        super().__init__()
        self.dilation = dilation
        self.dw5 = dwconv(c, 5)
        self.dwd7 = dwconv(c, 7, dilation)
        self.pconv = pconv(c, c)

    def forward(self, x):
        return MF.large_kernel_attention(
            x,
            (self.dw5.weight, self.dw5.bias),
            (self.dwd7.weight, self.dwd7.bias),
            (self.pconv.weight, self.pconv.bias),
            self.dilation,
        )


def _proj(c: int) -> nn.Sequential:
    return nn.Sequential(pconv(c, c), dwconv(c, 3))


class CVIM(nn.Module):
    """Bidirectional row-wise cross-view attention with zero-initialised residual scales.

    Six independent point-wise + depth-wise projection stacks produce
    Q/K/V for each direction; no layer norm on the inputs.
    """

    def __init__(self, c: int):
        super().__init__()
        self.q_l, self.k_r, self.v_r = _proj(c), _proj(c), _proj(c)
        self.q_r, self.k_l, self.v_l = _proj(c), _proj(c), _proj(c)
        self.proj_l = pconv(c, c)
        self.proj_r = pconv(c, c)
        self.gamma_l = nn.Parameter(torch.zeros(1, c, 1, 1))
        self.gamma_r = nn.Parameter(torch.zeros(1, c, 1, 1))

    def cross_terms(self, x_l, x_r, return_weights: bool = False):
        if x_l.shape != x_r.shape:
            raise ShapeError(f"left/right shapes differ: {tuple(x_l.shape)} vs {tuple(x_r.shape)}")
        l2r, w_l = MF.row_attention(self.q_l(x_l), self.k_r(x_r), self.v_r(x_r), return_weights=True)
        r2l, w_r = MF.row_attention(self.q_r(x_r), self.k_l(x_l), self.v_l(x_l), return_weights=True)
        l2r, r2l = self.proj_l(l2r), self.proj_r(r2l)
        if return_weights:
            return l2r, r2l, w_l, w_r
        return l2r, r2l

    def forward(self, x_l, x_r):
        l2r, r2l = self.cross_terms(x_l, x_r)
        return x_l + self.gamma_l * l2r, x_r + self.gamma_r * r2l


class SCAM(nn.Module):
    """Stereo cross-attention in the NAFSSR style: normalised inputs, one attention map used both ways."""

    def __init__(self, c: int):
        super().__init__()
        self.norm_l = LayerNorm2d(c)
        self.norm_r = LayerNorm2d(c)
        self.l_proj1 = pconv(c, c)
        self.r_proj1 = pconv(c, c)
        self.l_proj2 = pconv(c, c)
        self.r_proj2 = pconv(c, c)
        self.gamma_l = nn.Parameter(torch.zeros(1, c, 1, 1))
        self.gamma_r = nn.Parameter(torch.zeros(1, c, 1, 1))

    def cross_terms(self, x_l, x_r, return_weights: bool = False):
        if x_l.shape != x_r.shape:
            raise ShapeError(f"left/right shapes differ: {tuple(x_l.shape)} vs {tuple(x_r.shape)}")
        c = x_l.shape[1]
        q_l = self.l_proj1(self.norm_l(x_l)).permute(0, 2, 3, 1)
        q_r_t = self.r_proj1(self.norm_r(x_r)).permute(0, 2, 1, 3)
        v_l = self.l_proj2(x_l).permute(0, 2, 3, 1)
        v_r = self.r_proj2(x_r).permute(0, 2, 3, 1)
        scores = torch.matmul(q_l, q_r_t) * c ** -0.5  # B, H, W_l, W_r
        w_l = torch.softmax(scores, dim=-1)
        w_r = torch.softmax(scores.transpose(-1, -2), dim=-1)
        r2l = torch.matmul(w_l, v_r).permute(0, 3, 1, 2)
        l2r = torch.matmul(w_r, v_l).permute(0, 3, 1, 2)
        if return_weights:
            return r2l, l2r, w_l, w_r
        return r2l, l2r

    def forward(self, x_l, x_r):
        to_l, to_r = self.cross_terms(x_l, x_r)
        return x_l + self.gamma_l * to_l, x_r + self.gamma_r * to_r


class MFEF(nn.Module):
    """Multi-level feature extraction and fusion for both views, with the shared cross-view module."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        c, ce = cfg.channels, cfg.expanded_channels
        c1, c2 = cfg.intra_channels, cfg.cross_channels
        self.cfg = cfg
        self.split = (c1, c2)
        self.norm = LayerNorm2d(c)
        self.pconv1 = pconv(c, ce)
        self.repconv = RepConv(c1, 2 * c2, multi_branch=cfg.use_repconv)
        self.ca = ChannelAttention(c2)
        if cfg.cross_module == "cvim":
            self.cross = CVIM(c2)
        elif cfg.cross_module == "scam":
            self.cross = SCAM(c2)
        else:
            self.cross = None
        self.fuse = dwconv(c2, 3)
        self.lka = LargeKernelAttention(c2, cfg.lka_dilation) if cfg.use_lka else None
        self.pconv2 = pconv(c2, c)

    def intra(self, x1):
        t = MF.simple_gate(self.repconv(x1))
        if self.cfg.ca_literal:
            return t * self.ca(t)
        return self.ca(t)

    def kappa(self, u_l, u_r=None):
        """Channel split; intra branch on X1, cross-view branch on X2; summed.

        ``u_r`` may be omitted only when no cross-view module is configured.
        """
        c1, c2 = self.split
        x1_l, x2_l = torch.split(u_l, [c1, c2], dim=1)
        if u_r is None:
            if self.cross is not None:
                raise UsageError(f"cross_module={self.cfg.cross_module} needs partner-view features")
            return self.intra(x1_l) + x2_l, None
        x1_r, x2_r = torch.split(u_r, [c1, c2], dim=1)
        if self.cross is None:
            y2_l, y2_r = x2_l, x2_r
        else:
            y2_l, y2_r = self.cross(x2_l, x2_r)
        return self.intra(x1_l) + y2_l, self.intra(x1_r) + y2_r

    def _tail(self, k, x):
        f = self.fuse(k) + k
        a = self.lka(f) if self.lka is not None else f
        return self.pconv2(a) + x

    def forward(self, x_l, x_r):
        k_l, k_r = self.kappa(self.pconv1(self.norm(x_l)), self.pconv1(self.norm(x_r)))
        return self._tail(k_l, x_l), self._tail(k_r, x_r)


class IRF(nn.Module):
    """Information refinement feed-forward: LN -> 1x1 expand -> 3x3 dw -> GELU gate -> 1x1, residual."""

    def __init__(self, c: int, expansion: int = 4):
        super().__init__()
        hidden = expansion * c
        self.norm = LayerNorm2d(c)
        self.pconv3 = pconv(c, hidden)
        self.dw3 = dwconv(hidden, 3)
        self.pconv4 = pconv(hidden // 2, c)

    def forward(self, x):
        return self.pconv4(MF.nonlinear_gate(self.dw3(self.pconv3(self.norm(x))))) + x


class SimpleFFN(nn.Module):
    """Point-wise FFN with SimpleGate (the Net-D replacement for IRF)."""

    def __init__(self, c: int, expansion: int = 2):
        super().__init__()
        self.norm = LayerNorm2d(c)
        self.pconv3 = pconv(c, expansion * c)
        self.pconv4 = pconv(expansion * c // 2, c)

    def forward(self, x):
        return self.pconv4(MF.simple_gate(self.pconv3(self.norm(x)))) + x


class MFFBlock(nn.Module):
    """One HAFEB (MFEF + feed-forward) applied to both views with shared weights."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.mfef = MFEF(cfg)
        if cfg.ffn_kind == "irf":
            self.ffn = IRF(cfg.channels, cfg.irf_expansion)
        else:
            self.ffn = SimpleFFN(cfg.channels)

    def forward(self, x_l, x_r):
        x_l, x_r = self.mfef(x_l, x_r)
        return self.ffn(x_l), self.ffn(x_r)
