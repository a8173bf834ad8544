"""Analytic parameter and multiply-accumulate accounting.

Counts are derived from the configuration alone, independently of the
instantiated modules. Conventions:

* conv MACs = C_in * C_out * k^2 * H * W / groups, at LR resolution;
* channel-attention 1x1 conv runs on the pooled 1x1 map;
* CVIM attention = 2 * H * W^2 * C' per direction (scores + weighted sum);
* SCAM shares one score matrix between directions: 3 * H * W^2 * C' per pair;
* element-wise products, normalisation, softmax, pixel shuffle and the
  bilinear image path are not counted;
* single-view MACs cover one view's share of every shared operation, so
  ``macs_pair == 2 * macs_single_view``. FLOPs are reported as 2 * MACs.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from .config import ModelConfig


def conv_params(c_in: int, c_out: int, k: int, groups: int = 1, bias: bool = True) -> int:
    return c_in // groups * c_out * k * k + (c_out if bias else 0)


def conv_macs(c_in: int, c_out: int, k: int, h: int, w: int, groups: int = 1) -> int:
    return c_in * c_out * k * k * h * w // groups


@dataclass
class CostReport:
    total_params: int
    breakdown: "OrderedDict[str, int]" = field(default_factory=OrderedDict)
    input_hw: tuple[int, int] = (128, 128)
    macs_single_view: int = 0
    macs_pair: int = 0
    fused_repconv: bool = False

    def to_text(self, cfg: ModelConfig | None = None) -> str:
        lines = []
        if cfg is not None:
            lines.append(
                f"config: scale=x{cfg.scale} blocks={cfg.num_blocks} channels={cfg.channels} "
                f"theta={cfg.theta} cross={cfg.cross_module} ffn={cfg.ffn_kind} "
                f"lka={cfg.use_lka} repconv={cfg.use_repconv}"
            )
        lines.append(f"params: {self.total_params} ({self.total_params / 1e6:.3f}M)"
                     + (" [repconv fused]" if self.fused_repconv else ""))
        for name, n in self.breakdown.items():
            lines.append(f"  {name:<16s}{n:>12d}")
        h, w = self.input_hw
        lines.append(f"MACs @ {h}x{w} LR input: single view {self.macs_single_view} "
                     f"({self.macs_single_view / 1e9:.3f}G), pair {self.macs_pair} ({self.macs_pair / 1e9:.3f}G)")
        lines.append(f"FLOPs (2*MACs): single view {2 * self.macs_single_view / 1e9:.3f}G, "
                     f"pair {2 * self.macs_pair / 1e9:.3f}G")
        return "\n".join(lines) + "\n"


def _block_inventory(cfg: ModelConfig, h: int, w: int, fused: bool) -> dict[str, tuple[int, int]]:
    """(params, single-view MACs) per sub-module group of one MFF block."""
    c, ce = cfg.channels, cfg.expanded_channels
    c1, c2 = cfg.intra_channels, cfg.cross_channels

    mfef_p = 2 * c + conv_params(c, ce, 1)
    mfef_m = conv_macs(c, ce, 1, h, w)
    # RepConv: 3x3, plus the 1x1 branch unless ablated or fused; identity carries no parameters
    mfef_p += conv_params(c1, 2 * c2, 3)
    mfef_m += conv_macs(c1, 2 * c2, 3, h, w)
    if cfg.use_repconv and not fused:
        mfef_p += conv_params(c1, 2 * c2, 1)
        mfef_m += conv_macs(c1, 2 * c2, 1, h, w)
    mfef_p += conv_params(c2, c2, 1)  # channel attention
    mfef_m += conv_macs(c2, c2, 1, 1, 1)
    mfef_p += conv_params(c2, c2, 3, groups=c2)  # fusion dw3
    mfef_m += conv_macs(c2, c2, 3, h, w, groups=c2)
    if cfg.use_lka:
        mfef_p += conv_params(c2, c2, 5, c2) + conv_params(c2, c2, 7, c2) + conv_params(c2, c2, 1)
        mfef_m += conv_macs(c2, c2, 5, h, w, c2) + conv_macs(c2, c2, 7, h, w, c2) + conv_macs(c2, c2, 1, h, w)
    mfef_p += conv_params(c2, c, 1)
    mfef_m += conv_macs(c2, c, 1, h, w)

    if cfg.cross_module == "cvim":
        stack_p = conv_params(c2, c2, 1) + conv_params(c2, c2, 3, c2)
        stack_m = conv_macs(c2, c2, 1, h, w) + conv_macs(c2, c2, 3, h, w, c2)
        cross_p = 6 * stack_p + 2 * conv_params(c2, c2, 1) + 2 * c2
        cross_m = 3 * stack_m + conv_macs(c2, c2, 1, h, w) + 2 * h * w * w * c2
    elif cfg.cross_module == "scam":
        cross_p = 2 * (2 * c2) + 4 * conv_params(c2, c2, 1) + 2 * c2
        cross_m = 2 * conv_macs(c2, c2, 1, h, w) + (3 * h * w * w * c2) // 2
    else:
        cross_p = cross_m = 0

    if cfg.ffn_kind == "irf":
        hid = cfg.irf_expansion * c
        ffn_p = 2 * c + conv_params(c, hid, 1) + conv_params(hid, hid, 3, hid) + conv_params(hid // 2, c, 1)
        ffn_m = conv_macs(c, hid, 1, h, w) + conv_macs(hid, hid, 3, h, w, hid) + conv_macs(hid // 2, c, 1, h, w)
    else:
        hid = 2 * c
        ffn_p = 2 * c + conv_params(c, hid, 1) + conv_params(hid // 2, c, 1)
        ffn_m = conv_macs(c, hid, 1, h, w) + conv_macs(hid // 2, c, 1, h, w)
    return {"mfef": (mfef_p, mfef_m), "cross": (cross_p, cross_m), "ffn": (ffn_p, ffn_m)}


def cost_report(cfg: ModelConfig, input_hw: tuple[int, int] = (128, 128), fused: bool = False) -> CostReport:
    h, w = input_hw
    c, s = cfg.channels, cfg.scale
    breakdown: OrderedDict[str, int] = OrderedDict()
    macs = 0
    breakdown["shallow"] = conv_params(3, c, 3)
    macs += conv_macs(3, c, 3, h, w)
    inv = _block_inventory(cfg, h, w, fused)
    for key, (p, m) in inv.items():
        breakdown[f"blocks.{key}"] = cfg.num_blocks * p
        macs += cfg.num_blocks * m
    breakdown["recon"] = conv_params(c, 3 * s * s, 3)
    macs += conv_macs(c, 3 * s * s, 3, h, w)
    return CostReport(
        total_params=sum(breakdown.values()),
        breakdown=breakdown,
        input_hw=(h, w),
        macs_single_view=macs,
        macs_pair=2 * macs,
        fused_repconv=fused,
    )


def param_count(cfg: ModelConfig, fused: bool = False) -> CostReport:
    return cost_report(cfg, fused=fused)


def macs_estimate(cfg: ModelConfig, input_hw: tuple[int, int] = (128, 128)) -> CostReport:
    return cost_report(cfg, input_hw)
