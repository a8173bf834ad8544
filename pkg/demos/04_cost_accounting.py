"""
Counting parameters and MACs
============================

Analytic cost report for the default models and every ablation preset,
at a 128x128 low-resolution input.
"""

from mffssr import ModelConfig, ablation_config
from mffssr.config import ABLATIONS
from mffssr.cost import cost_report

for scale in (2, 4):
    cfg = ModelConfig.for_scale(scale)
    print(cost_report(cfg).to_text(cfg))

print(f"{'preset':<12s}{'params':>10s}{'GMACs/view':>12s}")
for name in sorted(ABLATIONS):
    rep = cost_report(ablation_config(name))
    print(f"{name:<12s}{rep.total_params:>10d}{rep.macs_single_view / 1e9:>12.3f}")
