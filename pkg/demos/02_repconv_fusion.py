"""
Re-parameterising RepConv for deployment
========================================

At training time the intra-view branch runs a 3x3 conv, a 1x1 conv and
(when shapes allow) an identity in parallel. Because all three are linear
they collapse into a single 3x3 kernel for inference.
"""

import torch

from mffssr import ModelConfig, build_model, mffssr_forward
from mffssr import functional as MF
from mffssr.cost import cost_report

torch.manual_seed(0)
w3, b3 = torch.randn(8, 8, 3, 3), torch.randn(8)
w1, b1 = torch.randn(8, 8, 1, 1), torch.randn(8)
x = torch.randn(1, 8, 16, 16)

multi = MF.repconv_forward(x, w3, b3, w1, b1, has_identity=True)
kernel, bias = MF.repconv_fuse(w3, b3, w1, b1, has_identity=True)
fused = torch.nn.functional.conv2d(x, kernel, bias, padding=1)
print("max |fused - multi-branch|:", (fused - multi).abs().max().item())

# the same switch on a whole network
cfg = ModelConfig.for_scale(2, num_blocks=4, channels=32)
model = build_model(cfg)
pair = torch.rand(1, 3, 24, 24), torch.rand(1, 3, 24, 24)
before = mffssr_forward(pair, model)
model.switch_to_deploy()
after = mffssr_forward(pair, model)
print("network output change after fusing:", (before.left - after.left).abs().max().item())
print("params train/deploy:", cost_report(cfg).total_params, cost_report(cfg, fused=True).total_params)
