"""
Overfitting one stereo patch
============================

A small model (2 blocks, 16 channels, x4) trained with Lion on a single
64x64 stereo crop. Training PSNR climbs far above the bilinear baseline,
which is a quick end-to-end check of model, loss, optimiser and schedule.

Pass a different iteration count as the first argument (default 2000).
"""

import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
from skimage import data

from mffssr import ModelConfig, TrainConfig, mffssr_forward
from mffssr.data import FixedPairDataset
from mffssr.functional import bilinear_upsample
from mffssr.metrics import psnr
from mffssr.plotting import plot_crops, plot_loss
from mffssr.train import train_loop

iters = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
out = Path(tempfile.mkdtemp(prefix="mffssr_overfit_"))

# left and right crops 3 pixels apart stand in for a rectified stereo pair
img = data.astronaut().astype(np.float32).transpose(2, 0, 1) / 255
ds = FixedPairDataset.from_hr(np.ascontiguousarray(img[:, 200:264, 200:264]),
                              np.ascontiguousarray(img[:, 200:264, 203:267]), 4)
lr_l, lr_r = torch.from_numpy(ds.lr_left)[None], torch.from_numpy(ds.lr_right)[None]
print(f"bilinear baseline: {psnr(bilinear_upsample(lr_l, 4), ds.hr_left):.2f} dB")

cfg = ModelConfig.for_scale(4, num_blocks=2, channels=16)
res = train_loop(cfg, TrainConfig(total_iters=iters, batch_size=1), ds, out_dir=out,
                 progress=lambda it, loss, lr: print(f"iter {it:5d}  loss {loss:.4f}") if it % 250 == 0 else None)

sr = mffssr_forward((lr_l, lr_r), res.model)
print(f"training PSNR after {iters} iterations: left {psnr(sr.left, ds.hr_left):.2f} dB,"
      f" right {psnr(sr.right, ds.hr_right):.2f} dB")

print("loss curve:", plot_loss(out / "train.log", out / "loss.png", smooth=50))
print("crops:", plot_crops(ds.lr_left, sr.left[0].clamp(0, 1).numpy(), ds.hr_left, out / "crops.png"))
