"""Lightweight stereo image super-resolution with multi-level feature fusion."""

from .config import LossConfig, ModelConfig, TrainConfig, ablation_config
from .model import MFFSSR, StereoPair, build_model, mffssr_forward

__all__ = [
    "LossConfig",
    "MFFSSR",
    "ModelConfig",
    "StereoPair",
    "TrainConfig",
    "ablation_config",
    "build_model",
    "mffssr_forward",
]
