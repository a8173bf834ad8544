import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)
    np.random.seed(0)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def randomize_(module, scale=0.3, generator=None):
    """Overwrite every parameter (including zero-initialised scales) with N(0, scale^2)."""
    with torch.no_grad():
        for p in module.parameters():
            p.copy_(torch.randn(p.shape, generator=generator, dtype=p.dtype) * scale)
    return module


def tiny_cfg(**kw):
    from mffssr import ModelConfig

    base = dict(scale=2, num_blocks=1, channels=8)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture
def double():
    old = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(old)
