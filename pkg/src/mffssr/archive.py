"""Weight archive: a single-file tensor container with a JSON manifest.

Byte layout (all integers little-endian)::

    offset 0   8 bytes   magic  b"MFFSSRW1"
    offset 8   8 bytes   uint64 header length N
    offset 16  N bytes   UTF-8 JSON header
    offset 16+N          tensor data, concatenated in header order

Header keys:

``format_version``
    integer, currently 1.
``config``
    the ModelConfig fields (scale, num_blocks, channels, theta, flags...), or null.
``tensors``
    list of ``{"name", "dtype", "shape", "offset", "nbytes"}``; ``offset`` is
    relative to the start of the data section, data is C-ordered.
``meta``
    free-form JSON object (training step, rng state, ...).

Model tensor names are ``shallow.*``, ``block{i}.{submodule}.{param}``
and ``recon.*``. The ``block{i}`` prefix replaces PyTorch's ``blocks.{i}``.
"""

from __future__ import annotations

import json
import re
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .config import ModelConfig
from .errors import DataError

MAGIC = b"MFFSSRW1"
FORMAT_VERSION = 1
_DTYPES = {
    "float32": (torch.float32, "<f4"),
    "float64": (torch.float64, "<f8"),
    "int64": (torch.int64, "<i8"),
    "uint8": (torch.uint8, "|u1"),
}
_TORCH_TO_NAME = {v[0]: k for k, v in _DTYPES.items()}


def save_archive(path, tensors: dict[str, torch.Tensor], config: dict | None = None, meta: dict | None = None) -> None:
    entries, blobs, offset = [], [], 0
    for name, t in tensors.items():
        t = t.detach().cpu().contiguous()
        if t.dtype not in _TORCH_TO_NAME:
            raise DataError(f"unsupported dtype {t.dtype} for tensor {name}")
        dname = _TORCH_TO_NAME[t.dtype]
        raw = t.numpy().astype(_DTYPES[dname][1], copy=False).tobytes(order="C")
        entries.append({"name": name, "dtype": dname, "shape": list(t.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"format_version": FORMAT_VERSION, "config": config, "tensors": entries, "meta": meta or {}},
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for raw in blobs:
            fh.write(raw)


def load_archive(path) -> tuple[dict[str, torch.Tensor], dict | None, dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise DataError(f"{path}: not a weight archive")
    (n,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + n].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {header.get('format_version')}")
    base = 16 + n
    tensors = {}
    for e in header["tensors"]:
        tdtype, npdtype = _DTYPES[e["dtype"]]
        start = base + e["offset"]
        arr = np.frombuffer(data[start : start + e["nbytes"]], dtype=npdtype).reshape(e["shape"])
        tensors[e["name"]] = torch.from_numpy(arr.copy()).to(tdtype)
    return tensors, header.get("config"), header.get("meta", {})


_BLOCK_RE = re.compile(r"^blocks\.(\d+)\.")
_ARCHIVE_BLOCK_RE = re.compile(r"^block(\d+)\.")


def to_archive_name(name: str) -> str:
    return _BLOCK_RE.sub(r"block\1.", name)


def from_archive_name(name: str) -> str:
    return _ARCHIVE_BLOCK_RE.sub(r"blocks.\1.", name)


def model_tensors(model: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {to_archive_name(k): v for k, v in model.state_dict().items()}


def _is_deployed(model) -> bool:
    return any(getattr(m, "deployed", False) for m in model.modules())


def save_weights(model, path, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    meta["deployed"] = _is_deployed(model)
    save_archive(path, model_tensors(model), config=model.cfg.to_dict(), meta=meta)


def load_weights(path, model=None):
    """Load an archive into ``model`` (built from the stored config if omitted)."""
    from .model import MFFSSR

    tensors, config, meta = load_archive(path)
    if model is None:
        if config is None:
            raise DataError(f"{path}: archive carries no model config")
        model = MFFSSR(ModelConfig(**config))
    if meta.get("deployed") and not _is_deployed(model):
        model.switch_to_deploy()
    state = {from_archive_name(k): v for k, v in tensors.items() if not k.startswith(("optim.", "rng."))}
    dtype = next(iter(state.values())).dtype if state else torch.float32
    model = model.to(dtype)
    missing, unexpected = model.load_state_dict(state, strict=False)
    if missing or unexpected:
        raise DataError(f"{path}: missing={missing} unexpected={unexpected}")
    return model


def config_from_archive(path) -> dict[str, Any] | None:
    return load_archive(path)[1]
