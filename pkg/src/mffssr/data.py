"""Stereo dataset ingestion, LR synthesis, aligned patch sampling and augmentation.

Directory layout::

    <root>/<split>/<id>_L.png, <id>_R.png        HR stereo pair (8-bit RGB)
    <root>/<split>/LR_x<s>/<id>_L.png, <id>_R.png optional pre-degraded LR pair
    <root>/<split>/manifest.txt                   optional, one id per line

Images are (3, H, W) float32 arrays in [0, 1]. A training tuple is
``(lr_left, lr_right, hr_left, hr_right)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import DataError


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_image(path, img) -> None:
    if hasattr(img, "detach"):
        img = img.detach().cpu().numpy()
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 4:
        arr = arr[0]
    arr = np.clip(arr, 0.0, 1.0).transpose(1, 2, 0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path)


def crop_to_multiple(img: np.ndarray, s: int) -> np.ndarray:
    h, w = img.shape[-2:]
    return img[..., : h - h % s, : w - w % s]


def bicubic_downsample(img, s: int) -> np.ndarray:
    """Antialiased bicubic (a = -0.5) downsampling by ``s``, clamped to [0, 1]."""
    arr = crop_to_multiple(np.asarray(img, dtype=np.float32), s)
    h, w = arr.shape[-2:]
    if h == 0 or w == 0:
        raise DataError(f"image smaller than scale {s}")
    t = torch.from_numpy(np.ascontiguousarray(arr))
    squeeze = t.dim() == 3
    if squeeze:
        t = t[None]
    out = F.interpolate(t, size=(h // s, w // s), mode="bicubic", align_corners=False, antialias=True)
    out = out.clamp_(0.0, 1.0)
    if squeeze:
        out = out[0]
    return out.numpy()


@dataclass
class SampleRecord:
    id: str
    hr_left: Path
    hr_right: Path
    lr_left: Path | None = None
    lr_right: Path | None = None


@dataclass
class DatasetManifest:
    root: Path
    records: list[SampleRecord]
    scale: int
    patch: tuple[int, int] = (30, 90)

    def __post_init__(self):
        if self.scale not in (2, 4):
            raise DataError(f"unsupported scale {self.scale}")
        if min(self.patch) < 1:
            raise DataError(f"patch size must be positive, got {self.patch}")


def scan_dataset(root, split: str, scale: int, patch: tuple[int, int] = (30, 90)) -> DatasetManifest:
    base = Path(root) / split
    if not base.is_dir():
        raise DataError(f"dataset directory not found: {base}")
    manifest_file = base / "manifest.txt"
    if manifest_file.is_file():
        ids = [ln.strip() for ln in manifest_file.read_text().splitlines() if ln.strip()]
    else:
        ids = sorted(p.name[: -len("_L.png")] for p in base.glob("*_L.png"))
    lr_dir = base / f"LR_x{scale}"
    records = []
    for i in ids:
        hl, hr = base / f"{i}_L.png", base / f"{i}_R.png"
        if not (hl.is_file() and hr.is_file()):
            raise DataError(f"missing stereo pair for id {i!r} in {base}")
        ll, lr = lr_dir / f"{i}_L.png", lr_dir / f"{i}_R.png"
        has_lr = ll.is_file() and lr.is_file()
        records.append(SampleRecord(i, hl, hr, ll if has_lr else None, lr if has_lr else None))
    if not records:
        raise DataError(f"no stereo pairs found under {base}")
    return DatasetManifest(Path(root), records, scale, tuple(patch))


class _ImageCache:
    def __init__(self):
        self._store: dict[Path, np.ndarray] = {}

    def __call__(self, path: Path) -> np.ndarray:
        if path not in self._store:
            self._store[path] = load_image(path)
        return self._store[path]


def load_pair(record: SampleRecord, s: int, cache=load_image):
    """Full-size ``(lr_l, lr_r, hr_l, hr_r)`` with HR cropped to a multiple of ``s``."""
    hr_l = crop_to_multiple(cache(record.hr_left), s)
    hr_r = crop_to_multiple(cache(record.hr_right), s)
    if hr_l.shape != hr_r.shape:
        raise DataError(f"{record.id}: left/right sizes differ {hr_l.shape} vs {hr_r.shape}")
    if record.lr_left is not None:
        lr_l, lr_r = cache(record.lr_left), cache(record.lr_right)
    else:
        lr_l, lr_r = bicubic_downsample(hr_l, s), bicubic_downsample(hr_r, s)
    h, w = lr_l.shape[-2:]
    return lr_l, lr_r, hr_l[:, : h * s, : w * s], hr_r[:, : h * s, : w * s]


def sample_patch(record: SampleRecord, s: int, patch: tuple[int, int], rng: np.random.Generator, cache=load_image):
    """Crop the same window from both views; HR window is ``s`` times the LR one.

    Returns None (with a warning) when the image is smaller than ``s * patch``.
    """
    ph, pw = patch
    hr_l = cache(record.hr_left)
    hr_r = cache(record.hr_right)
    if hr_l.shape != hr_r.shape:
        raise DataError(f"{record.id}: left/right sizes differ {hr_l.shape} vs {hr_r.shape}")
    H, W = hr_l.shape[-2:]
    if H < s * ph or W < s * pw:
        warnings.warn(f"{record.id}: {H}x{W} is smaller than the {s * ph}x{s * pw} HR patch; skipped")
        return None
    y = int(rng.integers(0, H // s - ph + 1))
    x = int(rng.integers(0, W // s - pw + 1))
    hy, hx = y * s, x * s
    hr_l_c = hr_l[:, hy : hy + s * ph, hx : hx + s * pw]
    hr_r_c = hr_r[:, hy : hy + s * ph, hx : hx + s * pw]
    if record.lr_left is not None:
        lr_l_c = cache(record.lr_left)[:, y : y + ph, x : x + pw]
        lr_r_c = cache(record.lr_right)[:, y : y + ph, x : x + pw]
    else:
        lr_l_c = bicubic_downsample(hr_l_c, s)
        lr_r_c = bicubic_downsample(hr_r_c, s)
    return lr_l_c, lr_r_c, hr_l_c, hr_r_c


@dataclass(frozen=True)
class AugmentFlags:
    hflip: bool = True
    vflip: bool = True
    rot180: bool = True
    rot90: bool = False
    channel_shuffle: bool = True


def hflip(tup):
    """Mirror horizontally and swap the views so disparity keeps its sign."""
    lr_l, lr_r, hr_l, hr_r = (a[..., ::-1] for a in tup)
    return lr_r, lr_l, hr_r, hr_l


def vflip(tup):
    return tuple(a[..., ::-1, :] for a in tup)


def rot180(tup):
    return hflip(vflip(tup))


def rot90(tup):
    # breaks the horizontal-epipolar assumption; off unless asked for
    return tuple(np.rot90(a, 1, axes=(-2, -1)) for a in tup)


def shuffle_channels(tup, perm: Sequence[int]):
    perm = list(perm)
    return tuple(a[perm] for a in tup)


def augment(tup, rng: np.random.Generator, flags: AugmentFlags = AugmentFlags()):
    """Randomly apply the enabled augmentations, each with probability 1/2."""
    if flags.hflip and rng.random() < 0.5:
        tup = hflip(tup)
    if flags.vflip and rng.random() < 0.5:
        tup = vflip(tup)
    if flags.rot180 and rng.random() < 0.5:
        tup = rot180(tup)
    if flags.rot90 and rng.random() < 0.5:
        tup = rot90(tup)
    if flags.channel_shuffle:
        tup = shuffle_channels(tup, rng.permutation(3))
    return tuple(np.ascontiguousarray(a) for a in tup)


def stack_batch(tuples) -> tuple[torch.Tensor, ...]:
    return tuple(torch.from_numpy(np.stack([t[i] for t in tuples])) for i in range(4))


class StereoPatchDataset:
    """Random aligned patches from a manifest, one independent rng per caller."""

    def __init__(self, manifest: DatasetManifest, flags: AugmentFlags = AugmentFlags(), max_tries: int = 100):
        self.manifest = manifest
        self.flags = flags
        self.max_tries = max_tries
        self._cache = _ImageCache()

    def sample(self, rng: np.random.Generator):
        for _ in range(self.max_tries):
            idx = int(rng.integers(len(self.manifest.records)))
            rec = self.manifest.records[idx]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                tup = sample_patch(rec, self.manifest.scale, self.manifest.patch, rng, self._cache)
            if tup is not None:
                return rec.id, augment(tup, rng, self.flags)
        raise DataError("no image in the dataset is large enough for the configured patch size")

    def batch(self, rng: np.random.Generator, batch_size: int):
        ids, tuples = zip(*(self.sample(rng) for _ in range(batch_size)))
        return list(ids), stack_batch(tuples)

    def eval_pairs(self) -> Iterator:
        for rec in self.manifest.records:
            yield (rec.id, *load_pair(rec, self.manifest.scale, self._cache))


@dataclass
class FixedPairDataset:
    """A single stereo tuple returned on every draw (overfitting and smoke tests)."""

    lr_left: np.ndarray
    lr_right: np.ndarray
    hr_left: np.ndarray
    hr_right: np.ndarray
    sample_id: str = "fixed"

    @classmethod
    def from_hr(cls, hr_left: np.ndarray, hr_right: np.ndarray, s: int, sample_id: str = "fixed"):
        hr_left, hr_right = crop_to_multiple(hr_left, s), crop_to_multiple(hr_right, s)
        return cls(bicubic_downsample(hr_left, s), bicubic_downsample(hr_right, s), hr_left, hr_right, sample_id)

    def batch(self, rng: np.random.Generator, batch_size: int):
        tup = (self.lr_left, self.lr_right, self.hr_left, self.hr_right)
        return [self.sample_id] * batch_size, stack_batch([tup] * batch_size)

    def eval_pairs(self):
        yield self.sample_id, self.lr_left, self.lr_right, self.hr_left, self.hr_right
