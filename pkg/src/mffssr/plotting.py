"""Loss-curve and LR/SR/HR comparison figures."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_log(path) -> np.ndarray:
    """Parse a training log into an (n, 3) array of (iter, loss, lr)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            it, loss, lr = line.split("\t")
            rows.append((int(it), float(loss), float(lr)))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def plot_loss(log_path, out_path, smooth: int = 100) -> Path:
    data = read_log(log_path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.5))
    ax1.semilogy(data[:, 0], data[:, 1], lw=0.6, alpha=0.5, label="loss")
    if len(data) >= smooth > 1:
        kernel = np.ones(smooth) / smooth
        ax1.semilogy(data[smooth - 1 :, 0], np.convolve(data[:, 1], kernel, mode="valid"), lw=1.2,
                     label=f"{smooth}-iter mean")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("total loss")
    ax1.legend()
    ax2.plot(data[:, 0], data[:, 2])
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("learning rate")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def _hwc(img) -> np.ndarray:
    if hasattr(img, "detach"):
        img = img.detach().cpu().numpy()
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 4:
        a = a[0]
    return np.clip(a.transpose(1, 2, 0), 0, 1)


def plot_crops(lr, sr, hr, out_path, box: tuple[int, int, int, int] | None = None, scale: int | None = None) -> Path:
    """Side-by-side LR (nearest-upsampled), SR and HR.

    ``box`` is ``(top, left, height, width)`` in HR pixels.
    """
    lr, sr, hr = _hwc(lr), _hwc(sr), _hwc(hr)
    s = scale or hr.shape[0] // lr.shape[0]
    lr_up = np.repeat(np.repeat(lr, s, axis=0), s, axis=1)
    if box is not None:
        t, l, h, w = box
        lr_up, sr, hr = (a[t : t + h, l : l + w] for a in (lr_up, sr, hr))
    fig, axes = plt.subplots(1, 3, figsize=(9, 3.3))
    for ax, img, title in zip(axes, (lr_up, sr, hr), ("LR (nearest)", "SR", "HR")):
        ax.imshow(img, interpolation="nearest")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
