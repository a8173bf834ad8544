"""Lion optimisation, cosine learning-rate decay and a resumable training loop.

Log format: one line per iteration, ``iter<TAB>loss<TAB>lr`` with floats
written via ``repr`` so logs from resumed runs compare exactly.

Checkpoints use the weight-archive format with two extra sections:
``optim.exp_avg.<name>`` tensors for the Lion momentum, ``rng.torch`` for
the torch generator state, and ``meta`` holding the next iteration index,
the numpy generator state and the run configuration.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .archive import from_archive_name, load_archive, model_tensors, save_archive, to_archive_name
from .config import LossConfig, ModelConfig, TrainConfig
from .errors import NumericError, ShapeError
from .losses import total_loss
from .model import MFFSSR, build_model


def cosine_lr(t: float, T: float, lr0: float, lr_min: float = 0.0) -> float:
    if t >= T:
        return lr_min
    t = max(t, 0)
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * t / T))


@dataclass
class OptimizerState:
    m: list[torch.Tensor]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[torch.Tensor]) -> "OptimizerState":
        return cls([torch.zeros_like(p) for p in params])


def lion_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: OptimizerState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.99,
    weight_decay: float = 0.0,
) -> tuple[list[torch.Tensor], OptimizerState]:
    """One Lion update; returns new parameters and state, inputs are left untouched."""
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeError("params, grads and momentum lists differ in length")
    new_p, new_m = [], []
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch: param {tuple(p.shape)}, grad {tuple(g.shape)}, m {tuple(m.shape)}")
        u = torch.sign(beta1 * m + (1 - beta1) * g)
        new_p.append(p - lr * (u + weight_decay * p))
        new_m.append(beta2 * m + (1 - beta2) * g)
    return new_p, OptimizerState(new_m, state.step + 1)


class Lion(torch.optim.Optimizer):
    """In-place Lion; sign(0) = 0."""

    def __init__(self, params, lr: float = 5e-4, betas=(0.9, 0.99), weight_decay: float = 0.0):
        if lr <= 0:
            raise ValueError(f"invalid learning rate {lr}")
        super().__init__(params, dict(lr=lr, betas=betas, weight_decay=weight_decay))

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            beta1, beta2 = group["betas"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if not state:
                    state["exp_avg"] = torch.zeros_like(p)
                m = state["exp_avg"]
                u = torch.sign(m * beta1 + p.grad * (1 - beta1))
                if group["weight_decay"]:
                    p.mul_(1 - group["lr"] * group["weight_decay"])
                p.add_(u, alpha=-group["lr"])
                m.mul_(beta2).add_(p.grad, alpha=1 - beta2)
        return loss


@dataclass
class TrainResult:
    model: MFFSSR
    history: list[tuple[int, float, float]] = field(default_factory=list)
    checkpoint: Path | None = None


def _dtype(name: str) -> torch.dtype:
    return torch.float64 if name == "float64" else torch.float32


def save_checkpoint(path, model: MFFSSR, optimizer: Lion, next_iter: int, rng: np.random.Generator,
                    train_cfg: TrainConfig, loss_cfg: LossConfig) -> None:
    tensors = model_tensors(model)
    names = {id(p): n for n, p in model.named_parameters()}
    for group in optimizer.param_groups:
        for p in group["params"]:
            st = optimizer.state.get(p)
            if st:
                tensors["optim.exp_avg." + to_archive_name(names[id(p)])] = st["exp_avg"]
    tensors["rng.torch"] = torch.get_rng_state()
    meta = {
        "next_iter": next_iter,
        "numpy_rng": rng.bit_generator.state,
        "train": dataclasses.asdict(train_cfg),
        "loss": dataclasses.asdict(loss_cfg),
    }
    save_archive(path, tensors, config=model.cfg.to_dict(), meta=meta)


def load_checkpoint(path, dtype: torch.dtype | None = None):
    """Returns ``(model, optimizer_state_by_name, next_iter, numpy_rng_state, meta)``."""
    tensors, config, meta = load_archive(path)
    model = MFFSSR(ModelConfig(**config))
    weights = {from_archive_name(k): v for k, v in tensors.items() if not k.startswith(("optim.", "rng."))}
    model = model.to(dtype or next(iter(weights.values())).dtype)
    model.load_state_dict(weights)
    momentum = {from_archive_name(k[len("optim.exp_avg."):]): v
                for k, v in tensors.items() if k.startswith("optim.exp_avg.")}
    if "rng.torch" in tensors:
        torch.set_rng_state(tensors["rng.torch"])
    return model, momentum, meta["next_iter"], meta["numpy_rng"], meta


def train_loop(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dataset,
    loss_cfg: LossConfig = LossConfig(),
    out_dir=None,
    resume_from=None,
    stop_at: int | None = None,
    progress=None,
) -> TrainResult:
    """Train with Lion and cosine decay.

    ``dataset`` needs a ``batch(rng, batch_size) -> (ids, (lr_l, lr_r, hr_l, hr_r))``
    method. ``stop_at`` ends the run early (exclusive iteration index) while
    keeping the schedule of ``train_cfg.total_iters``; a checkpoint is always
    written at the stopping point when ``out_dir`` is given.
    """
    dtype = _dtype(train_cfg.dtype)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(train_cfg.seed)
    if resume_from is not None:
        model, momentum, start, rng_state, _ = load_checkpoint(resume_from, dtype)
        rng.bit_generator.state = rng_state
    else:
        model, momentum, start = build_model(model_cfg, seed=train_cfg.seed, dtype=dtype), {}, 0
        torch.manual_seed(train_cfg.seed)
    model.train()
    opt = Lion(model.parameters(), lr=train_cfg.lr0, betas=(train_cfg.beta1, train_cfg.beta2),
               weight_decay=train_cfg.weight_decay)
    for name, p in model.named_parameters():
        if name in momentum:
            opt.state[p]["exp_avg"] = momentum[name].to(dtype).clone()

    log_fh = open(out / "train.log", "a" if resume_from is not None else "w") if out is not None else None
    end = train_cfg.total_iters if stop_at is None else min(stop_at, train_cfg.total_iters)
    history: list[tuple[int, float, float]] = []
    ckpt_path = None
    try:
        for it in range(start, end):
            lr = cosine_lr(it, train_cfg.total_iters, train_cfg.lr0, train_cfg.lr_min)
            for g in opt.param_groups:
                g["lr"] = lr
            ids, (lr_l, lr_r, hr_l, hr_r) = dataset.batch(rng, train_cfg.batch_size)
            lr_l, lr_r, hr_l, hr_r = (t.to(dtype) for t in (lr_l, lr_r, hr_l, hr_r))
            opt.zero_grad(set_to_none=True)
            sr = model(lr_l, lr_r)
            loss = total_loss(sr, (hr_l, hr_r), loss_cfg)
            if not torch.isfinite(loss):
                if out is not None:
                    np.savez(out / "nan_batch.npz", lr_left=lr_l.numpy(), lr_right=lr_r.numpy(),
                             hr_left=hr_l.numpy(), hr_right=hr_r.numpy(), ids=np.array(ids))
                raise NumericError(f"non-finite loss at iteration {it} on batch {ids}", batch_id=ids)
            loss.backward()
            opt.step()
            value = float(loss.detach())
            history.append((it, value, lr))
            if log_fh is not None:
                log_fh.write(f"{it}\t{value!r}\t{lr!r}\n")
                log_fh.flush()
            if progress is not None:
                progress(it, value, lr)
            done = it + 1
            if out is not None and train_cfg.checkpoint_every and done % train_cfg.checkpoint_every == 0:
                ckpt_path = out / f"ckpt_{done:07d}.mffw"
                save_checkpoint(ckpt_path, model, opt, done, rng, train_cfg, loss_cfg)
        if out is not None and end > start:
            ckpt_path = out / f"ckpt_{end:07d}.mffw"
            if not ckpt_path.exists():
                save_checkpoint(ckpt_path, model, opt, end, rng, train_cfg, loss_cfg)
            save_checkpoint(out / "latest.mffw", model, opt, end, rng, train_cfg, loss_cfg)
    finally:
        if log_fh is not None:
            log_fh.close()
    return TrainResult(model, history, ckpt_path)
