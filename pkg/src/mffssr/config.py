"""Configuration dataclasses, ablation presets and the INI-style config file."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import ConfigError

FFN_KINDS = ("irf", "simple_ffn")
CROSS_MODULES = ("cvim", "scam", "none")

# (num_blocks, channels) per upscaling factor
SCALE_DEFAULTS = {2: (16, 64), 4: (24, 48)}


@dataclass(frozen=True)
class ModelConfig:
    scale: int = 4
    num_blocks: int = 24
    channels: int = 48
    theta: float = 0.75
    # C_e = mfef_expansion * channels; see README "Channel bookkeeping" for the defaults
    mfef_expansion: int = 1
    irf_expansion: int = 4
    lka_dilation: int = 3
    use_lka: bool = True
    use_repconv: bool = True
    ffn_kind: str = "irf"
    cross_module: str = "cvim"
    # True: kappa's intra branch is t * CA(t), with CA(t) = t * pconv(avg(t)).
    # False: the intra branch is CA(t) alone.
    ca_literal: bool = True

    def __post_init__(self):
        self.validate()

    @classmethod
    def for_scale(cls, scale: int, **overrides) -> "ModelConfig":
        if scale not in SCALE_DEFAULTS:
            raise ConfigError(f"unsupported scale {scale}; expected one of {sorted(SCALE_DEFAULTS)}")
        n, c = SCALE_DEFAULTS[scale]
        kw = dict(scale=scale, num_blocks=n, channels=c)
        kw.update(overrides)
        return cls(**kw)

    @property
    def expanded_channels(self) -> int:
        return self.mfef_expansion * self.channels

    @property
    def intra_channels(self) -> int:
        """Channels of X1, the branch fed to RepConv."""
        return int(Fraction(self.theta).limit_denominator(1 << 16) * self.expanded_channels)

    @property
    def cross_channels(self) -> int:
        """Channels of X2, the branch fed to the cross-view module."""
        return self.expanded_channels - self.intra_channels

    def validate(self) -> None:
        if self.scale not in SCALE_DEFAULTS:
            raise ConfigError(f"unsupported scale {self.scale}; expected one of {sorted(SCALE_DEFAULTS)}")
        if self.num_blocks < 0:
            raise ConfigError("num_blocks must be >= 0")
        if self.channels < 4:
            raise ConfigError("channels must be >= 4")
        if not 0 < self.theta < 1:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if self.mfef_expansion < 1 or self.irf_expansion < 1 or self.lka_dilation < 1:
            raise ConfigError("expansion factors and dilation must be positive integers")
        split = Fraction(self.theta).limit_denominator(1 << 16) * self.expanded_channels
        if split.denominator != 1 or split <= 0 or split >= self.expanded_channels:
            raise ConfigError(
                f"theta={self.theta} does not split {self.expanded_channels} channels into two "
                "positive integer parts"
            )
        if (self.irf_expansion * self.channels) % 2:
            raise ConfigError("irf_expansion * channels must be even for the gate")
        if self.ffn_kind not in FFN_KINDS:
            raise ConfigError(f"ffn_kind must be one of {FFN_KINDS}, got {self.ffn_kind!r}")
        if self.cross_module not in CROSS_MODULES:
            raise ConfigError(f"cross_module must be one of {CROSS_MODULES}, got {self.cross_module!r}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.01
    epsilon: float = 1e-3

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 5e-4
    lr_min: float = 1e-7
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.0
    total_iters: int = 200_000
    batch_size: int = 4
    seed: int = 0
    checkpoint_every: int = 5000
    eval_every: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be > 0")
        if self.total_iters < 1 or self.batch_size < 1:
            raise ConfigError("total_iters and batch_size must be >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")


@dataclass(frozen=True)
class DataConfig:
    root: str = "data"
    split: str = "train"
    eval_split: str = "test"
    patch_h: int = 30
    patch_w: int = 90
    hflip: bool = True
    vflip: bool = True
    rot180: bool = True
    rot90: bool = False
    channel_shuffle: bool = True
    border_crop: int = 0


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    loss: LossConfig = field(default_factory=LossConfig)


# Ablation presets: name -> overrides applied on top of a base ModelConfig.
ABLATIONS: dict[str, dict[str, Any]] = {
    "full": {},
    "net-a": {"use_lka": False},
    "net-b": {"use_repconv": False},
    "net-c": {"use_lka": False, "use_repconv": False},
    "net-d": {"ffn_kind": "simple_ffn"},
    "theta-0.25": {"theta": 0.25},
    "theta-0.5": {"theta": 0.5},
    "theta-0.75": {"theta": 0.75},
    "theta-0.875": {"theta": 0.875},
    "scam": {"cross_module": "scam"},
}


def ablation_config(name: str, base: ModelConfig | None = None) -> ModelConfig:
    """Return ``base`` (default: the x4 model) with the named ablation applied."""
    key = name.lower()
    if key not in ABLATIONS:
        raise ConfigError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
    base = base if base is not None else ModelConfig.for_scale(4)
    return replace(base, **ABLATIONS[key])


_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _coerce(value: str, target_type: Any) -> Any:
    target = target_type if isinstance(target_type, type) else _TYPES[target_type]
    if target is bool:
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        return target(value.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse {value!r} as {target.__name__}") from exc


def _build(cls, section: dict[str, str], base: dict[str, Any] | None = None):
    known = {f.name: f.type for f in fields(cls)}
    kw = dict(base or {})
    for key, raw in section.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} for [{cls.__name__}]")
        kw[key] = _coerce(raw, known[key])
    return cls(**kw)


def parse_config_text(text: str, overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse ``[model] [train] [data] [loss]`` key = value text.

    ``overrides`` maps ``section.key`` to a raw string value and wins over
    the file. Model defaults follow the configured scale unless
    ``num_blocks``/``channels`` are set explicitly.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    sections: dict[str, dict[str, str]] = {s: {} for s in ("model", "train", "data", "loss")}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        sections[name].update(parser[name])
    for dotted, raw in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if sec not in sections or not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        sections[sec][key] = raw

    model_sec = dict(sections["model"])
    scale = _coerce(model_sec.pop("scale", "4"), int)
    if scale not in SCALE_DEFAULTS:
        raise ConfigError(f"unsupported scale {scale}")
    n, c = SCALE_DEFAULTS[scale]
    model = _build(ModelConfig, model_sec, {"scale": scale, "num_blocks": n, "channels": c})
    return RunConfig(
        model=model,
        train=_build(TrainConfig, sections["train"]),
        data=_build(DataConfig, sections["data"]),
        loss=_build(LossConfig, sections["loss"]),
    )


def load_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    text = ""
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        text = p.read_text(encoding="utf-8")
    return parse_config_text(text, overrides)


def dump_config(cfg: RunConfig) -> str:
    out = []
    for name in ("model", "train", "data", "loss"):
        out.append(f"[{name}]")
        for k, v in dataclasses.asdict(getattr(cfg, name)).items():
            out.append(f"{k} = {str(v).lower() if isinstance(v, bool) else v}")
        out.append("")
    return "\n".join(out)
