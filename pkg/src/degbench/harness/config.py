"""Experiment configuration read from ``key=value`` files."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from degbench.attacks import DEFAULT_EPS_GRID


class ConfigFileError(ValueError):
    pass


def _arange(start: float, stop: float, step: float) -> tuple[float, ...]:
    n = int(round((stop - start) / step)) + 1
    return tuple(float(round(start + i * step, 10)) for i in range(n))


DEFAULT_GRIDS: dict[str, tuple[float, ...]] = {
    "awgn": _arange(0.0, 1.0, 0.125),
    "awgn_color": _arange(0.0, 1.0, 0.125),
    "salt_pepper": _arange(0.0, 1.0, 0.1),
    "motion_blur": _arange(1, 31, 2),
    "gaussian_blur": _arange(3, 51, 2),
    "jpeg": _arange(30, 0, -3),
}

# Stated bounds for each grid; values outside are rejected.
GRID_BOUNDS = {
    "awgn": (0.0, 1.0), "awgn_color": (0.0, 1.0), "salt_pepper": (0.0, 1.0),
    "motion_blur": (1, 31), "gaussian_blur": (1, 51), "jpeg": (0, 100),
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "small_cnn_shallow"
    input_side: int = 32
    dataset: str = ""
    folds: int = 6
    fold: int = 0
    seeds: tuple[int, ...] = (0,)
    out: str = "runs"
    checkpoint: str = ""
    checkpoint_b: str = ""
    degradations: tuple[str, ...] = tuple(DEFAULT_GRIDS)
    grids: dict = field(default_factory=lambda: dict(DEFAULT_GRIDS))
    eps: tuple[float, ...] = DEFAULT_EPS_GRID
    # training
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    patience: int = 4
    shift: int = 0
    permute_channels: bool = False
    # synthetic generation
    per_class: int = 1200
    canvas: int = 256
    font_min: float = 30.0
    font_max: float = 240.0
    fonts_dir: str = ""
    backgrounds_dir: str = ""

    def __post_init__(self):
        unknown = set(self.degradations) - set(DEFAULT_GRIDS)
        if unknown:
            raise ConfigFileError(f"unknown degradations {sorted(unknown)}")
        for name, values in self.grids.items():
            if name not in GRID_BOUNDS:
                raise ConfigFileError(f"grid for unknown degradation {name!r}")
            lo, hi = GRID_BOUNDS[name]
            if not values:
                raise ConfigFileError(f"grid.{name} is empty")
            bad = [v for v in values if not lo <= v <= hi]
            if bad:
                raise ConfigFileError(f"grid.{name} values {bad} outside [{lo}, {hi}]")
        if any(e < 0 for e in self.eps):
            raise ConfigFileError("eps values must be >= 0")
        if self.folds < 2 or not 0 <= self.fold < self.folds:
            raise ConfigFileError(f"fold {self.fold} invalid for {self.folds} folds")

    def grid(self, name: str) -> tuple[float, ...]:
        return tuple(self.grids.get(name, DEFAULT_GRIDS[name]))

    def dumps(self) -> str:
        """Canonical text form; the config hash is taken over this."""
        lines = []
        for f in fields(self):
            if f.name == "grids":
                continue
            lines.append(f"{f.name}={_fmt(getattr(self, f.name))}")
        for name in sorted(self.grids):
            lines.append(f"grid.{name}={_fmt(self.grids[name])}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        # output location is not part of the experiment's identity
        text = "".join(l + "\n" for l in self.dumps().splitlines() if not l.startswith("out="))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(f, text: str):
    typ = f.type if isinstance(f.type, str) else f.type.__name__
    try:
        if typ == "int":
            return int(text)
        if typ == "float":
            return float(text)
        if typ == "bool":
            if text.lower() not in ("true", "false", "1", "0"):
                raise ValueError(text)
            return text.lower() in ("true", "1")
        if typ.startswith("tuple[int"):
            return tuple(int(t) for t in text.split(",") if t.strip())
        if typ.startswith("tuple[float"):
            return tuple(float(t) for t in text.split(",") if t.strip())
        if typ.startswith("tuple[str"):
            return tuple(t.strip() for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigFileError(f"{f.name}: cannot parse {text!r} as {typ}") from None
    return text


def loads(text: str) -> ExperimentConfig:
    known = {f.name: f for f in fields(ExperimentConfig)}
    kw: dict = {}
    grids = dict(DEFAULT_GRIDS)
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigFileError(f"line {n}: expected key=value, got {raw!r}")
        if key.startswith("grid."):
            name = key[5:]
            try:
                grids[name] = tuple(float(t) for t in value.split(",") if t.strip())
            except ValueError:
                raise ConfigFileError(f"line {n}: bad grid values {value!r}") from None
            continue
        if key not in known or key == "grids":
            raise ConfigFileError(f"line {n}: unknown key {key!r}")
        kw[key] = _parse(known[key], value)
    return ExperimentConfig(grids=grids, **kw)


def load(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigFileError(f"config file {path} not found")
    return loads(path.read_text())


def grid_values(cfg: ExperimentConfig, name: str) -> np.ndarray:
    return np.asarray(cfg.grid(name), dtype=np.float64)
