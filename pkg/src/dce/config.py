r"""Flat key=value experiment configuration.

One assignment per line; ``#`` starts a comment; keys mirror the CLI flags
(dashes become underscores).  Parsing is strict: unknown or duplicate keys
and malformed values raise ConfigError, and ``dump_config(load_config(s))``
reproduces every explicitly stored value.  ``gamma`` and ``pave_db`` accept
comma-separated sweep lists; a single value is the one-point sweep.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from .errors import ConfigError
from .params import NON_RECIPROCAL, RECIPROCAL, SystemParams, default_params

FORMATS = ("csv", "json")
JENSEN_VARIANTS = ("printed", "sigma-squared")

FloatSweep = Tuple[float, ...]


def _as_sweep(value: Union[float, int, FloatSweep, list]) -> FloatSweep:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),)
    return tuple(float(v) for v in value)


@dataclass
class ExperimentConfig:
    scheme: str = RECIPROCAL
    gamma: FloatSweep = (0.1,)
    pave_db: FloatSweep = (20.0,)
    pbar_t_db: float = 30.0
    pbar_l_db: float = 20.0
    n_t: int = 4
    n_l: int = 2
    n_u: int = 2
    tau_r: Optional[int] = None
    tau_f: Optional[int] = None
    trials: Optional[int] = None
    seed: int = 0
    jensen_variant: str = "printed"
    modulation: int = 64
    format: str = "csv"
    out: Optional[str] = None
    full_scale: bool = False

    def __post_init__(self):
        self.gamma = _as_sweep(self.gamma)
        self.pave_db = _as_sweep(self.pave_db)

    def validate(self) -> "ExperimentConfig":
        if self.scheme not in (RECIPROCAL, NON_RECIPROCAL):
            raise ConfigError(f"scheme must be '{RECIPROCAL}' or '{NON_RECIPROCAL}'")
        if not self.gamma or any(g <= 0 for g in self.gamma):
            raise ConfigError("gamma must be one or more positive values")
        if not self.pave_db:
            raise ConfigError("pave_db needs at least one value")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.jensen_variant not in JENSEN_VARIANTS:
            raise ConfigError(f"jensen_variant must be one of {JENSEN_VARIANTS}")
        if self.modulation not in (4, 16, 64):
            raise ConfigError("modulation must be 4, 16 or 64")
        for name in ("n_t", "n_l", "n_u"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        for name in ("tau_r", "tau_f", "trials"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be a positive integer")
        return self

    def to_params(self, pave_db: Optional[float] = None) -> SystemParams:
        """System parameters at one sweep point (the sole point by default)."""
        if pave_db is None:
            if len(self.pave_db) != 1:
                raise ValueError("pave_db sweep has several points; pick one")
            pave_db = self.pave_db[0]
        try:
            return default_params(
                p_ave_db=pave_db, p_bar_t_db=self.pbar_t_db,
                p_bar_l_db=self.pbar_l_db, n_t=self.n_t, n_l=self.n_l,
                n_u=self.n_u, tau_r=self.tau_r, tau_f=self.tau_f)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_INT_KEYS = {"n_t", "n_l", "n_u", "tau_r", "tau_f", "trials", "seed", "modulation"}
_FLOAT_KEYS = {"pbar_t_db", "pbar_l_db"}
_SWEEP_KEYS = {"gamma", "pave_db"}
_BOOL_KEYS = {"full_scale"}


def parse_float_list(key: str, raw: str) -> FloatSweep:
    """Comma-separated floats -> tuple; empty input is a ConfigError."""
    try:
        values = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    if not values:
        raise ConfigError(f"{key} given but empty")
    return values


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key in _SWEEP_KEYS:
        return parse_float_list(key, raw)
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def load_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return ExperimentConfig(**values).validate()


def load_config_file(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for field in dataclasses.fields(ExperimentConfig):
        value = getattr(cfg, field.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{field.name}={value}")
    return "\n".join(lines) + "\n"
