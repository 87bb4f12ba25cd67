"""Flat ``key = value`` experiment configuration with command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import get_type_hints


@dataclass(frozen=True)
class ExperimentConfig:
    # billiards
    b: float = 5.5
    a: float = 0.55
    n_x: int = 180
    n_y: int = 180
    n_eig: int = 1300
    cutoff: float = 1.5
    certify: bool = True
    # phase-space lattice
    jx_range: tuple[int, int] = (-6, 6)
    jy_range: tuple[int, int] = (1, 11)
    jk_range: tuple[int, int] = (-4, 4)
    y_origin: float = -0.5
    # dynamics
    sigma: float = 1.0
    kx_ripple: float = 6.05
    kx_square: float = 5.5
    ky: float = 0.0
    n_samples: int = 400
    span: float = 20.0
    revival_burst: bool = True
    plateau_start: float = 5.0
    force_capture: bool = True
    # entropy spectra
    family: tuple[float, ...] = (0.01, 0.05, 0.1, 0.15, 0.2)
    levels: tuple[int, int] = (100, 1200)
    window: int = 30
    berry_components: int = 128
    berry_mode: str = "real"
    seed: int = 0
    estimator: str = "mad"
    scar_threshold: float = 0.5
    # oscillator demo
    ho_level: int = 100

    @property
    def key(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _parse(value: str, typ):
    value = value.strip()
    if typ is bool:
        v = value.lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if typ in (int, float, str):
        return typ(value)
    args = getattr(typ, "__args__", ())
    if args:
        inner = args[0]
        parts = [p for p in value.replace(",", " ").split() if p]
        return tuple(_parse(p, inner) for p in parts)
    raise TypeError(f"unsupported config type {typ}")


def _types() -> dict:
    return get_type_hints(ExperimentConfig)


def parse_pairs(lines) -> dict:
    """``key = value`` lines to typed values; '#' starts a comment."""
    types = _types()
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in types:
            raise ValueError(f"line {n}: unknown key {k!r}")
        out[k] = _parse(v, types[k])
    return out


def load_config(path: str | Path | None = None, overrides: list[str] | dict | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (``key=value`` strings or a dict)."""
    values = {}
    if path is not None:
        values.update(parse_pairs(Path(path).read_text().splitlines()))
    if isinstance(overrides, dict):
        values.update(overrides)
    elif overrides:
        values.update(parse_pairs(overrides))
    return ExperimentConfig(**values)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
