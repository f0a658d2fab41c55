"""Flat key=value run configuration with typed parsing and exact round-trips.

Floats are printed with repr so parse(format(cfg)) == cfg bit-for-bit; the
ensemble weights are one comma-separated triple.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import FormatError


@dataclass
class RunConfig:
    phi: float = 0.0
    alpha: float = 1.2
    beta: float = 1.1
    gamma: float = 1.15
    tau: float = 0.15
    base_depth: int = 2
    base_width: int = 8
    base_resolution: int = 64
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 0.05
    seed: int = 1
    n_bonafide: int = 128
    n_morphed: int = 128
    ensemble_weights: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    corpus_dir: str = "corpus"
    checkpoint: str = "model.ckpt"
    output_dir: str = "out"


_KINDS: dict[str, str] = {}
for field in fields(RunConfig):
    if field.name == "ensemble_weights":
        _KINDS[field.name] = "weights"
    elif field.type in ("int", int):
        _KINDS[field.name] = "int"
    elif field.type in ("float", float):
        _KINDS[field.name] = "float"
    else:
        _KINDS[field.name] = "str"

CONFIG_KEYS = tuple(_KINDS)


def parse_value(key: str, raw: str):
    """Parse one config value by its key's type; raises FormatError."""
    if key not in _KINDS:
        raise FormatError(f"unknown config key {key!r}")
    kind = _KINDS[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "weights":
            parts = [p.strip() for p in raw.split(",")]
            if len(parts) != 3:
                raise ValueError(f"need 3 comma-separated values, got {len(parts)}")
            return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise FormatError(f"bad value for {key}: {exc}") from None
    return raw


def _format_value(key: str, value) -> str:
    kind = _KINDS[key]
    if kind == "float":
        return repr(value)
    if kind == "weights":
        return ",".join(repr(float(w)) for w in value)
    return str(value)


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply key=value lines (blank lines and # comments ignored) to defaults."""
    cfg = RunConfig(**vars(base)) if base is not None else RunConfig()
    for line_no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(f"config line {line_no} is not key=value: {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        setattr(cfg, key, parse_value(key, raw.strip()))
    return cfg


def format_config(cfg: RunConfig) -> str:
    return "\n".join(f"{key}={_format_value(key, getattr(cfg, key))}" for key in CONFIG_KEYS) + "\n"


def load_config(path) -> RunConfig:
    target = Path(path)
    if not target.is_file():
        raise FormatError(f"config file not found: {target}")
    return parse_config(target.read_text(encoding="ascii"))
