"""Run configuration: flat ``key = value`` files with command-line overrides.

Example file::

    # hot bath slightly warmer
    N = 32
    T_h = 0.015
    tau_ec = 40

Blank lines and ``#`` comments are ignored.  Unknown keys are rejected.
Absent keys take the defaults of :class:`RunConfig`.
"""

from __future__ import annotations

import dataclasses
import types
import typing
from dataclasses import dataclass
from pathlib import Path

from .engine import CycleConfig

__all__ = ["ConfigError", "RunConfig", "parse_config", "parse_assignments", "write_config", "CONFIG_NAME"]

CONFIG_NAME = "config.txt"
HEAT_CONVENTIONS = ("default", "literal")


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


@dataclass
class RunConfig(CycleConfig):
    """CycleConfig plus output, statistics and analysis settings."""

    output_dir: str = "run"
    n_mc: int = 100_000
    mc_guard: float = 1e-3
    heat_convention: str = "default"
    r0: float = 0.5
    pdf_bins: int = 64
    checkpoint_strokes: bool = True

    def validate(self) -> "RunConfig":
        super().validate()
        checks = [
            (self.n_mc >= 1, "n_mc >= 1"),
            (self.mc_guard >= 0, "mc_guard >= 0"),
            (self.heat_convention in HEAT_CONVENTIONS, f"heat_convention in {HEAT_CONVENTIONS}"),
            (self.r0 > 0, "r0 > 0"),
            (self.pdf_bins >= 2, "pdf_bins >= 2"),
            (bool(self.output_dir), "output_dir non-empty"),
        ]
        for ok, name in checks:
            if not ok:
                raise ValueError(f"invalid configuration: requires {name}")
        return self

    def cycle_config(self) -> CycleConfig:
        names = {f.name for f in dataclasses.fields(CycleConfig)}
        return CycleConfig(**{n: getattr(self, n) for n in names})


def _field_types() -> dict[str, typing.Any]:
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw: str, tp) -> typing.Any:
    raw = raw.strip()
    optional = typing.get_origin(tp) in (typing.Union, types.UnionType) and type(None) in typing.get_args(tp)
    if optional:
        if raw.lower() in ("none", "auto", ""):
            return None
        tp = next(a for a in typing.get_args(tp) if a is not type(None))
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            f = float(raw)
            if not f.is_integer():
                raise ValueError(raw)
            return int(f)
        if tp is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {tp.__name__}") from None


def parse_assignments(lines, source: str = "<flags>") -> dict[str, str]:
    """Split ``key = value`` lines into a dict of raw strings."""
    out = {}
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in text.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def parse_config(path=None, overrides=None) -> RunConfig:
    """Build a validated RunConfig from an optional file and overrides.

    ``overrides`` is a mapping or a list of ``"key=value"`` strings and wins
    over file values.
    """
    raw: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        raw.update(parse_assignments(p.read_text().splitlines(), str(p)))
    if overrides:
        if isinstance(overrides, dict):
            raw.update({k: str(v) for k, v in overrides.items()})
        else:
            raw.update(parse_assignments(list(overrides)))
    ftypes = _field_types()
    unknown = sorted(set(raw) - set(ftypes))
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
    values = {k: _convert(k, v, ftypes[k]) for k, v in raw.items()}
    cfg = RunConfig(**values)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def format_config(cfg: RunConfig, resolve: bool = True) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "t_lambda" and resolve:
            v = cfg.t_lambda_code
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def write_config(cfg: RunConfig, directory) -> Path:
    """Echo the resolved configuration into ``directory``; returns the file path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    path = d / CONFIG_NAME
    path.write_text(format_config(cfg))
    return path
