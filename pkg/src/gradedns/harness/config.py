"""Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored.  Numbers accept fractions and
multiples of pi (``1/16``, ``-pi``, ``2*pi``, ``pi/2``); lists are
comma-separated.  Unknown keys are errors.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from pathlib import Path

from .studies import ExperimentConfig


class ConfigError(ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


_PI = re.compile(r"^([+-]?)([0-9.]*)\s*\*?\s*pi\s*(?:/\s*([0-9.]+))?$")


def parse_number(text: str) -> float:
    s = text.strip().lower()
    m = _PI.match(s)
    if m:
        sign, mult, div = m.groups()
        value = (float(mult) if mult else 1.0) * math.pi / (float(div) if div else 1.0)
        return -value if sign == "-" else value
    try:
        return float(Fraction(s))
    except (ValueError, ZeroDivisionError):
        pass
    return float(s)


def _number_list(text):
    return tuple(parse_number(v) for v in text.split(",") if v.strip())


def _int_list(text):
    out = []
    for v in text.split(","):
        if v.strip():
            x = parse_number(v)
            if x != int(x):
                raise ValueError(f"{v.strip()!r} is not an integer")
            out.append(int(x))
    return tuple(out)


def _bool(text):
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _unwrap(values):
    return values[0] if len(values) == 1 else values


# key -> (ExperimentConfig field, parser)
KEYS = {
    "domain.xmin": ("domain", 0),
    "domain.xmax": ("domain", 1),
    "domain.ymin": ("domain", 2),
    "domain.ymax": ("domain", 3),
    "mesh.n": ("mesh_n", lambda s: _unwrap(_int_list(s))),
    "nu": ("nu", parse_number),
    "T": ("T", parse_number),
    "tau": ("tau", lambda s: _unwrap(_number_list(s))),
    "alpha": ("alpha", parse_number),
    "init": ("init", str.strip),
    "gamma": ("gamma", parse_number),
    "eps": ("eps", parse_number),
    "ref.tau": ("ref_tau", parse_number),
    "ref.refines": ("ref_refines", lambda s: _int_list(s)[0]),
    "ref.exact": ("ref_exact", _bool),
    "convection": ("convection", _bool),
    "snapshots": ("snapshots", _number_list),
    "out.dir": ("out_dir", str.strip),
}


def parse_pairs(pairs, base: dict | None = None) -> dict:
    """Turn ``(key, value)`` strings into ExperimentConfig keyword arguments."""
    kw = dict(base or {})
    domain = list(kw.pop("domain", ExperimentConfig.domain))
    for key, value in pairs:
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}", key)
        target, parser = KEYS[key]
        try:
            if target == "domain":
                domain[parser] = parse_number(value)
            else:
                kw[target] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", key) from exc
    kw["domain"] = tuple(domain)
    return kw


def read_pairs(text: str):
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        pairs.append((key, value))
    return pairs


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read a config file (optional) and apply ``key=value`` overrides."""
    pairs = read_pairs(Path(path).read_text()) if path is not None else []
    pairs += list(overrides)
    kw = parse_pairs(pairs)
    try:
        return ExperimentConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(config: ExperimentConfig) -> str:
    """Manifest text that :func:`load_config` reads back to the same config."""
    lines = []
    for key, (target, index) in KEYS.items():
        value = getattr(config, target)
        if target == "domain":
            value = value[index]
        if value is None or (target == "snapshots" and not value):
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, tuple):
            text = ", ".join(repr(v) for v in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
