"""Flat ``key = value`` experiment configs.

Lines are ``key = value``; ``#`` starts a comment. Lists and points are
comma-separated. Unknown keys, malformed values and duplicate keys are
errors that carry line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .geometry import GeometryError, parse_domain


class ConfigError(ValueError):
    pass


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _floats(s):
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _boost(s):
    s = s.strip()
    if s in ("auto", "none"):
        return s
    return str(_float(s))


def _mode(s):
    s = s.strip()
    if s not in ("grid", "jump-adapted"):
        raise ValueError("scheme must be grid or jump-adapted")
    return s


def _text(s):
    s = s.strip()
    if not s:
        raise ValueError("empty value")
    return s


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    alpha: float
    domain: str
    d: int = 2
    x: tuple = ()
    y: tuple = ()
    scheme: str = "jump-adapted"
    h: float = 0.0  # 0 selects the experiment default
    eps_j: float = 0.0
    horizon: float = 0.0
    n: int = 0
    steps: int = 20
    boost: str = "auto"
    t: tuple = ()
    eps: tuple = ()
    delta: tuple = ()
    pairs: int = 0
    scale: float = 2.0
    points: int = 1000
    quad_target: float = 1e-3
    k_sigma: float = 3.0
    max_ratio: float = 0.0
    min_growth: float = 0.0
    slope_tol: float = 0.15
    residual_tol: float = 0.01
    band: float = 2.0
    p_min: float = 0.01
    cells: int = 32
    fit_below: float = 1e-3
    min_delta: float = 0.1
    min_dist: float = 0.2
    max_steps: int = 512
    out: str = ""
    source_lines: dict = field(default_factory=dict, compare=False)

    def law(self):
        from .stable import StableLaw

        return StableLaw(self.d, self.alpha)

    def make_domain(self):
        return parse_domain(self.domain, self.d)


REQUIRED = ("experiment", "seed", "alpha", "domain")

PARSERS = {
    "experiment": _text,
    "seed": _int,
    "alpha": _float,
    "domain": _text,
    "d": _int,
    "x": _floats,
    "y": _floats,
    "scheme": _mode,
    "h": _float,
    "eps_j": _float,
    "horizon": _float,
    "n": _int,
    "steps": _int,
    "boost": _boost,
    "t": _floats,
    "eps": _floats,
    "delta": _floats,
    "pairs": _int,
    "scale": _float,
    "points": _int,
    "quad_target": _float,
    "k_sigma": _float,
    "max_ratio": _float,
    "min_growth": _float,
    "slope_tol": _float,
    "residual_tol": _float,
    "band": _float,
    "p_min": _float,
    "cells": _int,
    "fit_below": _float,
    "min_delta": _float,
    "min_dist": _float,
    "max_steps": _int,
    "out": _text,
}


def parse_config(text):
    """ExperimentConfig from key = value text, with defaults filled in."""
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value'")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in PARSERS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        if key in lines:
            raise ConfigError(f"line {no}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = PARSERS[key](val)
        except ValueError as e:
            raise ConfigError(f"line {no}: malformed value for {key!r}: {val!r} ({e})") from None
        lines[key] = no
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    alpha = values["alpha"]
    if not 0 < alpha < 2:
        raise ConfigError(f"line {lines['alpha']}: alpha outside (0,2)")
    if "d" in values and values["d"] < 1:
        raise ConfigError(f"line {lines['d']}: d must be at least 1")
    try:
        dom = parse_domain(values["domain"], values.get("d"))
    except GeometryError as e:
        raise ConfigError(f"line {lines['domain']}: {e}") from None
    values["d"] = dom.d
    cfg = ExperimentConfig(**values, source_lines=lines)
    for key in ("x", "y"):
        pt = getattr(cfg, key)
        if pt and len(pt) != cfg.d:
            raise ConfigError(f"line {lines[key]}: {key} must have {cfg.d} coordinates")
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(repr(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def config_text(cfg):
    """Effective config as key = value lines (every key, defaults included)."""
    out = []
    for f in fields(cfg):
        if f.name == "source_lines":
            continue
        v = getattr(cfg, f.name)
        if v == () or v == "":
            continue
        out.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(out) + "\n"
