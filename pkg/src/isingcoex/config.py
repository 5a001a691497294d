"""Run configuration: INI files with dotted section names, JSON-literal values.

A file such as::

    [lattice]
    kind = TriTimesZ
    n = 1

    [hybrid.grid]
    p = [0.2, 0.5, 0.8]

flattens to ``{"lattice.kind": "TriTimesZ", "lattice.n": 1, "hybrid.grid.p": [...]}``.
Every key must appear in :data:`SCHEMA`; anything else is a :class:`ConfigError`.
"""

from __future__ import annotations

import configparser
import json
import os
from typing import Any, Callable, Mapping

SEED_ENV = "ISINGCOEX_SEED"


class ConfigError(ValueError):
    pass


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}")
    return v


def _nonneg_int(v):
    v = _int(v)
    if v < 0:
        raise ConfigError(f"expected a nonnegative integer, got {v}")
    return v


def _pos_int(v):
    v = _int(v)
    if v <= 0:
        raise ConfigError(f"expected a positive integer, got {v}")
    return v


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"expected a number, got {v!r}")
    return float(v)


def _prob(v):
    v = _float(v)
    if not 0.0 <= v <= 1.0:
        raise ConfigError(f"expected a value in [0, 1], got {v}")
    return v


def _nonneg(v):
    v = _float(v)
    if v < 0:
        raise ConfigError(f"expected a nonnegative number, got {v}")
    return v


def _list_of(item: Callable) -> Callable:
    def check(v):
        if not isinstance(v, list):
            raise ConfigError(f"expected a list, got {v!r}")
        return [item(x) for x in v]

    return check


def _triple(v):
    v = _list_of(_int)(v)
    if len(v) != 3:
        raise ConfigError(f"expected an integer triple, got {v!r}")
    return v


def _optional(check: Callable) -> Callable:
    return lambda v: None if v is None else check(v)


def _choice(*options) -> Callable:
    def check(v):
        if v not in options:
            raise ConfigError(f"expected one of {list(options)}, got {v!r}")
        return v

    return check


def _bool(v):
    if not isinstance(v, bool):
        raise ConfigError(f"expected true or false, got {v!r}")
    return v


def _str(v):
    if not isinstance(v, str):
        raise ConfigError(f"expected a string, got {v!r}")
    return v


LATTICES = ("TriTimesZ", "TriTimesK2", "Tri3D", "ZStar2D")

# key -> (default, validator)
SCHEMA: dict[str, tuple[Any, Callable]] = {
    "run.seed": (None, _optional(_nonneg_int)),
    "run.out": ("runs", _str),
    "run.workers": (1, _pos_int),
    "lattice.kind": ("TriTimesZ", _choice(*LATTICES)),
    "lattice.n": (1, _nonneg_int),
    "lattice.center": ([0, 0, 0], _triple),
    "lattice.offsets": (None, _optional(_list_of(_triple))),
    "lattice.layers": (None, _optional(_list_of(_int))),
    "measure.beta": (0.1, _nonneg),
    "measure.h": (0.0, _float),
    "measure.bc": ("free", _choice("free", "plus", "minus")),
    "event.kind": ("lr_crossing", _choice("lr_crossing", "connection")),
    "event.n": (None, _optional(_nonneg_int)),
    "event.layers": ([0], _list_of(_int)),
    "event.origin": ([0, 0, 0], _triple),
    "hybrid.p": (0.5, _prob),
    "hybrid.h": (None, _optional(_float)),
    "hybrid.mask_cap": (10, _pos_int),
    "hybrid.grid.p": (None, _optional(_list_of(_prob))),
    "hybrid.grid.h": (None, _optional(_list_of(_float))),
    "mc.p": (0.0, _prob),
    "mc.samples": (1000, _pos_int),
    "mc.sweeps": (None, _optional(_nonneg_int)),
    "mc.sweeps_between": (10, _pos_int),
    "mc.sampler": ("heatbath", _choice("heatbath", "cluster")),
    "mc.stream": (0, _nonneg_int),
    "mc.records": (True, _bool),
    "sweep.kind": ("coexistence", _choice("coexistence", "hc", "phenomenology", "binder", "mixing")),
    "sweep.n_list": ([8, 16], _list_of(_pos_int)),
    "sweep.h_grid": ([-0.3, -0.25, -0.2, -0.15, -0.1, -0.05, 0.0], _list_of(_float)),
    "sweep.beta_grid": ([0.1, 0.2, 0.3], _list_of(_nonneg)),
    "sweep.samples": (400, _pos_int),
    "sweep.threshold": (0.2, _prob),
    "sweep.both_span_min": (0.9, _prob),
    "sweep.mixing_length": (12, _pos_int),
    "verify.check": ("all", _str),
    "verify.instances": (None, _optional(_pos_int)),
    "plot.kind": ("crossing", _choice("crossing", "gamma", "mixing")),
    "plot.input": (None, _optional(_str)),
}


def defaults() -> dict[str, Any]:
    return {k: v[0] for k, v in SCHEMA.items()}


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def validate(values: Mapping[str, Any]) -> dict[str, Any]:
    out = {}
    for key, v in values.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = SCHEMA[key][1](v)
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    return out


def parse_text(text: str, source: str = "<string>") -> dict[str, Any]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if cp.defaults():
        raise ConfigError(f"{source}: keys outside a section are not allowed")
    flat = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            flat[f"{section}.{key}"] = _parse_value(raw)
    return validate(flat)


def load(path: str | os.PathLike | None) -> dict[str, Any]:
    """Defaults overlaid with the file at ``path`` (if given)."""
    cfg = defaults()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg.update(parse_text(text, str(path)))
    return cfg


def overlay(cfg: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Apply flag values; ``None`` means the flag was not given."""
    out = dict(cfg)
    out.update(validate({k: v for k, v in overrides.items() if v is not None}))
    return out


def resolve_seed(cfg: Mapping[str, Any], env: Mapping[str, str] | None = None) -> tuple[int, str]:
    """Seed and where it came from: config/flag, then the environment, then 0."""
    env = os.environ if env is None else env
    if cfg.get("run.seed") is not None:
        return int(cfg["run.seed"]), "config"
    raw = env.get(SEED_ENV)
    if raw not in (None, ""):
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None
        if seed < 0:
            raise ConfigError(f"{SEED_ENV} must be nonnegative")
        return seed, "env"
    return 0, "default"


def dump(cfg: Mapping[str, Any]) -> str:
    """INI text that :func:`parse_text` maps back to ``cfg``."""
    sections: dict[str, list[tuple[str, Any]]] = {}
    for key in sorted(cfg):
        section, _, name = key.rpartition(".")
        sections.setdefault(section, []).append((name, cfg[key]))
    lines = []
    for section, items in sections.items():
        lines.append(f"[{section}]")
        lines.extend(f"{name} = {json.dumps(v)}" for name, v in items)
        lines.append("")
    return "\n".join(lines)
