"""Flat ``section.key = value`` configuration files.

Grammar, one entry per line::

    # comment (also allowed after a value)
    grid.n = 129
    init.kind = bump
    init.center = 0.5, 0

Blank lines are ignored.  Keys must be known (see :data:`SCHEMA`); values are
converted to the schema type.  Booleans accept true/false/yes/no/1/0.  An
empty value means "unset" for optional entries.  List values are comma
separated; ``init.centers`` separates points with ``;``.
"""

from __future__ import annotations

import copy
from pathlib import Path

__all__ = ["SCHEMA", "ConfigError", "default_config", "parse_config", "load_config", "apply_overrides"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 2 at the command line)."""


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _points(text: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(chunk) for chunk in text.split(";") if chunk.strip())


# section -> key -> (converter, default); default None marks an optional entry
SCHEMA = {
    "experiment": {"name": (str, "run")},
    "grid": {"d": (int, 2), "L": (float, 8.0), "n": (int, 65)},
    "init": {
        "kind": (str, "maxwellian"),
        "height": (float, 1.0),
        "radius": (float, 1.0),
        "center": (_floats, (0.0,)),
        "centers": (_points, None),
        "count": (int, 2),
        "path": (str, None),
    },
    "kernel": {"gamma": (float, -1.0), "a": (float, 1.0), "c": (float, None), "cell_rule": (str, "matched")},
    "solver": {
        "t_end": (float, 0.5),
        "cfl_safety": (float, 0.4),
        "refresh_every": (int, 1),
        "record_every": (int, 1),
        "clamp_negatives": (_bool, True),
        "reaction": (str, "convolution"),
    },
    "bounds": {
        "C1": (float, 10.0),
        "C2": (float, 10.0),
        "M1": (float, None),
        "p": (float, None),
        "kappa": (float, None),
        "W0": (float, None),
    },
    "verify": {"cbar_variants": (str, "auto"), "lp_p": (float, None), "div_tol": (float, 1e-2)},
    "evolve": {"mass_tol": (float, 1e-3), "energy_tol": (float, 1e-2)},
    "counterexample": {
        "d": (int, 2),
        "p": (float, 1.0),
        "alpha": (float, 1.0),
        "t_grid": (_floats, (0.1, 0.5, 0.9, 0.99)),
        "samples": (int, 10_000),
    },
}


def default_config() -> dict:
    return {sec: {k: copy.deepcopy(v[1]) for k, v in keys.items()} for sec, keys in SCHEMA.items()}


def _set(cfg: dict, dotted: str, raw: str, where: str) -> None:
    if "." not in dotted:
        raise ConfigError(f"{where}: key {dotted!r} lacks a section prefix")
    section, key = dotted.split(".", 1)
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"{where}: unknown key {dotted!r}")
    conv, default = SCHEMA[section][key]
    raw = raw.strip()
    if raw == "":
        if default is not None:
            raise ConfigError(f"{where}: {dotted} needs a value")
        cfg[section][key] = None
        return
    try:
        cfg[section][key] = conv(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {dotted}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> dict:
    cfg = default_config()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, value = body.split("=", 1)
        _set(cfg, key.strip(), value, f"{source}:{lineno}")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def apply_overrides(cfg: dict, items) -> dict:
    """Apply ``section.key=value`` strings on top of ``cfg`` (in place)."""
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, value = item.split("=", 1)
        _set(cfg, key.strip(), value, "--set")
    return cfg
