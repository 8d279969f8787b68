"""TOML run configuration.

Example::

    [model]
    a = 5.0
    b = 5.0
    labels = ["+", "-"]
    mu = [0.7, 0.3]
    nu = [0.3, 0.7]

    [graph]
    n = 5000

    [bp]
    damping = 0.2
    tol = 1e-6

    [sweep]
    pairs = [[2, 2], [5, 5], [10, 10]]
    eps_grid = [0.1, 0.2, 0.3]
    n = 5000
    seeds = [1, 2, 3, 4, 5]

    [tree]
    depths = [2, 3, 4]
    n_trees = 10
    reps = 2000

    [rate]
    x = -0.3
    points = 201

The ``[model]`` table lists the labels once, with ``mu`` and ``nu`` as
probability lists in the same order. Alternatively ``eps = 0.3`` replaces
the three label keys with the two-label family ``mu(+) = 1/2 + eps``,
``nu(+) = 1/2 - eps``. Every other table is optional.
"""

from __future__ import annotations

import sys
from dataclasses import fields

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .bp import BPConfig
from .model import ModelParams


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(text: str) -> dict:
    return tomllib.loads(text)


def model_from_config(cfg: dict) -> ModelParams:
    try:
        m = cfg["model"]
    except KeyError:
        raise ConfigError("config has no [model] table") from None
    try:
        a, b = float(m["a"]), float(m["b"])
        if "eps" in m:
            return ModelParams.two_label(a, b, float(m["eps"]))
        return ModelParams.build(a, b, [str(l) for l in m["labels"]],
                                 [float(x) for x in m["mu"]], [float(x) for x in m["nu"]])
    except KeyError as exc:
        raise ConfigError(f"[model] is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[model]: {exc}") from exc


def bp_config_from(cfg: dict) -> BPConfig:
    section = cfg.get("bp", {})
    known = {f.name for f in fields(BPConfig)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"[bp] has unknown keys {sorted(unknown)}")
    try:
        return BPConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[bp]: {exc}") from exc


def section(cfg: dict, name: str) -> dict:
    value = cfg.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table")
    return value

