"""Declarative run configuration (flat JSON object).

One file drives every subcommand. Keys not listed here are rejected so that
typos surface as errors instead of silently falling back to defaults.

Scenario keys (see :class:`carryover.dgp.DgpConfig`):
    n, delta, eta, gamma, alpha_l, p0, assignment1, noise_l, noise_y,
    confounder, l_kind, seed

Run keys:
    a, a_prime        treatment paths, "1,1" or [1, 1]
    method            gformula-plugin | gformula-mc | baseline-ignore |
                      baseline-condition-l | baseline-final-arm
    k                 Monte Carlo draws per path
    sample_y          draw Y instead of averaging its fitted mean
    g_learner         t-learner | pmf
    f_learner         auto | t-learner | pmf
    l_levels          number of L1 levels when l_kind is categorical (data files)
    y_kind, y_levels  support of Y in data files (default continuous)
    epsilon           positivity threshold
    scenarios         bench: list of scenario-key overrides
    estimators        bench: list of method names
    replications      bench / sensitivity replication count
    n_grid            sensitivity sample sizes
    specs             sensitivity model specs
    z                 sensitivity rejection threshold
"""

from __future__ import annotations

import json
import os
from dataclasses import fields
from typing import Any, Mapping

from .core import ConfigError, EstimandSpec, Support, TreatmentPath
from .dgp import DgpConfig

SCENARIO_KEYS = frozenset(f.name for f in fields(DgpConfig))
RUN_KEYS = frozenset({
    "a", "a_prime", "method", "k", "sample_y", "g_learner", "f_learner", "l_levels",
    "y_kind", "y_levels", "epsilon", "scenarios", "estimators", "replications",
    "n_grid", "specs", "z",
})


def load_config(path: str | os.PathLike | None) -> dict[str, Any]:
    """Read and key-check a config file. ``None`` gives an empty config."""
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a JSON object")
    for key in data:
        if key not in SCENARIO_KEYS | RUN_KEYS:
            raise ConfigError(key, "unknown configuration key")
    return data


def scenario_from(config: Mapping[str, Any], **overrides) -> DgpConfig:
    kw = {k: v for k, v in config.items() if k in SCENARIO_KEYS}
    kw.update(overrides)
    try:
        return DgpConfig.from_mapping(kw)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def path_from(config: Mapping[str, Any], key: str, flag: str | None, default: str) -> TreatmentPath:
    raw = flag if flag is not None else config.get(key, default)
    try:
        return TreatmentPath.parse(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def estimand_from(config: Mapping[str, Any], a: str | None = None,
                  a_prime: str | None = None) -> EstimandSpec:
    return EstimandSpec(path_from(config, "a", a, "1,1"), path_from(config, "a_prime", a_prime, "0,0"))


def supports_from(config: Mapping[str, Any]) -> tuple[Support, Support]:
    """Declared supports of L1 and Y for reading data files."""
    out = []
    for var, default_kind in (("l", "categorical"), ("y", "continuous")):
        kind = config.get(f"{var}_kind", default_kind)
        levels = config.get(f"{var}_levels", 2)
        try:
            out.append(Support.categorical(levels) if kind == "categorical" else Support(kind))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{var}_kind", str(exc)) from None
    return out[0], out[1]


def int_key(config: Mapping[str, Any], key: str, default: int, minimum: int = 1) -> int:
    v = config.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}, got {v!r}")
    return v
