"""Structural simulator for two-session experiments with carry-over.

Per unit::

    U   ~ N(0, 1)                                  (unobserved; used only if a confounder is set)
    A0  ~ Bernoulli(p0)
    L1* = alpha_l*A0 + lambda_l*U + noise_l*eps_L
    L1  = 1{L1* > c}  (categorical, c = population median of L1*)  or  L1*  (continuous)
    A1  ~ Bernoulli(assignment1(L1, A0))
    Y   = delta*A1 + eta*A0 + gamma*L1 + lambda_y*U + noise_y*eps_Y

U never enters either assignment, so sequential exchangeability holds for
every generated dataset.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, ndtr

from .core import ConfigError, Dataset, EstimandSpec, Support, TreatmentPath

L_KINDS = ("categorical", "continuous")


@dataclass(frozen=True)
class Assignment:
    """Second-session assignment probability P(A1=1 | L1, A0).

    ``kind`` is ``constant`` (``value``), ``table`` (``table[(l1, a0)]``,
    binary L1 only) or ``logistic`` (``expit(b0 + b_l*l1 + b_a0*a0)``).
    """

    kind: str = "constant"
    value: float = 0.5
    table: Mapping[tuple[int, int], float] = field(default_factory=dict)
    coef: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @classmethod
    def constant(cls, p: float) -> Assignment:
        return cls("constant", value=float(p))

    @classmethod
    def from_table(cls, table: Mapping[tuple[int, int], float]) -> Assignment:
        return cls("table", table={(int(l), int(a)): float(p) for (l, a), p in table.items()})

    @classmethod
    def logistic(cls, intercept: float, l1: float = 0.0, a0: float = 0.0) -> Assignment:
        return cls("logistic", coef=(float(intercept), float(l1), float(a0)))

    def probabilities(self) -> list[float]:
        if self.kind == "constant":
            return [self.value]
        if self.kind == "table":
            return list(self.table.values())
        return []

    def validate(self, l_kind: str) -> None:
        if self.kind not in ("constant", "table", "logistic"):
            raise ConfigError("assignment1", f"unknown assignment kind {self.kind!r}")
        for p in self.probabilities():
            if not (0.0 <= p <= 1.0):
                raise ConfigError("assignment1", f"probability {p} outside [0, 1]")
        if self.kind == "table":
            if l_kind != "categorical":
                raise ConfigError("assignment1", "a table assignment needs categorical l1")
            want = {(l, a) for l in (0, 1) for a in (0, 1)}
            if set(self.table) != want:
                raise ConfigError("assignment1", "table must give P(A1=1) for each (l1, a0) in {0,1}^2")
        if self.kind == "logistic" and not all(math.isfinite(c) for c in self.coef):
            raise ConfigError("assignment1", "logistic coefficients must be finite")

    def prob(self, l1: np.ndarray, a0: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(a0.shape[0], self.value)
        if self.kind == "table":
            lut = np.array([[self.table[(l, a)] for a in (0, 1)] for l in (0, 1)])
            return lut[l1, a0]
        b0, bl, ba = self.coef
        return expit(b0 + bl * l1 + ba * a0)

    def to_config(self) -> Any:
        if self.kind == "constant":
            return self.value
        if self.kind == "table":
            return {f"{l},{a}": p for (l, a), p in sorted(self.table.items())}
        b0, bl, ba = self.coef
        return {"logistic": {"intercept": b0, "l1": bl, "a0": ba}}

    @classmethod
    def from_config(cls, obj: Any) -> Assignment:
        if isinstance(obj, (int, float)) and not isinstance(obj, bool):
            return cls.constant(obj)
        if isinstance(obj, Mapping):
            if "logistic" in obj:
                c = obj["logistic"]
                try:
                    return cls.logistic(c.get("intercept", 0.0), c.get("l1", 0.0), c.get("a0", 0.0))
                except (AttributeError, TypeError, ValueError):
                    raise ConfigError("assignment1", "logistic needs numeric intercept/l1/a0") from None
            table = {}
            for k, p in obj.items():
                try:
                    l, a = (int(x) for x in str(k).split(","))
                    table[(l, a)] = float(p)
                except (TypeError, ValueError):
                    raise ConfigError("assignment1", f"bad table entry {k!r}: {p!r}") from None
            return cls.from_table(table)
        raise ConfigError("assignment1", f"expected a number or object, got {obj!r}")


@dataclass(frozen=True)
class Confounder:
    lambda_l: float
    lambda_y: float


@dataclass(frozen=True)
class DgpConfig:
    """Parameters of the structural model. Defaults match the noiseless
    two-effect design: only ``delta`` and ``eta`` move Y."""

    n: int = 10_000
    delta: float = 0.0
    eta: float = 0.0
    gamma: float = 0.0
    alpha_l: float = 0.0
    p0: float = 0.5
    assignment1: Assignment = field(default_factory=Assignment)
    noise_l: float = 0.0
    noise_y: float = 0.0
    confounder: Confounder | None = None
    l_kind: str = "categorical"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ConfigError("n", f"sample size must be an integer >= 1, got {self.n!r}")
        for key in ("delta", "eta", "gamma", "alpha_l", "p0", "noise_l", "noise_y"):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(key, f"expected a finite number, got {v!r}")
        if not 0.0 <= self.p0 <= 1.0:
            raise ConfigError("p0", f"must lie in [0, 1], got {self.p0}")
        for key in ("noise_l", "noise_y"):
            if getattr(self, key) < 0:
                raise ConfigError(key, "standard deviation must be >= 0")
        if self.l_kind not in L_KINDS:
            raise ConfigError("l_kind", f"must be one of {L_KINDS}, got {self.l_kind!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an integer in [0, 2**64)")
        if self.confounder is not None:
            for key in ("lambda_l", "lambda_y"):
                v = getattr(self.confounder, key)
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    raise ConfigError(f"confounder.{key}", f"expected a finite number, got {v!r}")
        self.assignment1.validate(self.l_kind)

    @property
    def positivity_violated(self) -> bool:
        return self.p0 in (0.0, 1.0) or any(p in (0.0, 1.0) for p in self.assignment1.probabilities())

    @property
    def is_null(self) -> bool:
        return self.delta == 0 and self.eta == 0 and self.gamma == 0

    @property
    def lambdas(self) -> tuple[float, float]:
        if self.confounder is None:
            return 0.0, 0.0
        return float(self.confounder.lambda_l), float(self.confounder.lambda_y)

    @property
    def l_support(self) -> Support:
        return Support.categorical(2) if self.l_kind == "categorical" else Support.continuous()

    def replace(self, **changes) -> DgpConfig:
        return dataclasses.replace(self, **changes)

    def to_mapping(self) -> dict:
        return {
            "n": int(self.n),
            "delta": self.delta,
            "eta": self.eta,
            "gamma": self.gamma,
            "alpha_l": self.alpha_l,
            "p0": self.p0,
            "assignment1": self.assignment1.to_config(),
            "noise_l": self.noise_l,
            "noise_y": self.noise_y,
            "confounder": None if self.confounder is None else dataclasses.asdict(self.confounder),
            "l_kind": self.l_kind,
            "seed": int(self.seed),
        }

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> DgpConfig:
        """Build a config from flat JSON-style keys; unknown keys are rejected."""
        known = {f.name for f in dataclasses.fields(cls)}
        kw = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            kw[key] = value
        if "assignment1" in kw:
            kw["assignment1"] = Assignment.from_config(kw["assignment1"])
        conf = kw.get("confounder")
        if conf is not None:
            if not isinstance(conf, Mapping) or set(conf) - {"lambda_l", "lambda_y"}:
                raise ConfigError("confounder", "expected {lambda_l, lambda_y} or null")
            kw["confounder"] = Confounder(conf.get("lambda_l", 0.0), conf.get("lambda_y", 0.0))
        for key in ("delta", "eta", "gamma", "alpha_l", "p0", "noise_l", "noise_y"):
            if isinstance(kw.get(key), int) and not isinstance(kw[key], bool):
                kw[key] = float(kw[key])
        return cls(**kw)


def _l_scale(config: DgpConfig) -> float:
    lam_l, _ = config.lambdas
    return math.hypot(lam_l, config.noise_l)


def l_threshold(config: DgpConfig) -> float:
    """Population median of L1*, the cut point for categorical L1.

    Without noise or confounding L1* has at most two atoms and the midpoint
    between them is used.
    """
    a, p0, s = config.alpha_l, config.p0, _l_scale(config)
    if p0 in (0.0, 1.0):
        return a * p0
    if s == 0.0:
        return a / 2.0

    def excess(c: float) -> float:
        return (1.0 - p0) * ndtr(c / s) + p0 * ndtr((c - a) / s) - 0.5

    lo, hi = min(0.0, a) - 10.0 * s, max(0.0, a) + 10.0 * s
    return float(brentq(excess, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))


def simulate(config: DgpConfig, intervention: TreatmentPath | None = None) -> Dataset:
    """Generate ``config.n`` units. Bit-deterministic given ``config.seed``.

    With ``intervention`` both treatments are forced to the given path,
    which yields draws of the potential outcome Y(a0, a1).
    """
    n = int(config.n)
    rng = np.random.default_rng(config.seed)
    # fixed draw order keeps streams aligned across configs sharing a seed
    u = rng.standard_normal(n)
    a0_u = rng.random(n)
    eps_l = rng.standard_normal(n)
    a1_u = rng.random(n)
    eps_y = rng.standard_normal(n)

    lam_l, lam_y = config.lambdas
    if intervention is None:
        a0 = (a0_u < config.p0).astype(np.int64)
    else:
        a0 = np.full(n, intervention.a0, dtype=np.int64)
    l_star = config.alpha_l * a0 + lam_l * u + config.noise_l * eps_l
    if config.l_kind == "categorical":
        l1 = (l_star > l_threshold(config)).astype(np.int64)
    else:
        l1 = l_star
    if intervention is None:
        a1 = (a1_u < config.assignment1.prob(l1 if config.l_kind == "categorical" else l_star, a0))
        a1 = a1.astype(np.int64)
    else:
        a1 = np.full(n, intervention.a1, dtype=np.int64)
    y = (config.delta * a1 + config.eta * a0 + config.gamma * l1
         + lam_y * u + config.noise_y * eps_y)
    return Dataset(a0, l1, a1, y, config.l_support, Support.continuous())


def mean_l1_under(config: DgpConfig, a0: int) -> float:
    """E[L1(a0)] when A0 is set to ``a0``."""
    mean_star = config.alpha_l * a0
    if config.l_kind == "continuous":
        return mean_star
    c = l_threshold(config)
    s = _l_scale(config)
    if s == 0.0:
        return float(mean_star > c)
    return float(ndtr((mean_star - c) / s))


def mean_potential_outcome(config: DgpConfig, path: TreatmentPath) -> float:
    return (config.delta * path.a1 + config.eta * path.a0
            + config.gamma * mean_l1_under(config, path.a0))


def true_effect(config: DgpConfig, estimand: EstimandSpec | None = None) -> float:
    """Analytic E[Y(a)] - E[Y(a')] under the structural equations."""
    estimand = estimand or EstimandSpec.default()
    if estimand.path_a == estimand.path_a_prime:
        return 0.0
    return (mean_potential_outcome(config, estimand.path_a)
            - mean_potential_outcome(config, estimand.path_a_prime))
