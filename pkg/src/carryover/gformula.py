"""G-formula estimation of mean potential outcomes and path contrasts.

For a treatment path (a0, a1) the target is

    E[Y(a0, a1)] = sum_l E[Y | L1=l, A0=a0, A1=a1] * P[L1=l | A0=a0]

evaluated either exactly over a finite L1 support (plug-in) or by Monte
Carlo: draw l ~ f(L1 | a0) K times and average the fitted outcome mean
g(l, a0, a1) over the draws.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, EstimandSpec, TreatmentPath
from .learners import (
    ConditionalModel,
    CovariateKey,
    PmfTable,
    StratifiedGaussian,
    fit_pmf,
    fit_t_learner,
)

DEFAULT_K = 1000
G_SIGNATURE = ("l1", "a0", "a1")
F_SIGNATURE = ("a0",)


@dataclass(frozen=True)
class PotentialOutcomeEstimate:
    path: TreatmentPath
    value: float
    method: str
    k: int | None = None
    mc_std_error: float | None = None

    def __post_init__(self):
        if self.method == "mc":
            if self.k is None or self.k < 1:
                raise ValueError("Monte Carlo estimates need k >= 1")
            if (self.mc_std_error is not None) != (self.k >= 2):
                raise ValueError("mc_std_error is present exactly when k >= 2")

    def to_dict(self) -> dict:
        return {
            "path": self.path.as_list(),
            "value": self.value,
            "method": self.method,
            "k": self.k,
            "mc_std_error": self.mc_std_error,
        }


@dataclass(frozen=True)
class EffectEstimate:
    """Estimated contrast ``tau_hat = per_path[0].value - per_path[1].value``."""

    estimand: EstimandSpec
    tau_hat: float
    per_path: tuple[PotentialOutcomeEstimate, PotentialOutcomeEstimate]
    method: str
    k: int | None = None
    seed: int | None = None
    warnings: tuple[str, ...] = ()
    note: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def mc_std_error(self) -> float | None:
        """Combined Monte Carlo standard error of ``tau_hat`` (independent paths)."""
        ses = [p.mc_std_error for p in self.per_path]
        if any(s is None for s in ses):
            return None
        return math.sqrt(ses[0] ** 2 + ses[1] ** 2)

    def to_dict(self) -> dict:
        d = {
            "estimand": self.estimand.to_dict(),
            "tau_hat": self.tau_hat,
            "method": self.method,
            "k": self.k,
            "mc_std_error": self.mc_std_error,
            "per_path": [p.to_dict() for p in self.per_path],
            "seed": self.seed,
            "warnings": list(self.warnings),
        }
        if self.note:
            d["note"] = self.note
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _contrast(estimand: EstimandSpec, est_a: PotentialOutcomeEstimate,
              est_b: PotentialOutcomeEstimate, **kw) -> EffectEstimate:
    return EffectEstimate(estimand, est_a.value - est_b.value, (est_a, est_b), **kw)


def fit_g_models(
    dataset: Dataset, g_learner: str = "t-learner", f_learner: str = "auto"
) -> tuple[ConditionalModel, ConditionalModel]:
    """Fit the outcome model g(Y | L1, A0, A1) and intermediate model f(L1 | A0).

    ``f_learner="auto"`` picks the PMF table for categorical L1 and the
    T-learner otherwise.
    """
    if f_learner == "auto":
        f_learner = "pmf" if dataset.l_support.is_categorical else "t-learner"
    fitters = {"pmf": fit_pmf, "t-learner": fit_t_learner}
    for name, choice in (("g_learner", g_learner), ("f_learner", f_learner)):
        if choice not in fitters:
            raise ValueError(f"{name} must be one of {sorted(fitters)}, got {choice!r}")
    g = fitters[g_learner](dataset, "y", G_SIGNATURE)
    f = fitters[f_learner](dataset, "l1", F_SIGNATURE)
    return g, f


def estimate_potential_outcome_plugin(
    g_model: ConditionalModel, f_model: ConditionalModel, path: TreatmentPath
) -> PotentialOutcomeEstimate:
    """Exact weighted sum over the finite support of L1."""
    if not isinstance(f_model, PmfTable):
        raise ValueError("plug-in sum unavailable for continuous l1; use Monte Carlo")
    probs = f_model.prob(CovariateKey(a0=path.a0))
    total = 0.0
    for level, p in enumerate(probs):
        if p > 0.0:
            total += p * g_model.predict_mean(CovariateKey(a0=path.a0, a1=path.a1, l1=level))
    return PotentialOutcomeEstimate(path, float(total), "plugin")


def _mean(values: np.ndarray) -> float:
    first = values[0]
    if np.all(values == first):
        return float(first)
    return math.fsum(values.tolist()) / values.shape[0]


def _sample_y(g_model: ConditionalModel, path: TreatmentPath, draws: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    key = CovariateKey(a0=path.a0, a1=path.a1)
    if isinstance(g_model, StratifiedGaussian):
        return g_model.sample_at_levels(key, draws, rng)
    out = np.empty(draws.shape[0], dtype=np.float64)
    for lv in np.unique(draws):
        sel = draws == lv
        k = CovariateKey(a0=path.a0, a1=path.a1, l1=lv.item())
        out[sel] = g_model.sample(k, rng, size=int(sel.sum()))
    return out


def estimate_potential_outcome_mc(
    g_model: ConditionalModel,
    f_model: ConditionalModel,
    path: TreatmentPath,
    k: int = DEFAULT_K,
    rng: np.random.Generator | int | None = None,
    sample_y: bool = False,
) -> PotentialOutcomeEstimate:
    """Monte Carlo G-computation with ``k`` draws of the intermediate outcome.

    By default each draw contributes the fitted conditional mean of Y; with
    ``sample_y=True`` a Y value is drawn from g's predictive distribution
    instead. Both have the same expectation.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    rng = np.random.default_rng(rng)
    draws = f_model.sample(CovariateKey(a0=path.a0), rng, size=k)
    if sample_y:
        values = _sample_y(g_model, path, draws, rng)
    else:
        values = g_model.mean_at_levels(CovariateKey(a0=path.a0, a1=path.a1), draws)
    value = _mean(values)
    se = None
    if k >= 2:
        se = 0.0 if np.all(values == values[0]) else float(np.std(values, ddof=1) / math.sqrt(k))
    return PotentialOutcomeEstimate(path, value, "mc", k, se)


def _spawn(rng, count: int) -> list[np.random.Generator]:
    if isinstance(rng, np.random.Generator):
        return rng.spawn(count)
    return [np.random.default_rng(s) for s in np.random.SeedSequence(rng).spawn(count)]


def estimate_effect(
    dataset: Dataset,
    estimand: EstimandSpec,
    method: str = "mc",
    k: int = DEFAULT_K,
    rng: np.random.Generator | int | None = None,
    *,
    g_learner: str = "t-learner",
    f_learner: str = "auto",
    sample_y: bool = False,
) -> EffectEstimate:
    """Fit g and f once, evaluate both paths, and return their contrast.

    Args:
        dataset: observed units.
        estimand: the two treatment paths to contrast.
        method: ``"plugin"`` (categorical L1 only) or ``"mc"``.
        k: Monte Carlo draws per path.
        rng: seed or generator. Each path gets an independent child stream.
    """
    g, f = fit_g_models(dataset, g_learner, f_learner)
    warnings = g.warnings + f.warnings
    paths = (estimand.path_a, estimand.path_a_prime)
    if method == "plugin":
        ests = [estimate_potential_outcome_plugin(g, f, p) for p in paths]
        return _contrast(estimand, *ests, method="gformula-plugin", warnings=warnings)
    if method != "mc":
        raise ValueError(f"method must be 'plugin' or 'mc', got {method!r}")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    streams = _spawn(rng, 2)
    ests = [
        estimate_potential_outcome_mc(g, f, p, k, s, sample_y=sample_y)
        for p, s in zip(paths, streams)
    ]
    return _contrast(estimand, *ests, method="gformula-mc", k=k,
                     seed=None if seed is None else int(seed), warnings=warnings)
