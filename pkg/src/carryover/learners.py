"""Conditional outcome models plugged into the G-formula.

Two forms are provided:

* :class:`PmfTable` -- empirical probability mass function of a categorical
  outcome within each covariate stratum.
* :class:`StratifiedGaussian` -- the T-learner: one independent least-squares
  regression per treatment arm on the remaining covariate, with a Gaussian
  predictive distribution whose variance is the in-arm mean squared residual.

Empty strata are never smoothed over. Querying one raises
:class:`~carryover.core.PositivityError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Dataset, PositivityError, Support

COVARIATES = ("l1", "a0", "a1")
TREATMENTS = ("a0", "a1")


@dataclass(frozen=True)
class CovariateKey:
    """Values of the conditioning covariates. Absent fields are ``None``."""

    a0: int
    a1: int | None = None
    l1: int | float | None = None

    def project(self, signature: Sequence[str]) -> tuple:
        out = []
        for name in signature:
            v = getattr(self, name)
            if v is None:
                raise ValueError(f"covariate key lacks {name!r} required by signature {tuple(signature)}")
            out.append(v)
        return tuple(out)


def _normalize_signature(signature: Iterable[str]) -> tuple[str, ...]:
    sig = tuple(signature)
    unknown = [s for s in sig if s not in COVARIATES]
    if unknown:
        raise ValueError(f"unknown covariate(s) in signature: {unknown}")
    if len(set(sig)) != len(sig):
        raise ValueError(f"duplicate covariate in signature {sig}")
    return tuple(c for c in COVARIATES if c in sig)


def _check_outcome(outcome: str, signature: tuple[str, ...]) -> None:
    if outcome not in ("l1", "y"):
        raise ValueError(f"outcome must be 'l1' or 'y', got {outcome!r}")
    if outcome in signature:
        raise ValueError(f"outcome {outcome!r} cannot also be a covariate")


def _fmean(values: np.ndarray) -> float:
    # exactly rounded summation makes the fit independent of row order
    return math.fsum(values.tolist()) / values.shape[0]


class ConditionalModel:
    """Common surface of the fitted conditional models."""

    form: str = ""

    def __init__(self, outcome: str, signature: tuple[str, ...], outcome_support: Support,
                 warnings: Sequence[str] = ()):
        self.outcome = outcome
        self.signature = signature
        self.outcome_support = outcome_support
        self.warnings = tuple(warnings)

    def _stratum_desc(self, key: CovariateKey) -> dict:
        return {name: getattr(key, name) for name in self.signature}

    def predict_mean(self, key: CovariateKey) -> float:
        raise NotImplementedError

    def sample(self, key: CovariateKey, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def mean_at_levels(self, key: CovariateKey, l_values: np.ndarray) -> np.ndarray:
        """Conditional means at ``key`` with ``l1`` replaced by each of ``l_values``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class PmfTable(ConditionalModel):
    """Empirical PMF of a categorical outcome per covariate stratum."""

    form = "pmf"

    def __init__(self, outcome, signature, outcome_support, table: dict[tuple, np.ndarray],
                 counts: dict[tuple, int] | None = None, warnings=()):
        super().__init__(outcome, signature, outcome_support, warnings)
        self.table = {k: np.asarray(v, dtype=np.float64) for k, v in table.items()}
        self.counts = dict(counts or {})
        self._codes = np.arange(outcome_support.levels, dtype=np.float64)

    def prob(self, key: CovariateKey) -> np.ndarray:
        k = tuple(int(v) for v in key.project(self.signature))
        try:
            return self.table[k]
        except KeyError:
            raise PositivityError(self._stratum_desc(key), f"P({self.outcome} | ...)") from None

    def predict_mean(self, key: CovariateKey) -> float:
        return float(self.prob(key) @ self._codes)

    def sample(self, key, rng, size=None):
        p = self.prob(key)
        cdf = np.cumsum(p)
        # pin the cdf to 1 from the last supported level on, so rounding in
        # the cumulative sum can never select a zero-probability tail level
        cdf[np.flatnonzero(p)[-1]:] = 1.0
        u = rng.random(size)
        draws = np.searchsorted(cdf, u, side="right")
        if size is None:
            return int(draws)
        return draws.astype(np.int64)

    def mean_at_levels(self, key, l_values):
        if "l1" not in self.signature:
            return np.full(np.shape(l_values), self.predict_mean(key))
        levels, inverse = np.unique(np.asarray(l_values), return_inverse=True)
        means = np.array([
            self.predict_mean(CovariateKey(a0=key.a0, a1=key.a1, l1=int(lv))) for lv in levels
        ])
        return means[inverse]

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "outcome": self.outcome,
            "signature": list(self.signature),
            "outcome_support": self.outcome_support.to_dict(),
            "table": [
                {"key": list(k), "count": self.counts.get(k), "p": self.table[k].tolist()}
                for k in sorted(self.table)
            ],
            "warnings": list(self.warnings),
        }


@dataclass
class StratumFit:
    """Least-squares fit within one treatment arm.

    Exactly one of the regressor representations is populated: none
    (intercept only), ``slope`` for a continuous regressor, or
    ``level_means`` for a categorical one (saturated cell-means coding, with
    ``intercept`` equal to the lowest observed level's mean).
    """

    n: int
    intercept: float
    residual_variance: float
    slope: float | None = None
    level_means: dict[int, float] | None = None
    rank_deficient: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "intercept": self.intercept,
            "slope": self.slope,
            "level_means": None if self.level_means is None
            else {str(k): v for k, v in sorted(self.level_means.items())},
            "residual_variance": self.residual_variance,
            "rank_deficient": self.rank_deficient,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StratumFit:
        lm = d.get("level_means")
        return cls(
            n=int(d["n"]),
            intercept=float(d["intercept"]),
            residual_variance=float(d["residual_variance"]),
            slope=None if d.get("slope") is None else float(d["slope"]),
            level_means=None if lm is None else {int(k): float(v) for k, v in lm.items()},
            rank_deficient=bool(d.get("rank_deficient", False)),
        )


class StratifiedGaussian(ConditionalModel):
    """Per-arm Gaussian regressions (T-learner)."""

    form = "stratified_gaussian"

    def __init__(self, outcome, signature, outcome_support, strata: dict[tuple, StratumFit],
                 regressor_kind: str | None, warnings=()):
        super().__init__(outcome, signature, outcome_support, warnings)
        self.arms = tuple(c for c in signature if c in TREATMENTS)
        self.regressor = "l1" if "l1" in signature else None
        self.regressor_kind = regressor_kind
        self.strata = dict(strata)

    def stratum(self, key: CovariateKey) -> StratumFit:
        arm = tuple(int(v) for v in key.project(self.arms))
        fit = self.strata.get(arm)
        if fit is None:
            raise PositivityError(dict(zip(self.arms, arm)), f"E[{self.outcome} | ...] arm")
        return fit

    def _mean(self, fit: StratumFit, key: CovariateKey, l_values):
        if self.regressor is None:
            return np.full(np.shape(l_values), fit.intercept)
        if self.regressor_kind == "continuous":
            return fit.intercept + fit.slope * np.asarray(l_values, dtype=np.float64)
        levels, inverse = np.unique(np.asarray(l_values), return_inverse=True)
        means = np.empty(levels.shape[0])
        for i, lv in enumerate(levels):
            m = fit.level_means.get(int(lv))
            if m is None:
                desc = {"l1": int(lv), **{a: getattr(key, a) for a in self.arms}}
                raise PositivityError(desc, f"E[{self.outcome} | ...]")
            means[i] = m
        return means[inverse]

    def predict_mean(self, key):
        fit = self.stratum(key)
        if self.regressor is None:
            return fit.intercept
        key.project(self.signature)
        return float(self._mean(fit, key, np.array([key.l1]))[0])

    def mean_at_levels(self, key, l_values):
        return self._mean(self.stratum(key), key, l_values)

    def sample(self, key, rng, size=None):
        mean = self.predict_mean(key)
        sd = math.sqrt(self.stratum(key).residual_variance)
        z = rng.standard_normal(size)
        if size is None:
            return mean + sd * float(z)
        return mean + sd * z

    def sample_at_levels(self, key, l_values, rng):
        fit = self.stratum(key)
        means = self._mean(fit, key, l_values)
        return means + math.sqrt(fit.residual_variance) * rng.standard_normal(means.shape[0])

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "outcome": self.outcome,
            "signature": list(self.signature),
            "outcome_support": self.outcome_support.to_dict(),
            "regressor_kind": self.regressor_kind,
            "strata": [{"arm": list(k), **self.strata[k].to_dict()} for k in sorted(self.strata)],
            "warnings": list(self.warnings),
        }


def model_from_dict(d: dict) -> ConditionalModel:
    """Rebuild a fitted model from :meth:`ConditionalModel.to_dict` output."""
    sup = Support(d["outcome_support"]["kind"], d["outcome_support"]["levels"])
    sig = tuple(d["signature"])
    if d["form"] == PmfTable.form:
        table, counts = {}, {}
        for row in d["table"]:
            k = tuple(int(v) for v in row["key"])
            table[k] = np.array(row["p"], dtype=np.float64)
            if row.get("count") is not None:
                counts[k] = int(row["count"])
        return PmfTable(d["outcome"], sig, sup, table, counts, d.get("warnings", ()))
    if d["form"] == StratifiedGaussian.form:
        strata = {tuple(int(v) for v in s["arm"]): StratumFit.from_dict(s) for s in d["strata"]}
        return StratifiedGaussian(d["outcome"], sig, sup, strata, d.get("regressor_kind"),
                                  d.get("warnings", ()))
    raise ValueError(f"unknown model form {d['form']!r}")


def _group(columns: list[np.ndarray]) -> tuple[list[tuple], np.ndarray]:
    """Distinct rows of small non-negative integer columns, in lexicographic
    order, and each row's group index."""
    n = columns[0].shape[0] if columns else 0
    if not columns:
        return [()], np.zeros(n, dtype=np.int64)
    radices = [int(c.max()) + 1 for c in columns]
    code = np.zeros(n, dtype=np.int64)
    for col, radix in zip(columns, radices):
        code = code * radix + col
    present = np.flatnonzero(np.bincount(code))
    remap = np.full(int(code.max()) + 1, -1, dtype=np.int64)
    remap[present] = np.arange(present.shape[0])
    keys = []
    for c in present.tolist():
        digits = []
        for radix in reversed(radices):
            c, d = divmod(c, radix)
            digits.append(d)
        keys.append(tuple(reversed(digits)))
    return keys, remap[code]


def fit_pmf(dataset: Dataset, outcome: str, signature: Iterable[str]) -> PmfTable:
    """Empirical relative frequencies of a categorical outcome per stratum."""
    sig = _normalize_signature(signature)
    _check_outcome(outcome, sig)
    support = dataset.support(outcome)
    if not support.is_categorical:
        raise ValueError("PMF fit requires categorical outcome")
    if "l1" in sig and not dataset.l_support.is_categorical:
        raise ValueError("PMF fit can only stratify on a categorical l1")
    keys, group = _group([dataset.column(c) for c in sig])
    levels = support.levels
    y = dataset.column(outcome)
    counts = np.bincount(group * levels + y, minlength=len(keys) * levels).reshape(len(keys), levels)
    table, totals = {}, {}
    for i, k in enumerate(keys):
        tot = int(counts[i].sum())
        table[k] = counts[i] / tot
        totals[k] = tot
    return PmfTable(outcome, sig, support, table, totals)


def _fit_stratum(y: np.ndarray, l: np.ndarray | None, kind: str | None) -> StratumFit:
    n = y.shape[0]
    if l is None:
        mean = _fmean(y)
        return StratumFit(n, mean, _fmean((y - mean) ** 2))
    order = np.lexsort((y, l))
    y, l = y[order], l[order]
    if kind == "categorical":
        level_means = {}
        resid = np.empty(n)
        for lv in np.unique(l):
            sel = l == lv
            m = _fmean(y[sel])
            level_means[int(lv)] = m
            resid[sel] = y[sel] - m
        return StratumFit(
            n, level_means[min(level_means)], _fmean(resid ** 2), level_means=level_means
        )
    X = np.column_stack([np.ones(n), l])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return StratumFit(
        n, float(coef[0]), _fmean(resid ** 2), slope=float(coef[1]), rank_deficient=bool(rank < 2)
    )


def fit_t_learner(dataset: Dataset, outcome: str, signature: Iterable[str]) -> StratifiedGaussian:
    """Fit one least-squares regression per treatment arm.

    Arms are the distinct values of the treatment covariates in
    ``signature``; ``l1``, when present, is the within-arm regressor
    (cell-means coded if categorical). Categorical outcomes are regressed as
    their numeric level codes. Residual variance uses the 1/n divisor.
    Arms absent from the data are not fitted; querying them raises
    :class:`PositivityError`.
    """
    sig = _normalize_signature(signature)
    _check_outcome(outcome, sig)
    arms = [c for c in sig if c in TREATMENTS]
    keys, group = _group([dataset.column(c) for c in arms])
    y = dataset.column(outcome).astype(np.float64)
    kind = None
    l = None
    if "l1" in sig:
        kind = dataset.l_support.kind
        l = dataset.l1
    strata = {}
    warnings = []
    for i, k in enumerate(keys):
        sel = group == i
        fit = _fit_stratum(y[sel], None if l is None else l[sel], kind)
        if fit.rank_deficient:
            warnings.append(
                f"rank-deficient design in arm {dict(zip(arms, k))}; minimum-norm solution used"
            )
        strata[k] = fit
    return StratifiedGaussian(outcome, sig, dataset.support(outcome), strata, kind, warnings)


def predict_mean(model: ConditionalModel, key: CovariateKey) -> float:
    return model.predict_mean(key)


def sample_outcome(model: ConditionalModel, key: CovariateKey, rng: np.random.Generator):
    """Draw one outcome from the model's predictive distribution at ``key``."""
    return model.sample(key, rng)
