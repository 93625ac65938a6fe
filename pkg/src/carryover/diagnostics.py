"""Positivity checks and the g-null misspecification sweep."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .baselines import pooled_final_arm_fit
from .core import ConfigError, Dataset, EstimandSpec
from .dgp import DgpConfig, simulate, true_effect
from .gformula import DEFAULT_K, estimate_effect

DEFAULT_EPSILON = 0.01
SPECS = ("flexible-t-learner", "misspecified-parsimonious")


@dataclass
class StratumSummary:
    l1: int | None
    a0: int
    count: int
    p_a1: float | None


@dataclass
class PositivityReport:
    p_a0: float
    n: int
    strata: list[StratumSummary]
    violations: list[dict]
    epsilon: float
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "p_a0": self.p_a0,
            "strata": [asdict(s) for s in self.strata],
            "violations": self.violations,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "l1", "a0", "count", "p_treat", "violation"])
        flagged = {(v.get("variable"), v.get("l1"), v.get("a0")): v["reason"] for v in self.violations}
        w.writerow(["a0", "", "", self.n, repr(self.p_a0), flagged.get(("a0", None, None), "")])
        for s in self.strata:
            w.writerow([
                "a1", "" if s.l1 is None else s.l1, s.a0, s.count,
                "" if s.p_a1 is None else repr(s.p_a1),
                flagged.get(("a1", s.l1, s.a0), ""),
            ])
        return buf.getvalue()


def _bounded(p: float, eps: float) -> bool:
    return eps < p < 1.0 - eps


def check_positivity(dataset: Dataset, epsilon: float = DEFAULT_EPSILON) -> PositivityReport:
    """Empirical assignment probabilities per history stratum.

    A stratum is flagged when its P(A1=1) estimate is within ``epsilon`` of 0
    or 1, or when it is empty although its L1 level occurs in the data. L1
    levels never observed at all are listed in ``notes`` rather than flagged,
    since positivity is only required for attainable histories.
    """
    if not 0.0 <= epsilon < 0.5:
        raise ValueError("epsilon must lie in [0, 0.5)")
    n = dataset.n
    p_a0 = float(dataset.a0.mean())
    violations: list[dict] = []
    notes: list[str] = []
    if not _bounded(p_a0, epsilon):
        violations.append({"variable": "a0", "l1": None, "a0": None,
                           "reason": f"P(A0=1)={p_a0:.6g} not within ({epsilon}, {1 - epsilon})"})

    if dataset.l_support.is_categorical:
        levels = range(dataset.l_support.levels)
        realized = set(np.unique(dataset.l1).tolist())
        strata_keys = [(l, a) for l in levels for a in (0, 1)]
        masks = [(dataset.l1 == l) & (dataset.a0 == a) for l, a in strata_keys]
        for l in levels:
            if l not in realized:
                notes.append(f"l1 level {l} is never observed; its strata are not assessed")
    else:
        realized = None
        strata_keys = [(None, a) for a in (0, 1)]
        masks = [dataset.a0 == a for _, a in strata_keys]
        notes.append("continuous l1: strata are formed on a0 only")

    strata = []
    for (l, a), mask in zip(strata_keys, masks):
        count = int(mask.sum())
        p = float(dataset.a1[mask].mean()) if count else None
        strata.append(StratumSummary(l, a, count, p))
        if count == 0:
            if realized is None or l in realized:
                violations.append({"variable": "a1", "l1": l, "a0": a, "reason": "empty stratum"})
        elif not _bounded(p, epsilon):
            violations.append({"variable": "a1", "l1": l, "a0": a,
                               "reason": f"P(A1=1)={p:.6g} not within ({epsilon}, {1 - epsilon})"})
    return PositivityReport(p_a0, n, strata, violations, epsilon, notes)


def _design(dataset: Dataset, mask: np.ndarray) -> np.ndarray:
    """Design rows of the T-learner regression for the selected units."""
    m = int(mask.sum())
    if dataset.l_support.is_categorical:
        levels = np.arange(dataset.l_support.levels)
        return (dataset.l1[mask][:, None] == levels[None, :]).astype(np.float64)
    return np.column_stack([np.ones(m), dataset.l1[mask]])


def _arm_coefficients(dataset: Dataset, a0: int, a1: int) -> tuple[np.ndarray, np.ndarray]:
    """OLS coefficients and HC0 covariance for one (a0, a1) arm."""
    mask = (dataset.a0 == a0) & (dataset.a1 == a1)
    X = _design(dataset, mask)
    y = dataset.y[mask].astype(np.float64)
    keep = X.any(axis=0) if dataset.l_support.is_categorical else np.ones(X.shape[1], bool)
    Xk = X[:, keep]
    bread = np.linalg.pinv(Xk.T @ Xk)
    beta = bread @ Xk.T @ y
    resid = y - Xk @ beta
    meat = (Xk * resid[:, None] ** 2).T @ Xk
    cov = bread @ meat @ bread
    full_beta = np.zeros(X.shape[1])
    full_cov = np.zeros((X.shape[1], X.shape[1]))
    full_beta[keep] = beta
    full_cov[np.ix_(keep, keep)] = cov
    return full_beta, full_cov


def gformula_standard_error(dataset: Dataset, estimand: EstimandSpec) -> float:
    """Large-sample standard error of the T-learner G-formula contrast.

    Each path value is x_bar(a0)' beta(a0, a1), with beta the in-arm OLS fit
    (HC0 covariance) and x_bar the mean design row among units with that a0.
    The two pieces are asymptotically uncorrelated.
    """
    parts = {}
    for path in (estimand.path_a, estimand.path_a_prime):
        beta, cov_b = _arm_coefficients(dataset, path.a0, path.a1)
        mask = dataset.a0 == path.a0
        X = _design(dataset, mask)
        xbar = X.mean(axis=0)
        cov_x = np.cov(X, rowvar=False, ddof=0).reshape(X.shape[1], X.shape[1]) / X.shape[0]
        parts[path] = (beta, cov_b, xbar, cov_x)
    (b1, cb1, x1, cx1), (b2, cb2, x2, cx2) = parts[estimand.path_a], parts[estimand.path_a_prime]
    if estimand.path_a.a0 == estimand.path_a_prime.a0:
        diff = b1 - b2
        var = x1 @ (cb1 + cb2) @ x1 + diff @ cx1 @ diff
    else:
        var = x1 @ cb1 @ x1 + b1 @ cx1 @ b1 + x2 @ cb2 @ x2 + b2 @ cx2 @ b2
    return math.sqrt(max(float(var), 0.0))


def _parsimonious(dataset: Dataset, estimand: EstimandSpec) -> tuple[float, float]:
    """Pooled regression of Y on A1 only, with its HC0 standard error."""
    _, slope = pooled_final_arm_fit(dataset)
    scale = estimand.path_a.a1 - estimand.path_a_prime.a1
    var = 0.0
    for arm in (0, 1):
        y = dataset.y[dataset.a1 == arm]
        var += float(np.var(y)) / y.shape[0]
    return slope * scale, math.sqrt(var) * abs(scale)


@dataclass
class SweepRow:
    n: int
    spec: str
    replications: int
    target: float
    mean_estimate: float | None
    mean_bias: float | None
    bias_std_error: float | None
    rejection_fraction: float | None
    failures: int = 0


@dataclass
class SensitivityReport:
    rows: list[SweepRow]
    null_true: bool
    z: float
    seed: int
    estimand: EstimandSpec
    scenario: dict

    def to_dict(self) -> dict:
        return {
            "null_true": self.null_true,
            "z": self.z,
            "seed": self.seed,
            "estimand": self.estimand.to_dict(),
            "scenario": self.scenario,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(SweepRow.__dataclass_fields__)
        w.writerow(names)
        for r in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (getattr(r, c) for c in names)])
        return buf.getvalue()


def _replicate(args) -> dict[str, tuple[float, float] | None]:
    scenario, n, seed_words, estimand, specs, k = args
    ss = np.random.SeedSequence(seed_words)
    data_seed, est_seed = ss.spawn(2)
    cfg = scenario.replace(n=n, seed=int(data_seed.generate_state(1, np.uint64)[0]))
    data = simulate(cfg)
    out = {}
    for spec in specs:
        try:
            if spec == "misspecified-parsimonious":
                out[spec] = _parsimonious(data, estimand)
            else:
                method = "plugin" if data.l_support.is_categorical else "mc"
                est = estimate_effect(data, estimand, method, k, np.random.default_rng(est_seed))
                se = gformula_standard_error(data, estimand)
                if est.mc_std_error is not None:
                    se = math.hypot(se, est.mc_std_error)
                out[spec] = (est.tau_hat, se)
        except Exception:
            out[spec] = None
    return out


def gnull_sweep(
    scenario: DgpConfig,
    n_grid: Sequence[int],
    replications: int,
    specs: Sequence[str] = SPECS,
    seed: int = 0,
    *,
    z: float = 1.96,
    estimand: EstimandSpec | None = None,
    k: int = DEFAULT_K,
    jobs: int = 1,
) -> SensitivityReport:
    """Bias and rejection rate of each model spec on a true-null scenario.

    Every replication draws one dataset shared by all specs. A replication
    rejects when ``|tau_hat| > z * se`` where ``se`` is the estimator's
    large-sample standard error (plus Monte Carlo error when sampling is
    used).
    """
    if not scenario.is_null:
        raise ConfigError("scenario", "g-null sweep requires a null DGP (delta = eta = gamma = 0)")
    if replications < 1:
        raise ConfigError("replications", "must be >= 1")
    if not n_grid:
        raise ConfigError("n_grid", "must list at least one sample size")
    for s in specs:
        if s not in SPECS:
            raise ConfigError("specs", f"unknown spec {s!r}; choose from {SPECS}")
    estimand = estimand or EstimandSpec.default()
    target = true_effect(scenario, estimand)

    tasks = [
        (scenario, int(n), (int(seed), i, r), estimand, tuple(specs), k)
        for i, n in enumerate(n_grid)
        for r in range(replications)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_replicate, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_replicate(t) for t in tasks]

    rows = []
    for i, n in enumerate(n_grid):
        block = results[i * replications:(i + 1) * replications]
        for spec in specs:
            ok = [b[spec] for b in block if b[spec] is not None]
            taus = np.array([t for t, _ in ok])
            rejects = [abs(t) > z * se for t, se in ok]
            if ok:
                bias = taus - target
                mean_bias = math.fsum(bias.tolist()) / len(ok)
                bias_se = float(np.std(bias, ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else None
                rows.append(SweepRow(int(n), spec, len(ok), target,
                                     math.fsum(taus.tolist()) / len(ok), mean_bias, bias_se,
                                     sum(rejects) / len(ok), replications - len(ok)))
            else:
                # no successful replication: summaries are undefined
                rows.append(SweepRow(int(n), spec, 0, target, None, None, None, None, replications))
    return SensitivityReport(rows, scenario.is_null, z, int(seed), estimand, scenario.to_mapping())
