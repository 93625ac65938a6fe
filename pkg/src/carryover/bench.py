"""Replication harness comparing estimators across (delta, eta) scenarios."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .baselines import BaselineKind, naive_effect
from .core import ConfigError, Dataset, EstimandSpec
from .dgp import DgpConfig, simulate, true_effect
from .gformula import DEFAULT_K, EffectEstimate, estimate_effect

log = logging.getLogger(__name__)

METHODS = {
    "gformula-plugin": None,
    "gformula-mc": None,
    "baseline-ignore": BaselineKind.IGNORE_HISTORY,
    "baseline-condition-l": BaselineKind.CONDITION_ON_L,
    "baseline-final-arm": BaselineKind.FINAL_ARM_T_LEARNER,
}
METHOD_LABELS = {
    "gformula-plugin": "T-Learner with G-Formula (plug-in)",
    "gformula-mc": "T-Learner with G-Formula (Monte Carlo)",
    "baseline-ignore": "T-Learner (ignores history)",
    "baseline-condition-l": "T-Learner (conditions on L1)",
    "baseline-final-arm": "T-Learner (final-arm only)",
}

REFERENCE_SCENARIOS = ((-0.217, 0.055), (0.118, -0.015), (-0.402, 0.023))
DEFAULT_REPLICATIONS = 200


@dataclass(frozen=True)
class EstimatorSpec:
    method: str
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError("method", f"unknown method {self.method!r}; choose from {sorted(METHODS)}")
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k", "must be a positive integer")

    @property
    def label(self) -> str:
        if self.method == "gformula-mc":
            return f"{self.method}(K={self.k})"
        return self.method


def run_estimator(spec: EstimatorSpec, dataset: Dataset, estimand: EstimandSpec,
                  rng: np.random.Generator | int | None = None, sample_y: bool = False) -> EffectEstimate:
    """Dispatch one named estimator on ``dataset``."""
    if spec.method == "gformula-plugin":
        return estimate_effect(dataset, estimand, "plugin")
    if spec.method == "gformula-mc":
        return estimate_effect(dataset, estimand, "mc", spec.k, rng, sample_y=sample_y)
    return naive_effect(dataset, METHODS[spec.method], estimand)


@dataclass
class BenchConfig:
    scenarios: list[DgpConfig]
    estimators: list[EstimatorSpec]
    replications: int = DEFAULT_REPLICATIONS
    estimand: EstimandSpec = field(default_factory=EstimandSpec.default)
    master_seed: int = 0

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("scenarios", "at least one scenario is required")
        if not self.estimators:
            raise ConfigError("estimators", "at least one estimator is required")
        if isinstance(self.replications, bool) or not isinstance(self.replications, int) \
                or self.replications < 1:
            raise ConfigError("replications", "must be an integer >= 1")

    @classmethod
    def reference(cls, base: DgpConfig | None = None, **kw) -> BenchConfig:
        """The three reference (delta, eta) scenarios."""
        base = base or DgpConfig()
        scenarios = [base.replace(delta=d, eta=e) for d, e in REFERENCE_SCENARIOS]
        kw.setdefault("estimators", [EstimatorSpec("gformula-mc"), EstimatorSpec("baseline-ignore")])
        return cls(scenarios, **kw)

    def to_mapping(self) -> dict:
        return {
            "scenarios": [s.to_mapping() for s in self.scenarios],
            "estimators": [asdict(e) for e in self.estimators],
            "replications": self.replications,
            "estimand": self.estimand.to_dict(),
            "master_seed": self.master_seed,
        }


@dataclass
class BenchRow:
    scenario: int
    estimator: str
    delta: float
    eta: float
    target: float
    mean_estimate: float | None
    bias: float | None
    mse: float | None
    replications: int
    n: int
    k: int | None
    failures: int
    estimates: list[float]


@dataclass
class BenchReport:
    rows: list[BenchRow]
    provenance: dict[str, Any]
    fingerprints: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "fingerprints": self.fingerprints,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> BenchReport:
        return cls([BenchRow(**r) for r in d["rows"]], dict(d["provenance"]),
                   {k: list(v) for k, v in d["fingerprints"].items()})


def _cell(args) -> tuple[str, list[float | None]]:
    scenario, s_idx, rep, master_seed, estimators, estimand = args
    ss = np.random.SeedSequence(master_seed, spawn_key=(s_idx, rep))
    data_ss, *est_ss = ss.spawn(1 + len(estimators))
    cfg = scenario.replace(seed=int(data_ss.generate_state(1, np.uint64)[0]))
    data = simulate(cfg)
    out: list[float | None] = []
    for spec, e_ss in zip(estimators, est_ss):
        try:
            est = run_estimator(spec, data, estimand, np.random.default_rng(e_ss))
            out.append(est.tau_hat)
        except Exception as exc:  # recorded as a failure, never aborts the run
            log.debug("scenario %d rep %d %s failed: %s", s_idx, rep, spec.label, exc)
            out.append(None)
    return data.fingerprint(), out


def _summarize(estimates: list[float], target: float) -> tuple[float | None, ...]:
    if not estimates:
        return None, None, None
    m = len(estimates)
    mean = math.fsum(estimates) / m
    mse = math.fsum((t - target) ** 2 for t in estimates) / m
    return mean, mean - target, mse


def run_benchmark(config: BenchConfig, jobs: int = 1) -> BenchReport:
    """Run every estimator on every replication of every scenario.

    Each (scenario, replication) cell draws one dataset from a seed derived
    from ``(master_seed, scenario index, replication index)`` and all
    estimators see that same dataset. Results do not depend on ``jobs``.
    """
    R = config.replications
    tasks = [
        (sc, s, r, config.master_seed, tuple(config.estimators), config.estimand)
        for s, sc in enumerate(config.scenarios)
        for r in range(R)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_cell(t) for t in tasks]

    rows, fingerprints = [], {}
    for s, sc in enumerate(config.scenarios):
        block = results[s * R:(s + 1) * R]
        fingerprints[str(s)] = [fp for fp, _ in block]
        target = true_effect(sc, config.estimand)
        for j, spec in enumerate(config.estimators):
            ests = [vals[j] for _, vals in block if vals[j] is not None]
            mean, bias, mse = _summarize(ests, target)
            rows.append(BenchRow(
                scenario=s, estimator=spec.label, delta=sc.delta, eta=sc.eta, target=target,
                mean_estimate=mean, bias=bias, mse=mse, replications=len(ests), n=int(sc.n),
                k=spec.k if spec.method == "gformula-mc" else None,
                failures=R - len(ests), estimates=ests,
            ))
    provenance = {"config": config.to_mapping(), "master_seed": config.master_seed}
    return BenchReport(rows, provenance, fingerprints)


CSV_FIELDS = [f for f in BenchRow.__dataclass_fields__]


def _csv_value(v) -> str:
    if isinstance(v, list):
        return ";".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _text_table(report: BenchReport) -> str:
    est = report.provenance["config"]["estimand"]
    lines = [
        f"Mean squared error of tau_({est['a'][0]},{est['a'][1]}),({est['a_prime'][0]},{est['a_prime'][1]}) "
        "against its analytic target (raw MSE, not scaled by 1/1000)",
        "",
    ]
    order = list(dict.fromkeys(r.estimator for r in report.rows))
    for name in order:
        method = name.split("(")[0]
        lines.append(f"{METHOD_LABELS.get(method, method)}  [{name}]")
        lines.append(f"{'delta':>9} {'eta':>9} {'MSE':>12}")
        for r in report.rows:
            if r.estimator == name:
                mse = "n/a" if r.mse is None else f"{r.mse:.3e}"
                fail = f"  ({r.failures} failed)" if r.failures else ""
                lines.append(f"{r.delta:>+9.3f} {r.eta:>+9.3f} {mse:>12}{fail}")
        lines.append("")
    return "\n".join(lines)


def render_report(report: BenchReport, fmt: str = "table") -> str:
    """Render as ``csv``, ``json`` or a text ``table`` with one block per estimator."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in report.rows:
            w.writerow([_csv_value(getattr(r, f)) for f in CSV_FIELDS])
        return buf.getvalue()
    if fmt == "table":
        return _text_table(report)
    raise ValueError(f"unknown format {fmt!r}")


def parse_report_json(text: str) -> BenchReport:
    return BenchReport.from_dict(json.loads(text))


def eta_sweep(delta: float, etas: Sequence[float], base: DgpConfig | None = None) -> list[DgpConfig]:
    """Scenarios holding ``delta`` fixed while the carry-over effect varies."""
    base = base or DgpConfig()
    return [base.replace(delta=delta, eta=float(e)) for e in etas]

