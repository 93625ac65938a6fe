"""Command-line front end.

Exit codes: 0 success, 2 configuration or flag error, 3 I/O or unreadable
input, 4 estimation infeasible (empty stratum / positivity failure).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from . import config as cfgmod
from .bench import (
    METHODS,
    REFERENCE_SCENARIOS,
    BenchConfig,
    EstimatorSpec,
    render_report,
    run_benchmark,
    run_estimator,
)
from .core import ConfigError, DataError, PositivityError, load_dataset, save_dataset
from .diagnostics import DEFAULT_EPSILON, SPECS, check_positivity, gnull_sweep
from .dgp import simulate, true_effect
from .gformula import DEFAULT_K, estimate_effect

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INFEASIBLE = 0, 2, 3, 4

log = logging.getLogger("carryover")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def _with_seed(conf: dict, seed: int | None) -> dict:
    if seed is not None:
        conf = {**conf, "seed": seed}
    return conf


def cmd_simulate(args) -> int:
    conf = _with_seed(cfgmod.load_config(args.config), args.seed)
    scenario = cfgmod.scenario_from(conf)
    if args.out is None:
        raise ConfigError("--out", "simulate needs an output path")
    data = simulate(scenario)
    save_dataset(data, args.out)
    print(f"n={data.n} true_effect_(1,1)_vs_(0,0)={true_effect(scenario)!r}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    conf = _with_seed(cfgmod.load_config(args.config), args.seed)
    if args.data is None:
        raise ConfigError("--data", "estimate needs a data file")
    l_sup, y_sup = cfgmod.supports_from(conf)
    data = load_dataset(args.data, l_sup, y_sup)
    estimand = cfgmod.estimand_from(conf, args.a, args.a_prime)
    method = args.method or conf.get("method", "gformula-mc")
    k = args.k if args.k is not None else cfgmod.int_key(conf, "k", DEFAULT_K)
    spec = EstimatorSpec(method, k)
    seed = cfgmod.int_key(conf, "seed", 0, minimum=0)
    if method.startswith("gformula"):
        est = estimate_effect(
            data, estimand, "plugin" if method == "gformula-plugin" else "mc", k, seed,
            g_learner=conf.get("g_learner", "t-learner"), f_learner=conf.get("f_learner", "auto"),
            sample_y=bool(conf.get("sample_y", False)),
        )
    else:
        est = run_estimator(spec, data, estimand)
    _emit(est.to_json(), args.out)
    return EXIT_OK


def _bench_config(conf: dict) -> BenchConfig:
    base = {k: v for k, v in conf.items() if k in cfgmod.SCENARIO_KEYS and k != "seed"}
    overrides = conf.get("scenarios")
    if overrides is None:
        overrides = [{"delta": d, "eta": e} for d, e in REFERENCE_SCENARIOS]
    if not isinstance(overrides, list):
        raise ConfigError("scenarios", "must be a list of objects")
    scenarios = []
    for i, o in enumerate(overrides):
        if not isinstance(o, dict):
            raise ConfigError(f"scenarios[{i}]", "must be an object")
        bad = set(o) - cfgmod.SCENARIO_KEYS
        if bad:
            raise ConfigError(f"scenarios[{i}].{sorted(bad)[0]}", "unknown scenario key")
        scenarios.append(cfgmod.scenario_from({**base, **o}))
    k = cfgmod.int_key(conf, "k", DEFAULT_K)
    names = conf.get("estimators", ["gformula-mc", "baseline-ignore"])
    if not isinstance(names, list):
        raise ConfigError("estimators", "must be a list of method names")
    return BenchConfig(
        scenarios=scenarios,
        estimators=[EstimatorSpec(m, k) for m in names],
        replications=cfgmod.int_key(conf, "replications", 200),
        estimand=cfgmod.estimand_from(conf),
        master_seed=cfgmod.int_key(conf, "seed", 0, minimum=0),
    )


def cmd_bench(args) -> int:
    conf = _with_seed(cfgmod.load_config(args.config), args.seed)
    report = run_benchmark(_bench_config(conf), jobs=args.jobs)
    _emit(render_report(report, args.format or "table"), args.out)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    conf = _with_seed(cfgmod.load_config(args.config), args.seed)
    if args.data is not None:
        l_sup, y_sup = cfgmod.supports_from(conf)
        data = load_dataset(args.data, l_sup, y_sup)
    else:
        data = simulate(cfgmod.scenario_from(conf))
    eps = conf.get("epsilon", DEFAULT_EPSILON)
    if not isinstance(eps, (int, float)) or not 0 <= eps < 0.5:
        raise ConfigError("epsilon", "must lie in [0, 0.5)")
    report = check_positivity(data, float(eps))
    fmt = args.format or "json"
    if fmt == "table":
        raise ConfigError("--format", "diagnose writes json or csv")
    _emit(report.to_csv() if fmt == "csv" else report.to_json(), args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    conf = _with_seed(cfgmod.load_config(args.config), args.seed)
    scenario = cfgmod.scenario_from(conf)
    n_grid = conf.get("n_grid", [1000, 10000, 100000])
    if not isinstance(n_grid, list) or not all(isinstance(n, int) and n >= 1 for n in n_grid):
        raise ConfigError("n_grid", "must be a list of positive integers")
    report = gnull_sweep(
        scenario,
        n_grid,
        cfgmod.int_key(conf, "replications", 200),
        conf.get("specs", list(SPECS)),
        seed=cfgmod.int_key(conf, "seed", 0, minimum=0),
        z=float(conf.get("z", 1.96)),
        estimand=cfgmod.estimand_from(conf),
        k=cfgmod.int_key(conf, "k", DEFAULT_K),
        jobs=args.jobs,
    )
    fmt = args.format or "json"
    if fmt == "table":
        raise ConfigError("--format", "sensitivity writes json or csv")
    _emit(report.to_csv() if fmt == "csv" else report.to_json(), args.out)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "bench": cmd_bench,
    "diagnose": cmd_diagnose,
    "sensitivity": cmd_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carryover",
        description="G-formula estimation for two-session experiments with carry-over effects.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--data", help="input dataset CSV")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--format", choices=("csv", "json", "table"))
    common.add_argument("--jobs", type=int, default=1, help="worker processes; never changes results")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "estimate":
            p.add_argument("--a", help='treatment path, e.g. "1,1"')
            p.add_argument("--a-prime", dest="a_prime", help='comparison path, e.g. "0,0"')
            p.add_argument("--method", choices=sorted(METHODS))
            p.add_argument("--k", type=int, help="Monte Carlo draws per path")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "k", None) is not None and args.k < 1:
        print("error: --k must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except PositivityError as exc:
        print(f"error: estimation infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, DataError) as exc:
        print(f"error: input/output: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
