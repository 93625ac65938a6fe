import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carryover import (
    Confounder,
    DgpConfig,
    EstimandSpec,
    PositivityError,
    Support,
    TreatmentPath,
    estimate_effect,
    estimate_potential_outcome_mc,
    estimate_potential_outcome_plugin,
    fit_g_models,
    simulate,
    true_effect,
)
from carryover.learners import PmfTable, StratifiedGaussian, StratumFit

from .conftest import categorical_dataset
from .oracles import brute_force_gformula

BIN = Support.categorical(2)
REAL = Support.continuous()
PATHS = [TreatmentPath(a0, a1) for a0 in (0, 1) for a1 in (0, 1)]


def binary_models(p1: float, mean0: float, mean1: float):
    f = PmfTable("l1", ("a0",), BIN, {(a,): np.array([1 - p1, p1]) for a in (0, 1)})
    strata = {(a0, a1): StratumFit(10, mean0, 0.0, level_means={0: mean0, 1: mean1})
              for a0 in (0, 1) for a1 in (0, 1)}
    g = StratifiedGaussian("y", ("l1", "a0", "a1"), REAL, strata, "categorical")
    return g, f


def test_fit_g_models_kinds():
    g, f = fit_g_models(categorical_dataset(500, 1, l_levels=2, y_levels=2), "pmf", "pmf")
    assert isinstance(g, PmfTable) and len(g.table) == 8
    assert isinstance(f, PmfTable) and len(f.table) == 2
    g, f = fit_g_models(simulate(DgpConfig(n=200, noise_l=1, noise_y=1)))
    assert isinstance(g, StratifiedGaussian) and isinstance(f, PmfTable)


def test_fitted_g_recovers_noiseless_means():
    cfg = DgpConfig(delta=-0.217, eta=0.055, alpha_l=1.0, seed=2)
    g, _ = fit_g_models(simulate(cfg))
    for fit_arm, fit in g.strata.items():
        a0, a1 = fit_arm
        for level, mean in fit.level_means.items():
            assert mean == pytest.approx(cfg.delta * a1 + cfg.eta * a0, abs=1e-12)


def test_plugin_point_mass():
    g, _ = binary_models(0.0, 4.0, 7.5)
    f = PmfTable("l1", ("a0",), BIN, {(0,): np.array([0.0, 1.0]), (1,): np.array([0.0, 1.0])})
    assert estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 1)).value == 7.5


def test_plugin_arithmetic():
    g, f = binary_models(0.5, 2.0, 4.0)
    assert estimate_potential_outcome_plugin(g, f, TreatmentPath(0, 1)).value == 3.0


def test_plugin_rejects_continuous_l():
    g, f = fit_g_models(simulate(DgpConfig(n=100, l_kind="continuous", noise_l=1)))
    with pytest.raises(ValueError, match="use Monte Carlo"):
        estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 1))


@pytest.mark.parametrize("g_learner", ["pmf", "t-learner"])
@pytest.mark.parametrize("path", PATHS, ids=str)
def test_plugin_equals_brute_force(g_learner, path):
    ds = categorical_dataset(3000, 7, l_levels=3, y_levels=4)
    g, f = fit_g_models(ds, g_learner, "pmf")
    got = estimate_potential_outcome_plugin(g, f, path).value
    assert abs(got - brute_force_gformula(ds, path)) <= 1e-12


def test_mc_degenerate_equals_plugin():
    g, _ = binary_models(0.0, 1.25, 9.0)
    f = PmfTable("l1", ("a0",), BIN, {(0,): np.array([1.0, 0.0]), (1,): np.array([1.0, 0.0])})
    plug = estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 0)).value
    for k in (1, 2, 37, 1000):
        mc = estimate_potential_outcome_mc(g, f, TreatmentPath(1, 0), k, rng=k)
        assert mc.value == plug
    assert estimate_potential_outcome_mc(g, f, TreatmentPath(1, 0), 1, rng=0).mc_std_error is None


def test_mc_close_to_plugin_at_large_k():
    g, f = binary_models(0.35, -1.0, 2.0)
    plug = estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 1)).value
    mc = estimate_potential_outcome_mc(g, f, TreatmentPath(1, 1), 100_000, rng=5)
    assert abs(mc.value - plug) <= 4 * mc.mc_std_error


def test_mc_noiseless_first_scenario():
    ds = simulate(DgpConfig(delta=-0.217, eta=0.055, seed=6))
    g, f = fit_g_models(ds)
    est = estimate_potential_outcome_mc(g, f, TreatmentPath(1, 1), 1000, rng=1)
    assert abs(est.value - (-0.162)) <= 1e-9


def test_mc_missing_stratum_is_positivity_error():
    ds = categorical_dataset(400, 3)
    keep = ~((ds.a0 == 1) & (ds.a1 == 1) & (ds.l1 == 1))
    g, f = fit_g_models(ds.select(keep))
    with pytest.raises(PositivityError, match="l1=1"):
        estimate_potential_outcome_mc(g, f, TreatmentPath(1, 1), 500, rng=0)


def test_sample_y_mode_agrees_in_expectation():
    ds = simulate(DgpConfig(n=20_000, delta=0.5, eta=0.3, gamma=0.4, alpha_l=0.6,
                            noise_l=1.0, noise_y=1.0, seed=3))
    g, f = fit_g_models(ds)
    plug = estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 1)).value
    mc = estimate_potential_outcome_mc(g, f, TreatmentPath(1, 1), 200_000, rng=9, sample_y=True)
    assert abs(mc.value - plug) <= 4 * mc.mc_std_error


def test_effect_identical_paths_is_zero():
    ds = categorical_dataset(500, 4)
    same = EstimandSpec(TreatmentPath(1, 0), TreatmentPath(1, 0))
    assert estimate_effect(ds, same, "plugin").tau_hat == 0.0


def test_effect_second_scenario(estimand):
    ds = simulate(DgpConfig(delta=0.118, eta=-0.015, seed=21))
    est = estimate_effect(ds, estimand, "mc", 1000, 4)
    assert abs(est.tau_hat - 0.103) <= 1e-9


def test_effect_with_mediated_path(estimand):
    cfg = DgpConfig(n=100_000, delta=0.2, eta=0.1, gamma=0.5, alpha_l=0.8, noise_l=1.0,
                    noise_y=0.5, seed=13)
    est = estimate_effect(simulate(cfg), estimand, "mc", 20_000, 3)
    truth = true_effect(cfg, estimand)
    # MC error plus the sampling error of a 1e5-unit fit (roughly 0.01)
    assert abs(est.tau_hat - truth) <= 2 * est.mc_std_error + 0.03


def test_effect_continuous_l(estimand):
    cfg = DgpConfig(n=50_000, delta=-0.3, eta=0.2, gamma=0.5, alpha_l=0.4, noise_l=1.0,
                    noise_y=0.5, l_kind="continuous", confounder=Confounder(0.7, 0.7), seed=8)
    est = estimate_effect(simulate(cfg), estimand, "mc", 20_000, 1)
    assert est.tau_hat == pytest.approx(true_effect(cfg, estimand), abs=0.04)


def test_identity_and_antisymmetry():
    ds = categorical_dataset(800, 5)
    e1 = EstimandSpec(TreatmentPath(1, 1), TreatmentPath(0, 1))
    e2 = EstimandSpec(TreatmentPath(0, 1), TreatmentPath(1, 1))
    a, b = estimate_effect(ds, e1, "plugin"), estimate_effect(ds, e2, "plugin")
    assert a.tau_hat == a.per_path[0].value - a.per_path[1].value
    assert a.tau_hat == -b.tau_hat


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_mc_deterministic_for_seed(seed):
    ds = simulate(DgpConfig(n=500, delta=0.3, eta=0.1, alpha_l=0.5, noise_l=1, noise_y=1, seed=1))
    a = estimate_effect(ds, EstimandSpec.default(), "mc", 300, seed)
    b = estimate_effect(ds, EstimandSpec.default(), "mc", 300, seed)
    assert a.to_json() == b.to_json()


def test_saturated_plugin_matches_contingency_means():
    # continuous Y with categorical L1: 2x2x2 table of (a0, l1, a1) cell means
    ds = simulate(DgpConfig(n=5000, delta=0.4, eta=0.2, gamma=0.3, alpha_l=0.5,
                            noise_l=1, noise_y=1, seed=14))
    for path in PATHS:
        g, f = fit_g_models(ds)
        got = estimate_potential_outcome_plugin(g, f, path).value
        assert got == pytest.approx(brute_force_gformula(ds, path), abs=1e-12)


def test_convergence_ratio():
    g, f = binary_models(0.4, 0.0, 1.0)
    plug = estimate_potential_outcome_plugin(g, f, TreatmentPath(1, 1)).value
    err = {}
    for k in (100, 10_000):
        errs = [abs(estimate_potential_outcome_mc(g, f, TreatmentPath(1, 1), k, rng=(k, r)).value - plug)
                for r in range(50)]
        err[k] = np.mean(errs)
    assert 5 <= err[100] / err[10_000] <= 20
