"""G-formula estimation for two-session sequential experiments with carry-over."""

from .baselines import BaselineKind, naive_effect
from .bench import BenchConfig, BenchReport, EstimatorSpec, render_report, run_benchmark
from .core import (
    ConfigError,
    DataError,
    Dataset,
    EstimandSpec,
    PositivityError,
    Support,
    TreatmentPath,
    load_dataset,
    save_dataset,
)
from .dgp import Assignment, Confounder, DgpConfig, simulate, true_effect
from .diagnostics import check_positivity, gnull_sweep
from .gformula import (
    EffectEstimate,
    PotentialOutcomeEstimate,
    estimate_effect,
    estimate_potential_outcome_mc,
    estimate_potential_outcome_plugin,
    fit_g_models,
)
from .learners import CovariateKey, fit_pmf, fit_t_learner, predict_mean, sample_outcome

__version__ = "0.1.0"
