"""Naive estimators that ignore the sequential structure.

They only model the final session, yet are reported against the full
sequential estimand. The gap between the two is what they exist to show:

* ``ignore_history`` drops L1 and A0 entirely (pooled regression of Y on A1),
  so any carry-over of A0 is lost.
* ``condition_on_l`` adjusts for L1 within A1 arms, which blocks the part of
  A0's effect that runs through L1 and opens a collider path when L1 shares
  an unobserved cause with Y.
* ``final_arm_t_learner`` is the per-arm T-learner in A1 alone.
"""

from __future__ import annotations

import math
from enum import Enum

from .core import Dataset, EstimandSpec, PositivityError
from .gformula import EffectEstimate, PotentialOutcomeEstimate, _contrast
from .learners import CovariateKey, fit_t_learner


class BaselineKind(str, Enum):
    IGNORE_HISTORY = "ignore_history"
    CONDITION_ON_L = "condition_on_l"
    FINAL_ARM_T_LEARNER = "final_arm_t_learner"


NOTE = "naive estimator models only the final session; compared against the sequential estimand"


def pooled_final_arm_fit(dataset: Dataset) -> tuple[float, float]:
    """Intercept and A1 slope of the pooled least-squares fit of Y on A1.

    With a single binary regressor the solution is the two arm means.
    """
    means = []
    for arm in (0, 1):
        y = dataset.y[dataset.a1 == arm]
        if y.shape[0] == 0:
            raise PositivityError({"a1": arm}, "pooled regression of y on a1")
        means.append(math.fsum(y.tolist()) / y.shape[0])
    return means[0], means[1] - means[0]


def naive_effect(dataset: Dataset, kind: BaselineKind | str, estimand: EstimandSpec) -> EffectEstimate:
    kind = BaselineKind(kind)
    a, b = estimand.path_a, estimand.path_a_prime
    if a.a1 == b.a1:
        raise ValueError("naive estimator cannot distinguish these paths (same a1)")
    method = f"baseline:{kind.value}"

    if kind is BaselineKind.IGNORE_HISTORY:
        intercept, slope = pooled_final_arm_fit(dataset)
        values = [intercept + slope * p.a1 for p in (a, b)]
    elif kind is BaselineKind.FINAL_ARM_T_LEARNER:
        model = fit_t_learner(dataset, "y", ("a1",))
        values = [model.predict_mean(CovariateKey(a0=p.a0, a1=p.a1)) for p in (a, b)]
    else:
        # standardize within-(A1, L1) fits over the marginal empirical L1
        model = fit_t_learner(dataset, "y", ("l1", "a1"))
        values = []
        for p in (a, b):
            m = model.mean_at_levels(CovariateKey(a0=p.a0, a1=p.a1), dataset.l1)
            values.append(math.fsum(m.tolist()) / m.shape[0])

    ests = [PotentialOutcomeEstimate(p, float(v), method) for p, v in zip((a, b), values)]
    return _contrast(estimand, *ests, method=method, note=NOTE)
