"""Closed-form population quantities for the binary-L1 structural model.

Written independently of the estimators: everything here is an exact
expectation under the simulator's equations, evaluated by enumerating the
finite (a0, l1, a1) cells.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from carryover import Dataset, DgpConfig, EstimandSpec, TreatmentPath
from carryover.dgp import l_threshold


def _p_l1(cfg: DgpConfig, l: int, a0: int) -> float:
    s = math.hypot(cfg.lambdas[0], cfg.noise_l)
    c = l_threshold(cfg)
    p1 = float(ndtr((cfg.alpha_l * a0 - c) / s)) if s > 0 else float(cfg.alpha_l * a0 > c)
    return p1 if l == 1 else 1.0 - p1


def _mean_u(cfg: DgpConfig, l: int, a0: int) -> float:
    """E[U | L1=l, A0=a0]: U and the L1 latent are jointly Gaussian."""
    lam_l = cfg.lambdas[0]
    s = math.hypot(lam_l, cfg.noise_l)
    if s == 0 or lam_l == 0:
        return 0.0
    z = (l_threshold(cfg) - cfg.alpha_l * a0) / s
    # mean of a standard normal truncated above (l=1) or below (l=0) z
    tail = norm.pdf(z) / norm.sf(z) if l == 1 else -norm.pdf(z) / norm.cdf(z)
    return lam_l / s * tail


def _p_a1(cfg: DgpConfig, a1: int, l: int, a0: int) -> float:
    p = float(cfg.assignment1.prob(np.array([l]), np.array([a0]))[0])
    return p if a1 == 1 else 1.0 - p


def _cond_mean_y(cfg: DgpConfig, l: int, a0: int, a1: int) -> float:
    lam_y = cfg.lambdas[1]
    return cfg.delta * a1 + cfg.eta * a0 + cfg.gamma * l + lam_y * _mean_u(cfg, l, a0)


def gformula_limit(cfg: DgpConfig, estimand: EstimandSpec | None = None) -> float:
    """Population value of sum_l E[Y|l,a0,a1] P(l|a0) for each path, contrasted."""
    estimand = estimand or EstimandSpec.default()

    def value(path):
        return sum(_p_l1(cfg, l, path.a0) * _cond_mean_y(cfg, l, path.a0, path.a1) for l in (0, 1))

    return value(estimand.path_a) - value(estimand.path_a_prime)


def condition_on_l_limit(cfg: DgpConfig, estimand: EstimandSpec | None = None) -> float:
    """Population value of the within-(A1, L1) fit standardized over marginal L1."""
    estimand = estimand or EstimandSpec.default()
    p_a0 = {1: cfg.p0, 0: 1.0 - cfg.p0}
    joint = {
        (a0, l, a1): p_a0[a0] * _p_l1(cfg, l, a0) * _p_a1(cfg, a1, l, a0)
        for a0 in (0, 1) for l in (0, 1) for a1 in (0, 1)
    }
    p_l = {l: sum(v for (a0, ll, a1), v in joint.items() if ll == l) for l in (0, 1)}

    def e_y(a1: int, l: int) -> float:
        w = {a0: joint[(a0, l, a1)] for a0 in (0, 1)}
        tot = sum(w.values())
        return sum(w[a0] / tot * _cond_mean_y(cfg, l, a0, a1) for a0 in (0, 1))

    def value(a1):
        return sum(p_l[l] * e_y(a1, l) for l in (0, 1))

    return value(estimand.path_a.a1) - value(estimand.path_a_prime.a1)


def ignore_history_sample_value(a0, a1, y) -> float:
    """Difference of A1-arm means computed by explicit enumeration of cells."""
    sums = {0: 0.0, 1: 0.0}
    counts = {0: 0, 1: 0}
    for x0, x1, yy in zip(a0.tolist(), a1.tolist(), y.tolist()):
        sums[x1] += yy
        counts[x1] += 1
    return sums[1] / counts[1] - sums[0] / counts[0]


def brute_force_gformula(ds: Dataset, path: TreatmentPath) -> float:
    """sum_l sum_y y * P(y | l, a0, a1) * P(l | a0) from raw cell counts."""
    cells = Counter(zip(ds.a0.tolist(), ds.l1.tolist(), ds.a1.tolist(), ds.y.tolist()))
    n_a0 = sum(c for (a0, _, _, _), c in cells.items() if a0 == path.a0)
    total = 0.0
    for level in sorted({l for (a0, l, _, _) in cells if a0 == path.a0}):
        n_l = sum(c for (a0, l, _, _), c in cells.items() if a0 == path.a0 and l == level)
        n_arm = sum(c for (a0, l, a1, _), c in cells.items()
                    if (a0, l, a1) == (path.a0, level, path.a1))
        ey = sum(y * c for (a0, l, a1, y), c in cells.items()
                 if (a0, l, a1) == (path.a0, level, path.a1)) / n_arm
        total += ey * n_l / n_a0
    return total
