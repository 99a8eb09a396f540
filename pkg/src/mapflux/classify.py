"""
Long-horizon trichotomy verdict for the ordinate: drifts up, drifts down,
or oscillates, decided from three evidence channels.

The primary channel is the strong-law slope xi_T / T across paths; the
last-visit ratios and the vanishing-lambda Laplace proxies corroborate.
The asymptotic statements are almost-sure limits, so any finite-horizon
rule is a protocol: this one uses a high quantile of the per-path ratios
gbar_T / T and gunder_T / T (the mean is useless for oscillation, where the
ratio has a nondegenerate arcsine-type limit law whose upper quantiles
approach 1), wide thresholds, and an Inconclusive verdict whenever the
channels do not line up.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ValidationError
from .fluctuation import final_excursion_mass_estimate, last_visit_times
from .stats import mc_mean_ci

__all__ = ["Verdict", "ClassifyThresholds", "Classification", "slln_slope",
           "trichotomy"]

MIN_PATHS = 30


class Verdict(enum.Enum):
    DRIFTS_PLUS = "DriftsPlus"
    DRIFTS_MINUS = "DriftsMinus"
    OSCILLATES = "Oscillates"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ClassifyThresholds:
    near_one: float = 0.9
    near_zero: float = 0.1
    proxy_tol: float = 0.1
    ci_level: float = 0.99
    ratio_quantile: float = 0.95


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    slope: float
    slope_ci: tuple
    gbar_ratio: float
    gunder_ratio: float
    proxy_up: float
    proxy_down: float
    n_paths: int
    horizon: float

    def as_dict(self):
        return {
            "verdict": self.verdict.value,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "gbar_ratio": self.gbar_ratio,
            "gunder_ratio": self.gunder_ratio,
            "proxy_up": self.proxy_up,
            "proxy_down": self.proxy_down,
            "n_paths": self.n_paths,
            "horizon": self.horizon,
            "note": "finite-horizon protocol verdict; the underlying "
                    "trichotomy is an almost-sure limit statement",
        }


def slln_slope(paths, burn_in=0.0, level=0.99):
    """Mean and CI of the per-path slope (xi_T - xi_b) / (T - b)."""
    paths = list(paths)
    if len(paths) < MIN_PATHS:
        raise ValidationError(f"need at least {MIN_PATHS} paths")
    slopes = np.empty(len(paths))
    for i, p in enumerate(paths):
        t_end = p.grid.horizon
        if burn_in >= t_end:
            raise ValidationError("burn_in at or beyond the path horizon")
        i0 = p.grid.index_at(burn_in)
        slopes[i] = (p.xi[-1] - p.xi[i0]) / (t_end - p.grid.times[i0])
    mean, half = mc_mean_ci(slopes, level)
    return mean, (mean - half, mean + half)


def trichotomy(paths, thresholds=None, lambda_grid=None, horizons=None,
               burn_in=0.0, epsilon=1e-9):
    """Three-channel verdict on the long-horizon behavior of the ordinate.

    DriftsPlus requires a positive slope CI, a stabilized last-infimum time
    (small gunder ratio) and a still-growing last-supremum time (gbar ratio
    near 1); DriftsMinus is the mirror image; Oscillates requires a slope CI
    straddling 0 with both ratios near 1.  Anything else is Inconclusive.
    """
    th = thresholds or ClassifyThresholds()
    paths = list(paths)
    slope, ci = slln_slope(paths, burn_in, th.ci_level)
    horizon = min(p.grid.horizon for p in paths)
    if horizons is None:
        horizons = horizon * np.array([0.25, 0.5, 0.75, 1.0])
    if lambda_grid is None:
        lambda_grid = np.array([1e-1, 1e-2, 1e-3])
    t_ref = float(np.asarray(horizons)[-1])
    gbar = np.empty(len(paths))
    gunder = np.empty(len(paths))
    for i, p in enumerate(paths):
        gbar[i] = last_visit_times(p.ordinate(), [t_ref], epsilon, "sup")[0]
        gunder[i] = last_visit_times(p.ordinate(), [t_ref], epsilon, "inf")[0]
    q = th.ratio_quantile
    gbar_ratio = float(np.quantile(gbar / t_ref, q))
    gunder_ratio = float(np.quantile(gunder / t_ref, q))
    up = final_excursion_mass_estimate(paths, lambda_grid, horizons, epsilon, "sup")
    down = final_excursion_mass_estimate(paths, lambda_grid, horizons, epsilon, "inf")

    lo, hi = ci
    if lo > 0 and gunder_ratio <= th.near_zero and gbar_ratio >= th.near_one:
        verdict = Verdict.DRIFTS_PLUS
    elif hi < 0 and gbar_ratio <= th.near_zero and gunder_ratio >= th.near_one:
        verdict = Verdict.DRIFTS_MINUS
    elif lo <= 0 <= hi and gbar_ratio >= th.near_one and gunder_ratio >= th.near_one:
        verdict = Verdict.OSCILLATES
    else:
        verdict = Verdict.INCONCLUSIVE
    return Classification(verdict, slope, ci, gbar_ratio, gunder_ratio,
                          up.proxy, down.proxy, len(paths), t_ref)
