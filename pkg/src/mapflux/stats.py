"""
Small statistical primitives shared by the estimator and verification code:
empirical CDFs, two-sample Kolmogorov-Smirnov, normal-approximation mean
confidence intervals, and total-variation distance on shared bins.

Only the asymptotic 5% KS critical value is provided; callers are expected to
use sample sizes of a few hundred or more.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .core import ValidationError

__all__ = ["Ecdf", "ks_two_sample", "ks_one_sample", "mc_mean_ci", "tv_distance"]

KS_ASYMPTOTIC_5PCT = 1.358


@dataclass(frozen=True)
class Ecdf:
    """Sorted sample with cumulative fractions 1/n ... 1."""

    xs: np.ndarray
    fractions: np.ndarray

    @classmethod
    def from_samples(cls, samples):
        xs = np.sort(np.asarray(samples, dtype=np.float64))
        if xs.size == 0:
            raise ValidationError("cannot build an ECDF from an empty sample")
        fr = np.arange(1, xs.size + 1, dtype=np.float64) / xs.size
        return cls(xs, fr)

    def __call__(self, t):
        """Fraction of the sample <= t (right-continuous)."""
        idx = np.searchsorted(self.xs, np.asarray(t, dtype=np.float64), side="right")
        return idx / self.xs.size


def ks_two_sample(a, b):
    """Two-sample KS statistic and its asymptotic 5% critical value.

    D = sup |F_a - F_b| over the merged support;
    critical value 1.358 * sqrt((n_a + n_b) / (n_a * n_b)).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValidationError("ks_two_sample needs nonempty samples")
    support = np.concatenate([a, b])
    fa = Ecdf.from_samples(a)(support)
    fb = Ecdf.from_samples(b)(support)
    d = float(np.max(np.abs(fa - fb)))
    crit = KS_ASYMPTOTIC_5PCT * np.sqrt((a.size + b.size) / (a.size * b.size))
    return d, float(crit)


def ks_one_sample(samples, cdf):
    """One-sample KS statistic against a continuous reference CDF."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    if xs.size == 0:
        raise ValidationError("ks_one_sample needs a nonempty sample")
    n = xs.size
    f = cdf(xs)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def mc_mean_ci(samples, level=0.95):
    """Sample mean with normal-approximation half width z * s / sqrt(n)."""
    xs = np.asarray(samples, dtype=np.float64)
    if xs.size < 2:
        raise ValidationError("mc_mean_ci needs at least 2 samples")
    if not 0 < level < 1:
        raise ValidationError("level must lie in (0, 1)")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * xs.std(ddof=1) / np.sqrt(xs.size)
    return float(xs.mean()), float(half)


def tv_distance(hist_a, hist_b):
    """Total variation between two histograms on identical bins.

    Both mass vectors are normalized first, so the result lies in [0, 1].
    """
    a = np.asarray(hist_a, dtype=np.float64).ravel()
    b = np.asarray(hist_b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError("histograms must share bin layout")
    sa, sb = a.sum(), b.sum()
    if sa <= 0 or sb <= 0:
        raise ValidationError("histograms must carry positive mass")
    return float(0.5 * np.abs(a / sa - b / sb).sum())
