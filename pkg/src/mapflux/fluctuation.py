"""
Path functionals of the ordinate: running extrema, the reflected process,
epsilon-excursions, ladder samples, last-visit times, and the Laplace
estimators built on them.

Conventions fixed here and relied on everywhere else:

* the zero set of a reflected path on a grid is the set of grid points with
  reflected value <= epsilon_zero (1e-9 suffices for lattice walks; diffusion
  paths need an epsilon on the supremum-touch scale, about 10 * sqrt(dt));
* the local-time clock is the count of completed epsilon-excursions, an
  unnormalized stand-in that feeds the occupation histogram (which is
  therefore defined only up to a positive constant);
* all infimum-side quantities are computed by negating the ordinate and
  reusing the supremum-side code.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ScalarPath, ValidationError

__all__ = [
    "ExcursionRecord",
    "LadderSample",
    "FluctuationSummary",
    "LaplaceEstimate",
    "OccupationHistogram",
    "GSamples",
    "running_extrema",
    "reflected_process",
    "infimum_reflected_process",
    "last_time_at_supremum",
    "last_time_at_infimum",
    "last_visit_times",
    "last_visit_indices",
    "excursions",
    "ladder_samples",
    "fluctuation_summary",
    "sample_g_at_exponential",
    "laplace_estimate",
    "final_excursion_mass_estimate",
    "FinalMassEstimate",
    "occupation_measure",
]


def running_extrema(path):
    """Pointwise prefix maximum and minimum of a scalar path."""
    if len(path) == 0:
        raise ValidationError("empty path")
    sup = np.maximum.accumulate(path.values)
    inf = np.minimum.accumulate(path.values)
    return ScalarPath(path.grid, sup), ScalarPath(path.grid, inf)


def reflected_process(path):
    """Running supremum minus the path; nonnegative by construction."""
    sup, _ = running_extrema(path)
    return ScalarPath(path.grid, sup.values - path.values)


def infimum_reflected_process(path):
    """Path minus its running infimum (supremum machinery on the negation)."""
    _, inf = running_extrema(path)
    return ScalarPath(path.grid, path.values - inf.values)


def _zero_set_indices(reflected_values, epsilon):
    return np.flatnonzero(reflected_values <= epsilon)


def last_visit_indices(path, horizons, epsilon=1e-9, side="sup"):
    """Grid index of the last visit to the running extremum per horizon.

    Index-valued results keep samples from different paths on one exact
    lattice, which matters when atoms of the distribution meet a KS test.
    """
    values = path.values if side == "sup" else -path.values
    refl = np.maximum.accumulate(values) - values
    zeros = _zero_set_indices(refl, epsilon)
    out = np.empty(len(np.atleast_1d(horizons)), dtype=np.int64)
    for j, t in enumerate(np.atleast_1d(horizons)):
        n_t = path.grid.index_at(float(t))
        pos = np.searchsorted(zeros, n_t, side="right") - 1
        if pos < 0:
            raise ValidationError("no zero-set point before requested time")
        out[j] = zeros[pos]
    return out


def last_visit_times(path, horizons, epsilon=1e-9, side="sup"):
    """Last time at the running supremum (or infimum) for each horizon.

    Horizons must be grid times (up to rounding); returns an array of the
    same length.  This is the bulk version used by the estimators; the
    scalar wrappers below are the readable entry points.
    """
    idx = last_visit_indices(path, horizons, epsilon, side)
    return path.grid.times[idx]


def last_time_at_supremum(path, t, epsilon=1e-9):
    """Largest grid time s <= t with reflected value <= epsilon."""
    return float(last_visit_times(path, [t], epsilon, side="sup")[0])


def last_time_at_infimum(path, t, epsilon=1e-9):
    """Largest grid time s <= t at the running infimum."""
    return float(last_visit_times(path, [t], epsilon, side="inf")[0])


@dataclass(frozen=True)
class ExcursionRecord:
    """One maximal interval where the reflected path exceeds epsilon.

    start_time is the zero-set point preceding the interval; end_time is the
    zero-set point closing it, absent when the horizon cuts the excursion off
    (censored records are kept, never dropped: the final open excursion is
    exactly the infinite-lifetime signal the long-horizon estimators need).
    """

    start_time: float
    end_time: Optional[float]
    max_height: float
    lifetime: Optional[float]
    censored: bool


def excursions(reflected, epsilon):
    """Decompose a nonnegative path into epsilon-excursions."""
    u = reflected.values
    if np.any(u < -1e-12):
        raise ValidationError("reflected path must be nonnegative")
    times = reflected.grid.times
    above = u > epsilon
    if not above.any():
        return []
    # run boundaries of the above-epsilon stretches
    padded = np.concatenate([[False], above, [False]])
    starts = np.flatnonzero(~padded[:-1] & padded[1:])
    ends = np.flatnonzero(padded[:-1] & ~padded[1:]) - 1
    records = []
    for i, j in zip(starts, ends):
        start_t = times[i - 1] if i > 0 else times[0]
        height = float(u[i:j + 1].max())
        if j == len(u) - 1:
            records.append(ExcursionRecord(float(start_t), None, height, None, True))
        else:
            end_t = float(times[j + 1])
            records.append(ExcursionRecord(float(start_t), end_t, height,
                                           end_t - float(start_t), False))
    return records


@dataclass(frozen=True)
class LadderSample:
    """Zero-set samples of (time, ordinate, modulator) with the excursion clock.

    ``clock[k]`` counts the completed excursions strictly before the k-th
    ladder point; ladder ordinates ascend (up to the zero-set tolerance).
    """

    times: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    clock: np.ndarray

    def __len__(self):
        return self.times.size


def ladder_samples(map_path, epsilon=1e-9):
    """Ascending ladder samples of a MapPath at its epsilon-zero set."""
    refl = reflected_process(map_path.ordinate())
    zeros = _zero_set_indices(refl.values, epsilon)
    if zeros.size == 0:
        raise ValidationError("empty zero set; epsilon too small for this grid")
    gaps = np.diff(zeros) > 1
    clock = np.concatenate([[0], np.cumsum(gaps)])
    return LadderSample(map_path.grid.times[zeros].copy(),
                        map_path.xi[zeros].copy(),
                        map_path.theta[zeros].copy(),
                        clock.astype(np.int64))


@dataclass(frozen=True)
class FluctuationSummary:
    """Per-path extrema and last-visit times up to a horizon."""

    horizon: float
    g_bar: float
    g_under: float
    sup: float
    inf: float


def fluctuation_summary(map_path, t=None, epsilon=1e-9):
    ordinate = map_path.ordinate()
    horizon = map_path.grid.horizon if t is None else float(t)
    n_t = map_path.grid.index_at(horizon)
    seg = ordinate.values[: n_t + 1]
    return FluctuationSummary(
        horizon=horizon,
        g_bar=last_time_at_supremum(ordinate, horizon, epsilon),
        g_under=last_time_at_infimum(ordinate, horizon, epsilon),
        sup=float(seg.max()),
        inf=float(seg.min()),
    )


@dataclass(frozen=True)
class GSamples:
    """Last-visit functionals sampled at an independent exponential time."""

    q: float
    gbar: np.ndarray
    gunder: np.ndarray
    gap: np.ndarray
    rejection_count: int

    @property
    def n_samples(self):
        return self.gbar.size


def sample_g_at_exponential(paths, q, rng, epsilon=1e-9):
    """Evaluate (gbar, gunder, e - gbar) at e ~ Exp(q) per path.

    Draws beyond the simulated horizon are rejected and counted; the horizon
    must be at least 10/q so the rejection probability stays below e^-10.
    """
    if q <= 0:
        raise ValidationError("q must be positive")
    paths = list(paths)
    if not paths:
        raise ValidationError("need at least one path")
    horizon = min(p.grid.horizon for p in paths)
    if horizon < 10.0 / q:
        raise ValidationError(f"horizon {horizon} too short for q={q}; need >= {10.0 / q}")
    gbar, gunder, gap = [], [], []
    rejected = 0
    for path in paths:
        e = rng.exponential(1.0 / q)
        if e > path.grid.horizon:
            rejected += 1
            continue
        ordinate = path.ordinate()
        gb = last_time_at_supremum(ordinate, e, epsilon)
        gu = last_time_at_infimum(ordinate, e, epsilon)
        gbar.append(gb)
        gunder.append(gu)
        gap.append(e - gb)
    return GSamples(q, np.array(gbar), np.array(gunder), np.array(gap), rejected)


@dataclass(frozen=True)
class LaplaceEstimate:
    lam: float
    q: float
    estimate: float
    stderr: float
    n_samples: int
    rejection_count: int


def laplace_estimate(samples, lam, which="gbar", q=None, rejection_count=0):
    """Sample mean of exp(-lam * g) with its standard error.

    ``samples`` is either a GSamples bundle (``which`` picks the component)
    or a plain array of nonnegative times.
    """
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    if isinstance(samples, GSamples):
        data = getattr(samples, which)
        q = samples.q
        rejection_count = samples.rejection_count
    else:
        data = np.asarray(samples, dtype=np.float64)
        q = 0.0 if q is None else q
    if data.size == 0:
        raise ValidationError("no samples")
    vals = np.exp(-lam * data)
    stderr = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
    return LaplaceEstimate(float(lam), float(q), float(vals.mean()), stderr,
                           int(vals.size), int(rejection_count))


@dataclass(frozen=True)
class FinalMassEstimate:
    """Matrix of E[exp(-lam * gbar_T)] over a lambda grid and horizon ladder.

    The smallest-lambda / largest-horizon entry is the working proxy for the
    infinite-horizon limit; values near 1 indicate the last visit to the
    supremum stabilizes, values near 0 that it keeps growing.
    """

    lambdas: np.ndarray
    horizons: np.ndarray
    matrix: np.ndarray
    stderr: np.ndarray
    proxy: float
    lambda_monotone: bool
    horizon_monotone: bool


def final_excursion_mass_estimate(paths, lambda_grid, horizons, epsilon=1e-9,
                                  side="sup"):
    """Estimate the vanishing-lambda limit of E[exp(-lam * gbar_T)].

    lambda_grid must be decreasing and positive, horizons increasing and
    within the simulated range.  ``side='inf'`` runs the identical machinery
    on the negated ordinate (descending version).
    """
    lambdas = np.asarray(lambda_grid, dtype=np.float64)
    hs = np.asarray(horizons, dtype=np.float64)
    if lambdas.size == 0 or np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValidationError("lambda_grid must be decreasing and positive")
    if hs.size == 0 or np.any(np.diff(hs) <= 0):
        raise ValidationError("horizons must be increasing")
    paths = list(paths)
    if not paths:
        raise ValidationError("need at least one path")
    g = np.empty((len(paths), hs.size))
    for i, path in enumerate(paths):
        if path.grid.horizon < hs[-1] - 1e-9:
            raise ValidationError("path horizon shorter than requested ladder")
        g[i] = last_visit_times(path.ordinate(), hs, epsilon, side=side)
    # matrix[i, j]: lambda_i row, horizon_j column
    expvals = np.exp(-lambdas[:, None, None] * g[None, :, :])
    matrix = expvals.mean(axis=1)
    stderr = expvals.std(axis=1, ddof=1) / np.sqrt(len(paths))
    lam_mono = bool(np.all(np.diff(matrix, axis=0) >= -1e-12))
    hor_mono = bool(np.all(np.diff(matrix, axis=1) <= 1e-12))
    proxy = float(matrix[-1, -1])
    return FinalMassEstimate(lambdas, hs, matrix, stderr, proxy, lam_mono, hor_mono)


@dataclass(frozen=True)
class OccupationHistogram:
    """Ladder occupation over (modulator angle, ladder height) bins.

    Masses are excursion-clock increments, so the histogram is defined up to
    the (unspecified) local-time normalization; ``normalized`` rescales to a
    probability table.
    """

    angle_edges: np.ndarray
    height_edges: np.ndarray
    masses: np.ndarray
    total_mass: float

    def normalized(self):
        if self.total_mass <= 0:
            raise ValidationError("histogram carries no mass")
        return self.masses / self.total_mass


def occupation_measure(ladders, angle_edges, height_edges):
    """Accumulate ladder clock increments into (angle, height) bins."""
    angle_edges = np.asarray(angle_edges, dtype=np.float64)
    height_edges = np.asarray(height_edges, dtype=np.float64)
    if np.any(np.diff(angle_edges) <= 0) or np.any(np.diff(height_edges) <= 0):
        raise ValidationError("bin edges must be increasing")
    masses = np.zeros((angle_edges.size - 1, height_edges.size - 1))
    total = 0.0
    for lad in ladders:
        if len(lad) < 2:
            continue
        dm = np.diff(lad.clock).astype(np.float64)
        total += float(dm.sum())
        keep = dm > 0
        if not keep.any():
            continue
        ang = np.arctan2(lad.theta[:-1, 1], lad.theta[:-1, 0])[keep]
        h, _, _ = np.histogram2d(ang, lad.xi[:-1][keep],
                                 bins=(angle_edges, height_edges),
                                 weights=dm[keep])
        masses += h
    return OccupationHistogram(angle_edges, height_edges, masses, total)
