"""
Empirical time-reversal checks: the pathwise reversal map, an approximate
stationary initializer for the modulator built from a burn-in occupation
histogram, and the two-sample comparison of (last time at infimum) against
(horizon minus last time at supremum) under stationary starts.

The stationary law of the modulator has no closed form here, so it is
estimated: a long run's angle occupation after burn-in is binned, and starts
are drawn from the normalized histogram.  The reversal comparison is a
distributional consequence of duality, tested at the 5% asymptotic KS level
with independent sample halves on each side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MapPath, TimeGrid, UnitVector, ValidationError, seed_stream
from .fluctuation import last_visit_indices
from .models import arc_interval, simulate_map
from .stats import ks_two_sample

__all__ = [
    "time_reverse",
    "StationarySampler",
    "stationary_initializer",
    "modulator_angle_histogram",
    "ReversalReport",
    "reversal_check",
]

# offset added to the master seed stream index for draws that are not paths
AUX_STREAM_OFFSET = 1 << 40


def time_reverse(map_path, t):
    """Reversed path s -> (xi_{t-s} - xi_t, Theta_{t-s}) on the grid up to t."""
    n_t = map_path.grid.index_at(t)
    if n_t < 1:
        raise ValidationError("reversal needs t past the first grid point")
    grid = TimeGrid(map_path.grid.times[: n_t + 1].copy())
    xi = map_path.xi[n_t::-1] - map_path.xi[n_t]
    theta = map_path.theta[n_t::-1]
    return MapPath(grid, xi.copy(), theta.copy())


@dataclass(frozen=True)
class StationarySampler:
    """Draws initial modulator angles from a normalized occupation histogram."""

    angle_edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.angle_edges, dtype=np.float64)
        masses = np.asarray(self.masses, dtype=np.float64)
        if masses.size != edges.size - 1:
            raise ValidationError("need one mass per bin")
        if masses.sum() <= 0:
            raise ValidationError("empty histogram")
        object.__setattr__(self, "angle_edges", edges)
        object.__setattr__(self, "masses", masses)

    @property
    def probabilities(self):
        return self.masses / self.masses.sum()

    def sample_angles(self, n, rng):
        bins = rng.choice(self.masses.size, size=n, p=self.probabilities)
        lo = self.angle_edges[bins]
        hi = self.angle_edges[bins + 1]
        return lo + rng.random(n) * (hi - lo)

    def sample(self, n, rng):
        return [UnitVector.from_angle(a) for a in self.sample_angles(n, rng)]


def stationary_initializer(angle_edges, masses):
    """Wrap an occupation histogram as an initial-angle sampler."""
    return StationarySampler(np.asarray(angle_edges), np.asarray(masses))


def modulator_angle_histogram(config, n_paths=32, bins=256, theta0=None,
                              path_index_base=0):
    """Angle occupation of the modulator after the configured burn-in.

    Runs n_paths modulator paths to the config horizon and bins the angles
    observed at times past config.burn_in over the model's arc.
    """
    lo, hi = arc_interval(config.model)
    edges = np.linspace(lo, hi, bins + 1)
    masses = np.zeros(bins)
    for i in range(n_paths):
        path = simulate_map(config, theta0, path_index=path_index_base + i)
        keep = path.grid.times >= config.burn_in
        ang = np.arctan2(path.theta[keep, 1], path.theta[keep, 0])
        h, _ = np.histogram(ang, bins=edges)
        masses += h
    return edges, masses


def _rebin(masses, factor):
    if factor <= 1:
        return masses
    if masses.size % factor:
        raise ValidationError("rebin factor must divide the bin count")
    return masses.reshape(-1, factor).sum(axis=1)


def evolve_histogram(sampler, config, s, n, master_seed=None,
                     path_index_base=0, rebin=16):
    """Push sampler starts forward for time s and re-histogram the angles.

    Returns the total-variation distance between the sampler's histogram and
    the evolved one, both coarsened by ``rebin`` so the Monte Carlo noise
    floor of the comparison sits well below the invariance tolerance.
    Small values certify approximate invariance.
    """
    from .stats import tv_distance

    seed = config.master_seed if master_seed is None else master_seed
    rng = seed_stream(seed, AUX_STREAM_OFFSET)
    angles = sampler.sample_angles(n, rng)
    evo_cfg = config.replace(t_max=s, burn_in=0.0,
                             store_stride=max(1, config.store_stride))
    end_angles = np.empty(n)
    for i, a in enumerate(angles):
        path = simulate_map(evo_cfg, UnitVector.from_angle(a),
                            path_index=path_index_base + i)
        end_angles[i] = np.arctan2(path.theta[-1, 1], path.theta[-1, 0])
    h, _ = np.histogram(end_angles, bins=sampler.angle_edges)
    return tv_distance(_rebin(sampler.masses, rebin), _rebin(h, rebin))


@dataclass(frozen=True)
class ReversalReport:
    t: float
    n: int
    ks_stat: float
    threshold: float
    passed: bool


def reversal_check(config, t, n, sampler=None, epsilon=1e-9):
    """KS comparison of last-infimum times vs horizon-minus-last-supremum.

    Simulates 2n stationary-start paths to the config horizon; the first n
    contribute last-infimum samples at t, the second n contribute
    (t - last-supremum) samples, so the two sides are independent.  Passes
    when the KS statistic sits below the asymptotic 5% critical value.
    """
    if n < 500:
        raise ValidationError("reversal check needs n >= 500 per side")
    if t > config.t_max + 1e-9:
        raise ValidationError("t beyond simulated horizon")
    if sampler is None:
        burn_t = max(config.burn_in * 1.2, config.burn_in + 5.0)
        burn_steps = int(round(burn_t / config.dt))
        stride = 10 if burn_steps % 10 == 0 else 1
        burn_cfg = config.replace(t_max=burn_t, store_stride=stride)
        edges, masses = modulator_angle_histogram(burn_cfg)
        sampler = stationary_initializer(edges, masses)
    rng = seed_stream(config.master_seed, AUX_STREAM_OFFSET + 1)
    angles = sampler.sample_angles(2 * n, rng)
    gunder = np.empty(n)
    gap = np.empty(n)
    for i in range(2 * n):
        path = simulate_map(config, UnitVector.from_angle(angles[i]), path_index=i)
        # work in grid-index units: both samples then live on one exact
        # float lattice, so distribution atoms line up in the KS sup
        n_t = path.grid.index_at(t)
        dt_grid = path.grid.times[1] - path.grid.times[0]
        if i < n:
            gunder[i] = dt_grid * last_visit_indices(
                path.ordinate(), [t], epsilon, "inf")[0]
        else:
            gap[i - n] = dt_grid * (n_t - last_visit_indices(
                path.ordinate(), [t], epsilon, "sup")[0])
    d, crit = ks_two_sample(gunder, gap)
    return ReversalReport(float(t), int(n), d, crit, bool(d < crit))
