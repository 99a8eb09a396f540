"""
Time-change bijection between circle-modulated additive paths and
plane-valued self-similar paths, in both directions, on sampled data.

Forward: X_t = Theta_{tau_t} exp(xi_{tau_t}) where tau inverts the cumulative
integral of exp(alpha xi).  Backward: xi_t = log |X_{A_t}|, Theta_t =
X_{A_t} / |X_{A_t}| where A inverts the cumulative integral of |X|^-alpha.

Both cumulative integrals use the trapezoid rule and their generalized
inverses are piecewise linear, so the tables are monotone by construction
and second-order accurate on smooth paths.  Between grid points the ordinate
is interpolated linearly and the modulator by normalized linear
interpolation.  Output grids are caller-chosen; the default mirrors the
input grid length over the available mass (the transform warps time, so no
single grid is canonical).  Output points at or beyond the available mass
are marked killed: for conservative inputs this flags data truncation, not
death of the underlying process.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (MapPath, NumericalError, ScalarPath, SsmpPath, TimeGrid,
                   ValidationError)

__all__ = [
    "TimeChangeTable",
    "exp_integral",
    "norm_integral",
    "tau_table",
    "A_table",
    "time_change_tau",
    "time_change_A",
    "map_to_ssmp",
    "ssmp_to_map",
]

EXP_OVERFLOW = 700.0
MIN_NORM = 1e-12


@dataclass(frozen=True)
class TimeChangeTable:
    """Monotone coupling (source time, target time) of a time change."""

    source_times: np.ndarray
    target_times: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.source_times, dtype=np.float64)
        t = np.asarray(self.target_times, dtype=np.float64)
        if s.shape != t.shape or s.ndim != 1:
            raise ValidationError("table sequences must be equal-length 1-d")
        if np.any(np.diff(s) < 0) or np.any(np.diff(t) < 0):
            raise ValidationError("table sequences must be nondecreasing")
        object.__setattr__(self, "source_times", s)
        object.__setattr__(self, "target_times", t)

    @property
    def mass(self):
        return float(self.source_times[-1])

    def __call__(self, t):
        """Piecewise-linear evaluation source -> target."""
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < -1e-12) or np.any(t > self.source_times[-1] + 1e-12):
            raise ValidationError("query beyond table range")
        return np.interp(t, self.source_times, self.target_times)


def exp_integral(map_path, alpha):
    """Cumulative trapezoid integral of exp(alpha xi) on the path grid."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    xi = map_path.xi
    peak = float(np.max(alpha * xi))
    if peak > EXP_OVERFLOW:
        raise NumericalError(
            f"exp(alpha xi) overflows: max alpha*xi = {peak:.3g} "
            f"(max xi = {float(np.max(xi)):.6g})")
    integrand = np.exp(alpha * xi)
    cum = np.zeros(len(map_path))
    dt = np.diff(map_path.grid.times)
    np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), out=cum[1:])
    return ScalarPath(map_path.grid, cum)


def norm_integral(ssmp_path, alpha):
    """Cumulative trapezoid integral of |X|^-alpha on the path grid."""
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    norms = ssmp_path.norms()
    if np.any(norms < MIN_NORM):
        raise NumericalError(f"path norm below {MIN_NORM}; transform undefined")
    integrand = norms ** (-alpha)
    cum = np.zeros(len(ssmp_path))
    dt = np.diff(ssmp_path.grid.times)
    np.cumsum(0.5 * dt * (integrand[1:] + integrand[:-1]), out=cum[1:])
    return ScalarPath(ssmp_path.grid, cum)


def tau_table(map_path, alpha):
    """Graph of tau: self-similar time -> additive time."""
    cum = exp_integral(map_path, alpha)
    return TimeChangeTable(cum.values, map_path.grid.times)


def A_table(ssmp_path, alpha):
    """Graph of A: additive time -> self-similar time."""
    cum = norm_integral(ssmp_path, alpha)
    return TimeChangeTable(cum.values, ssmp_path.grid.times)


def _invert(cum_values, grid_times, targets, what):
    """Piecewise-linear generalized inverse of a cumulative integral."""
    targets = np.asarray(targets, dtype=np.float64)
    total = cum_values[-1]
    if np.any(targets > total + 1e-12) or np.any(targets < -1e-12):
        bad = targets[(targets > total + 1e-12) | (targets < -1e-12)][0]
        raise ValidationError(
            f"{what} query {bad:.6g} outside available mass [0, {total:.6g}]")
    idx = np.clip(np.searchsorted(cum_values, targets, side="right"),
                  1, cum_values.size - 1)
    c0 = cum_values[idx - 1]
    c1 = cum_values[idx]
    frac = np.where(c1 > c0, (targets - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.0)
    return grid_times[idx - 1] + frac * (grid_times[idx] - grid_times[idx - 1])


def time_change_tau(map_path, alpha, t):
    """tau_t: generalized inverse of the exp integral at a single time."""
    cum = exp_integral(map_path, alpha)
    if t >= cum.values[-1]:
        raise ValidationError(
            f"t={t:.6g} at or beyond total mass {cum.values[-1]:.6g} "
            "(the transformed path is dead there)")
    return float(_invert(cum.values, map_path.grid.times, [t], "tau")[0])


def time_change_A(ssmp_path, alpha, t):
    """A_t: generalized inverse of the norm integral at a single time."""
    cum = norm_integral(ssmp_path, alpha)
    if t >= cum.values[-1]:
        raise ValidationError(
            f"t={t:.6g} at or beyond total mass {cum.values[-1]:.6g}")
    return float(_invert(cum.values, ssmp_path.grid.times, [t], "A")[0])


def _default_grid(total_mass, n_points):
    step = total_mass / n_points
    return TimeGrid(step * np.arange(n_points))


def _interp_theta(grid_times, theta, query_times):
    """Normalized linear interpolation of unit-vector rows."""
    out = np.empty((query_times.size, theta.shape[1]))
    for d in range(theta.shape[1]):
        out[:, d] = np.interp(query_times, grid_times, theta[:, d])
    norms = np.linalg.norm(out, axis=1)
    if np.any(norms < MIN_NORM):
        raise NumericalError("modulator interpolation collapsed to zero")
    return out / norms[:, None]


def map_to_ssmp(map_path, alpha, output_grid=None):
    """Transform an additive path into its self-similar counterpart.

    Output times at or beyond the accumulated mass are marked killed; with
    the default grid (same length as the input, covering the mass) no
    output point is killed.
    """
    cum = exp_integral(map_path, alpha)
    total = float(cum.values[-1])
    if output_grid is None:
        output_grid = _default_grid(total, len(map_path))
    times = output_grid.times
    alive = times < total
    kill_index = None if alive.all() else int(np.flatnonzero(~alive)[0])
    t_alive = times[alive]
    taus = _invert(cum.values, map_path.grid.times, t_alive, "tau")
    xi = np.interp(taus, map_path.grid.times, map_path.xi)
    theta = _interp_theta(map_path.grid.times, map_path.theta, taus)
    x = np.full((times.size, map_path.dim), np.nan)
    x[alive] = theta * np.exp(xi)[:, None]
    return SsmpPath(output_grid, x, kill_index=kill_index)


def ssmp_to_map(ssmp_path, alpha, output_grid=None):
    """Transform a self-similar path back into additive coordinates."""
    cum = norm_integral(ssmp_path, alpha)
    total = float(cum.values[-1])
    if output_grid is None:
        output_grid = _default_grid(total, len(ssmp_path))
    times = output_grid.times
    alive = times < total
    kill_index = None if alive.all() else int(np.flatnonzero(~alive)[0])
    t_alive = times[alive]
    a_vals = _invert(cum.values, ssmp_path.grid.times, t_alive, "A")
    x = np.empty((t_alive.size, ssmp_path.dim))
    for d in range(ssmp_path.dim):
        x[:, d] = np.interp(a_vals, ssmp_path.grid.times, ssmp_path.x[:, d])
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms < MIN_NORM):
        raise NumericalError("interpolated norm below tolerance in ssmp_to_map")
    xi = np.full(times.size, np.nan)
    theta = np.full((times.size, ssmp_path.dim), np.nan)
    xi[alive] = np.log(norms)
    theta[alive] = x / norms[:, None]
    return MapPath(output_grid, xi, theta, kill_index=kill_index)
