"""
Concrete processes on the unit circle and their plane-valued counterparts.

Two families are implemented.  The free Bessel family couples an ordinate
with constant drift 2 to a circle-valued modulator whose coefficients are

    b(x, y) = (1/x - 5x/2, 1/y - 5y/2),   sigma(x, y) = [[y^2, -xy], [-xy, x^2]],

living on the open first-quadrant arc.  The radial Dunkl family is driven by
root-system sums A_i = sum_r k r_i / <r, theta> on the chamber arc of the
chosen root system, with the same diffusion matrix.  In both cases sigma is
the tangential projector on the circle (sigma theta = 0, sigma^2 = sigma),
and the drift carries the curvature correction that keeps proposals on the
sphere to first order; integration renormalizes after every step anyway.

The plane-valued simulators: the free Bessel components are sampled exactly
as norms of 3-d Brownian motions (no discretization bias), while the radial
Dunkl process integrates dX = dW + sum_r k r / <r, X> dt by Euler steps with
wall-rejection retries.

The drift-condition function V (x^3 + y^3, squared for the D2 system) can be
pushed through the generator three ways: tabulated closed forms
(:func:`lyapunov_LV_analytic`), closed forms expanded symbolically from the
coefficients (:func:`lyapunov_LV_from_coeffs`), and central finite
differences (:func:`apply_generator`).  The finite-difference route is the
arbiter when the routes disagree; :func:`verify_lyapunov` runs the
comparison and never passes silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels
from .core import (MapPath, NumericalError, SimulationConfig, SsmpPath,
                   UnitVector, ValidationError, WallError, seed_stream)
from .oracle import OracleSpec

__all__ = [
    "RootSystem",
    "FreeBessel2D",
    "RadialDunkl",
    "ModelSpec",
    "model_name",
    "arc_interval",
    "arc_midpoint",
    "arc_points",
    "bessel_modulator_coeffs",
    "dunkl_A",
    "dunkl_modulator_drift",
    "dunkl_ordinate_drift",
    "modulator_coeffs",
    "sigma_matrix",
    "simulate_bessel_map",
    "simulate_dunkl_map",
    "simulate_map",
    "simulate_free_bessel_ssmp",
    "simulate_dunkl_ssmp",
    "lyapunov_V",
    "lyapunov_LV_analytic",
    "lyapunov_LV_from_coeffs",
    "apply_generator",
    "verify_lyapunov",
    "LyapunovReport",
]

RESERVE_DRAWS = 512
GOLDEN_FRAC = 0.6180339887498949

_ROOT_TABLES = {
    "A1": [(1.0, -1.0)],
    "B2": [(1.0, -1.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)],
    "C2": [(1.0, -1.0), (1.0, 1.0), (2.0, 0.0), (0.0, 2.0)],
    "D2": [(1.0, -1.0), (1.0, 1.0)],
}

# open modulator arcs (angle intervals) of the chamber for each system
_ARCS = {
    "A1": (-3 * math.pi / 4, math.pi / 4),
    "B2": (0.0, math.pi / 4),
    "C2": (0.0, math.pi / 4),
    "D2": (-math.pi / 4, math.pi / 4),
}


@dataclass(frozen=True)
class RootSystem:
    kind: str
    positive_roots: np.ndarray

    def __post_init__(self):
        if self.kind not in _ROOT_TABLES:
            raise ValidationError(f"unknown root system {self.kind!r}")
        expected = np.array(_ROOT_TABLES[self.kind])
        roots = np.asarray(self.positive_roots, dtype=np.float64)
        if roots.shape != expected.shape or not np.array_equal(roots, expected):
            raise ValidationError(f"positive roots do not match type {self.kind}")
        roots.flags.writeable = False
        object.__setattr__(self, "positive_roots", roots)

    @classmethod
    def from_name(cls, kind):
        return cls(kind, np.array(_ROOT_TABLES[kind]))

    def gamma(self, k):
        """Sum of the multiplicity k over the positive roots."""
        if k <= 0:
            raise ValidationError("k must be positive")
        return k * len(self.positive_roots)


@dataclass(frozen=True)
class FreeBessel2D:
    """Two independent dimension-3 radial components; ordinate drift 2."""


@dataclass(frozen=True)
class RadialDunkl:
    root_system: RootSystem
    k: float

    def __post_init__(self):
        if self.k < 0.5:
            raise ValidationError("radial Dunkl multiplicity requires k >= 1/2")


ModelSpec = Union[FreeBessel2D, RadialDunkl, OracleSpec]


def model_name(model):
    if isinstance(model, FreeBessel2D):
        return "free-bessel"
    if isinstance(model, RadialDunkl):
        return f"dunkl-{model.root_system.kind.lower()}"
    if isinstance(model, OracleSpec):
        return "oracle"
    raise ValidationError(f"unknown model {model!r}")


def arc_interval(model):
    """Open angle interval of the modulator arc."""
    if isinstance(model, FreeBessel2D):
        return 0.0, math.pi / 2
    if isinstance(model, RadialDunkl):
        return _ARCS[model.root_system.kind]
    raise ValidationError("model has no continuous arc")


def arc_midpoint(model):
    lo, hi = arc_interval(model)
    return UnitVector.from_angle(0.5 * (lo + hi))


def arc_points(model, n, margin=1e-3):
    """Deterministic quasi-random angles filling the open arc.

    Golden-ratio rotation keeps consecutive points well spread; the margin
    keeps every point clear of the walls.
    """
    lo, hi = arc_interval(model)
    lo, hi = lo + margin, hi - margin
    fracs = np.mod(GOLDEN_FRAC * np.arange(1, n + 1), 1.0)
    return lo + fracs * (hi - lo)


def _theta_xy(theta):
    if isinstance(theta, UnitVector):
        arr = theta.components
    else:
        arr = np.asarray(theta, dtype=np.float64)
    if arr.shape != (2,):
        raise ValidationError("theta must be a 2-vector")
    return float(arr[0]), float(arr[1])


def sigma_matrix(theta):
    """Diffusion matrix [[y^2, -xy], [-xy, x^2]]: tangential projector."""
    x, y = _theta_xy(theta)
    return np.array([[y * y, -x * y], [-x * y, x * x]])


def bessel_modulator_coeffs(theta, wall_delta=1e-6):
    """Drift and diffusion of the free Bessel modulator at theta.

    Requires min(x, y) > wall_delta; the drift blows up on the axes.
    """
    x, y = _theta_xy(theta)
    if min(x, y) <= wall_delta:
        coord = "x" if x <= y else "y"
        raise WallError(f"theta too close to {coord}=0 wall: ({x}, {y})", coord)
    b = np.array([1.0 / x - 2.5 * x, 1.0 / y - 2.5 * y])
    return b, sigma_matrix(theta)


def dunkl_A(theta, root_system, k, wall_delta=1e-6):
    """Root-system drift sum A_i = sum_r k r_i / <r, theta>."""
    x, y = _theta_xy(theta)
    a = np.zeros(2)
    for root in root_system.positive_roots:
        dot = root[0] * x + root[1] * y
        if abs(dot) <= wall_delta:
            raise WallError(
                f"theta on wall of root {tuple(root)}: <r, theta>={dot}",
                tuple(root))
        a += k * root / dot
    return a


def dunkl_modulator_drift(theta, root_system, k, wall_delta=1e-6):
    """Modulator drift A - theta (theta . A) - theta/2 on the chamber arc."""
    x, y = _theta_xy(theta)
    a = dunkl_A(theta, root_system, k, wall_delta)
    ta = x * a[0] + y * a[1]
    return np.array([a[0] - x * ta - 0.5 * x, a[1] - y * ta - 0.5 * y])


def dunkl_ordinate_drift(theta, root_system, k, n=2, wall_delta=1e-6):
    """Ordinate drift theta . A + (n - 2); constant in theta for fixed k."""
    x, y = _theta_xy(theta)
    a = dunkl_A(theta, root_system, k, wall_delta)
    return float(x * a[0] + y * a[1] + n - 2)


def modulator_coeffs(model, theta, wall_delta=1e-6):
    """(drift, diffusion) of the model's circle-valued modulator."""
    if isinstance(model, FreeBessel2D):
        return bessel_modulator_coeffs(theta, wall_delta)
    if isinstance(model, RadialDunkl):
        drift = dunkl_modulator_drift(theta, model.root_system, model.k, wall_delta)
        return drift, sigma_matrix(theta)
    raise ValidationError("model has no modulator SDE")


def _inside_arc(model, theta, wall_delta):
    x, y = _theta_xy(theta)
    if isinstance(model, FreeBessel2D):
        return min(x, y) > wall_delta
    for root in model.root_system.positive_roots:
        if root[0] * x + root[1] * y <= wall_delta:
            return False
    return True


def _check_start(model, theta, wall_delta):
    if not _inside_arc(model, theta, wall_delta):
        raise ValidationError(
            f"start point {_theta_xy(theta)} not strictly inside the arc of "
            f"{model_name(model)}")


def _run_map_kernel(model, config, theta0, path_index):
    n_steps = config.n_steps
    stride = config.store_stride
    n_stored = n_steps // stride + 1
    rng = seed_stream(config.master_seed, path_index)
    z = rng.standard_normal((n_steps, 2))
    reserve = rng.standard_normal((RESERVE_DRAWS, 2))
    out_xi = np.empty(n_stored)
    out_theta = np.empty((n_stored, 2))
    x0, y0 = _theta_xy(theta0)
    if isinstance(model, FreeBessel2D):
        rej, step, status = _kernels.bessel_map_kernel(
            x0, y0, config.dt, n_steps, stride, z, reserve,
            config.wall_delta, out_xi, out_theta)
    else:
        rej, step, status = _kernels.dunkl_map_kernel(
            x0, y0, config.dt, n_steps, stride, z, reserve,
            config.wall_delta, model.root_system.positive_roots, model.k,
            out_xi, out_theta)
    if status != 0:
        reason = "wall retries exhausted" if status == 1 else "noise reserve exhausted"
        raise NumericalError(
            f"{model_name(model)} path {path_index} failed at t="
            f"{step * config.dt:.6g}: {reason}")
    return MapPath(config.stored_grid(), out_xi, out_theta,
                   wall_rejections=int(rej))


def simulate_bessel_map(config, theta0=None, path_index=0):
    """Euler path of the free Bessel MAP with shared ordinate increments."""
    if not isinstance(config.model, FreeBessel2D):
        raise ValidationError("config.model must be FreeBessel2D")
    theta0 = arc_midpoint(config.model) if theta0 is None else theta0
    _check_start(config.model, theta0, config.wall_delta)
    return _run_map_kernel(config.model, config, theta0, path_index)


def simulate_dunkl_map(config, theta0=None, path_index=0):
    """Euler path of the radial Dunkl MAP for the configured root system."""
    if not isinstance(config.model, RadialDunkl):
        raise ValidationError("config.model must be RadialDunkl")
    theta0 = arc_midpoint(config.model) if theta0 is None else theta0
    _check_start(config.model, theta0, config.wall_delta)
    return _run_map_kernel(config.model, config, theta0, path_index)


def simulate_map(config, theta0=None, path_index=0):
    """Dispatch to the configured model's MAP simulator."""
    if isinstance(config.model, FreeBessel2D):
        return simulate_bessel_map(config, theta0, path_index)
    if isinstance(config.model, RadialDunkl):
        return simulate_dunkl_map(config, theta0, path_index)
    raise ValidationError("no continuous MAP simulator for this model")


def simulate_free_bessel_ssmp(config, x0, path_index=0):
    """Exact plane-valued free Bessel path.

    Each component is the norm of a 3-d Brownian motion started at
    (x0_i, 0, 0), sampled exactly at the stored grid times: the law at the
    grid carries no discretization error whatever dt is.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (2,) or np.any(x0 <= 0):
        raise ValidationError("x0 must be componentwise positive in the plane")
    grid = config.stored_grid()
    n = len(grid)
    rng = seed_stream(config.master_seed, path_index)
    dt_store = grid.times[1] - grid.times[0] if n > 1 else 0.0
    increments = rng.standard_normal((n - 1, 3, 2)) * math.sqrt(dt_store)
    w = np.zeros((n, 3, 2))
    np.cumsum(increments, axis=0, out=w[1:])
    w[:, 0, 0] += x0[0]
    w[:, 0, 1] += x0[1]
    x = np.linalg.norm(w, axis=1)
    return SsmpPath(grid, x)


def simulate_dunkl_ssmp(config, x0, path_index=0):
    """Euler path of dX = dW + sum_r k r / <r, X> dt in the open chamber."""
    if not isinstance(config.model, RadialDunkl):
        raise ValidationError("config.model must be RadialDunkl")
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (2,):
        raise ValidationError("x0 must be a plane point")
    roots = config.model.root_system.positive_roots
    if np.any(roots @ x0 <= config.wall_delta):
        raise ValidationError("x0 not strictly inside the open chamber")
    n_steps = config.n_steps
    stride = config.store_stride
    rng = seed_stream(config.master_seed, path_index)
    z = rng.standard_normal((n_steps, 2))
    reserve = rng.standard_normal((RESERVE_DRAWS, 2))
    out_x = np.empty((n_steps // stride + 1, 2))
    rej, step, status = _kernels.dunkl_ssmp_kernel(
        float(x0[0]), float(x0[1]), config.dt, n_steps, stride, z, reserve,
        config.wall_delta, roots, config.model.k, out_x)
    if status != 0:
        reason = "wall retries exhausted" if status == 1 else "noise reserve exhausted"
        raise NumericalError(
            f"dunkl ssmp path {path_index} failed at t={step * config.dt:.6g}: {reason}")
    return SsmpPath(config.stored_grid(), out_x)


# ---------------------------------------------------------------------------
# Drift-condition function V and the generator applied to it.
# ---------------------------------------------------------------------------

def _is_d2(model):
    return isinstance(model, RadialDunkl) and model.root_system.kind == "D2"


def lyapunov_V(model, point):
    """Drift-condition function: x^3 + y^3, squared for the D2 system."""
    x, y = float(point[0]), float(point[1])
    v = x ** 3 + y ** 3
    return v * v if _is_d2(model) else v


def lyapunov_LV_analytic(model, theta):
    """Tabulated closed-form value of the generator applied to V.

    These expressions are the analytic route of a dual-route check.  They do
    not all agree with the finite-difference route (see verify_lyapunov);
    where the routes disagree the finite-difference value is authoritative
    and :func:`lyapunov_LV_from_coeffs` carries the matching closed form.
    """
    x, y = _theta_xy(theta)
    if isinstance(model, FreeBessel2D):
        return 0.5 * (x + y) * (-21.0 + 54.0 * x * y)
    if not isinstance(model, RadialDunkl):
        raise ValidationError("no drift-condition form for this model")
    k = model.k
    kind = model.root_system.kind
    if kind == "A1":
        return 1.5 * (x + y) * ((4 * k + 2) * x * y - 1) + (x + y) * (12 * x * y - 3)
    if kind == "B2":
        return (6 * k / (x + y) * (8 * x * x * y * y - 1)
                - 1.5 * (x + y) * (x - y) ** 2 + (x + y) * (12 * x * y - 3))
    if kind == "C2":
        return (12 * k / (x + y) * (6 * x * x * y * y - 1)
                - 1.5 * (x - y) ** 2 * (x + y) + (x + y) * (12 * x * y - 3))
    # D2
    p = x * y
    return (48 * k * p * p * (1 - p) + 3 * (4 * p * p - 1) * (1 - p)
            + 6 * (x + y) ** 2 * (1 - p) * (4 * p - 1) + (x + y) * (12 * p - 3))


def lyapunov_LV_from_coeffs(model, theta):
    """Closed form of the generator applied to V, expanded from (b, sigma).

    Obtained symbolically (see scripts/derive_lyapunov_forms.py) and equal to
    the finite-difference generator up to rounding on the whole arc.
    """
    x, y = _theta_xy(theta)
    p = x * y
    if isinstance(model, FreeBessel2D):
        return 0.5 * (x + y) * (21.0 * p - 9.0)
    if not isinstance(model, RadialDunkl):
        raise ValidationError("no drift-condition form for this model")
    k = model.k
    kind = model.root_system.kind
    if kind == "A1":
        return 1.5 * (x + y) * ((2 * k + 3) * p - 1)
    if kind in ("B2", "C2"):
        # identical dynamics: the (2,0)/(0,2) roots of C2 contribute the same
        # drift as the (1,0)/(0,1) roots of B2 when the multiplicity is scalar
        return 3 * k / (x + y) + (x + y) * ((12 * k + 4.5) * p - 6 * k - 1.5)
    # D2 (V is squared)
    return 24 * k * p * p * (1 - p) + 3 * (8 * p * p + 2 * p - 1 - 12 * p ** 3)


_sigma_idempotent_checked = set()


def _assert_sigma_idempotent(model):
    """a = sigma sigma^T collapses to sigma on the circle; checked once."""
    key = model_name(model)
    if key in _sigma_idempotent_checked:
        return
    for phi in arc_points(model, 16):
        s = sigma_matrix(UnitVector.from_angle(phi))
        if not np.allclose(s @ s, s, atol=1e-12):
            raise NumericalError(f"sigma not idempotent for {key} at angle {phi}")
    _sigma_idempotent_checked.add(key)


def apply_generator(model, V, theta, h=1e-5, wall_delta=1e-6):
    """Finite-difference generator sum b_i d_i V + (1/2) sum a_ij d_ij V.

    Central differences with step h; a = sigma after the one-time idempotence
    assertion.  V is any scalar field on the plane.
    """
    _assert_sigma_idempotent(model)
    x, y = _theta_xy(theta)
    b, sigma = modulator_coeffs(model, theta, wall_delta)
    vpp = V((x + h, y))
    vpm = V((x - h, y))
    vqp = V((x, y + h))
    vqm = V((x, y - h))
    v0 = V((x, y))
    dx = (vpp - vpm) / (2 * h)
    dy = (vqp - vqm) / (2 * h)
    dxx = (vpp - 2 * v0 + vpm) / (h * h)
    dyy = (vqp - 2 * v0 + vqm) / (h * h)
    dxy = (V((x + h, y + h)) - V((x + h, y - h))
           - V((x - h, y + h)) + V((x - h, y - h))) / (4 * h * h)
    return float(b[0] * dx + b[1] * dy
                 + 0.5 * (sigma[0, 0] * dxx + 2 * sigma[0, 1] * dxy
                          + sigma[1, 1] * dyy))


@dataclass(frozen=True)
class LyapunovReport:
    """Dual-route comparison of the generator applied to V on the arc."""

    model: str
    source: str
    n_points: int
    max_rel_err: float
    worst_angle: float
    tolerance: float
    agrees: bool
    values_closed: np.ndarray
    values_fd: np.ndarray
    angles: np.ndarray


def verify_lyapunov(model, n_points=100, h=1e-5, tolerance=1e-5,
                    source="analytic", margin=1e-3):
    """Compare a closed-form route against the finite-difference generator.

    source='analytic' checks the tabulated forms, source='coeffs' the forms
    expanded from the SDE coefficients.  The report always carries both value
    arrays so a disagreement can be inspected rather than silently passed.
    """
    closed = lyapunov_LV_analytic if source == "analytic" else lyapunov_LV_from_coeffs
    angles = arc_points(model, n_points, margin)
    vc = np.empty(n_points)
    vf = np.empty(n_points)
    for i, phi in enumerate(angles):
        theta = UnitVector.from_angle(phi)
        vc[i] = closed(model, theta)
        vf[i] = apply_generator(model, lambda p: lyapunov_V(model, p), theta, h)
    rel = np.abs(vc - vf) / (1.0 + np.abs(vc))
    worst = int(np.argmax(rel))
    return LyapunovReport(model_name(model), source, n_points,
                          float(rel[worst]), float(angles[worst]),
                          tolerance, bool(rel[worst] <= tolerance),
                          vc, vf, angles)
