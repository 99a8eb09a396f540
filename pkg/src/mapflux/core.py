"""
Shared containers and plumbing: time grids, path objects, run configuration,
the deterministic per-path seeding contract, and the CSV path format.

Everything here is immutable after construction and safe to share across
worker processes.  Randomness never lives in these objects; generators are
derived per path via :func:`seed_stream` and consumed locally.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - annotation only
    from .models import ModelSpec

__all__ = [
    "MapfluxError",
    "ValidationError",
    "NumericalError",
    "WallError",
    "TimeGrid",
    "ScalarPath",
    "UnitVector",
    "MapPath",
    "SsmpPath",
    "SimulationConfig",
    "make_time_grid",
    "seed_stream",
    "validate_map_path",
    "PathDiagnostics",
    "write_map_path_csv",
    "read_map_path_csv",
    "write_ssmp_path_csv",
    "read_ssmp_path_csv",
    "write_sidecar",
    "read_sidecar",
]

UNIT_NORM_TOL = 1e-9
_MASK64 = (1 << 64) - 1


class MapfluxError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MapfluxError):
    """Bad configuration or violated precondition (CLI exit code 1)."""


class NumericalError(MapfluxError):
    """Overflow, NaN, or retry exhaustion during numerics (CLI exit code 2)."""


class WallError(NumericalError):
    """State too close to a chamber wall for the coefficients to be evaluated.

    ``detail`` names the offending coordinate or root.
    """

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail


def _as_float_array(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing instants starting at 0.

    Storage grids are uniform in v1; the type itself only requires monotone
    times so that time-change tables and tests can reuse it.
    """

    times: np.ndarray

    def __post_init__(self):
        arr = _as_float_array(self.times, "times")
        if arr.ndim != 1 or arr.size == 0:
            raise ValidationError("times must be a nonempty 1-d sequence")
        if arr[0] != 0.0:
            raise ValidationError("times must start at 0")
        if arr.size > 1 and not np.all(np.diff(arr) > 0):
            raise ValidationError("times must be strictly increasing")
        arr.flags.writeable = False
        object.__setattr__(self, "times", arr)

    def __len__(self):
        return self.times.size

    @property
    def horizon(self):
        return float(self.times[-1])

    def index_at(self, t):
        """Largest grid index whose time is <= t."""
        if t < 0 or t > self.times[-1] + 1e-12:
            raise ValidationError(f"time {t} outside grid [0, {self.times[-1]}]")
        return int(np.searchsorted(self.times, t + 1e-12, side="right") - 1)


def make_time_grid(dt, t_max):
    """Uniform grid {0, dt, 2 dt, ...} whose last point is floor(t_max/dt)*dt."""
    if not (dt > 0 and t_max > 0):
        raise ValidationError("dt and t_max must be positive")
    if dt > t_max:
        raise ValidationError("dt must not exceed t_max")
    n = int(math.floor(t_max / dt + 1e-9))
    return TimeGrid(dt * np.arange(n + 1))


@dataclass(frozen=True)
class ScalarPath:
    """Real-valued path sampled on a grid (ordinates, reflected paths, ...)."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = _as_float_array(self.values, "values")
        if arr.shape != (len(self.grid),):
            raise ValidationError("values and grid must have equal length")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return len(self.grid)


@dataclass(frozen=True)
class UnitVector:
    """Point on the unit sphere, renormalized on construction."""

    components: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.components, dtype=np.float64).copy()
        norm = float(np.linalg.norm(arr))
        if not np.isfinite(norm) or norm == 0.0:
            raise ValidationError("cannot normalize a zero or non-finite vector")
        arr /= norm
        arr.flags.writeable = False
        object.__setattr__(self, "components", arr)

    def __len__(self):
        return self.components.size

    @property
    def angle(self):
        """Planar angle atan2(y, x); only meaningful for 2-d vectors."""
        return float(math.atan2(self.components[1], self.components[0]))

    @classmethod
    def from_angle(cls, phi):
        return cls(np.array([math.cos(phi), math.sin(phi)]))


def _check_kill_index(kill_index, n):
    if kill_index is None:
        return None
    ki = int(kill_index)
    if not 0 <= ki < n:
        raise ValidationError(f"kill_index {ki} outside grid of length {n}")
    return ki


@dataclass(frozen=True)
class MapPath:
    """Sampled trajectory of (ordinate, modulator) with optional kill index.

    ``theta`` has one row per grid point; rows are unit vectors up to the
    renormalization tolerance.  Entries at or beyond ``kill_index`` are
    meaningless and must not be read.
    """

    grid: TimeGrid
    xi: np.ndarray
    theta: np.ndarray
    kill_index: Optional[int] = None
    wall_rejections: int = 0

    def __post_init__(self):
        n = len(self.grid)
        xi = np.asarray(self.xi, dtype=np.float64)
        theta = np.asarray(self.theta, dtype=np.float64)
        if xi.shape != (n,):
            raise ValidationError("xi and grid must have equal length")
        if theta.ndim != 2 or theta.shape[0] != n:
            raise ValidationError("theta must be (len(grid), d)")
        alive = slice(None) if self.kill_index is None else slice(0, self.kill_index)
        if not np.all(np.isfinite(xi[alive])):
            raise ValidationError("xi contains non-finite entries before kill_index")
        if not np.all(np.isfinite(theta[alive])):
            raise ValidationError("theta contains non-finite entries before kill_index")
        xi.flags.writeable = False
        theta.flags.writeable = False
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "kill_index", _check_kill_index(self.kill_index, n))

    def __len__(self):
        return len(self.grid)

    @property
    def dim(self):
        return self.theta.shape[1]

    def ordinate(self):
        return ScalarPath(self.grid, self.xi)

    def negated(self):
        """Same modulator, ordinate flipped in sign (descending machinery)."""
        return MapPath(self.grid, -self.xi, self.theta, self.kill_index,
                       self.wall_rejections)


@dataclass(frozen=True)
class SsmpPath:
    """Sampled self-similar trajectory in R^d away from the origin."""

    grid: TimeGrid
    x: np.ndarray
    kill_index: Optional[int] = None

    def __post_init__(self):
        n = len(self.grid)
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] != n:
            raise ValidationError("x must be (len(grid), d)")
        alive = slice(None) if self.kill_index is None else slice(0, self.kill_index)
        live = x[alive]
        if not np.all(np.isfinite(live)):
            raise ValidationError("x contains non-finite entries before kill_index")
        if live.size and np.any(np.linalg.norm(live, axis=1) == 0.0):
            raise ValidationError("x hits the origin before kill_index")
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "kill_index", _check_kill_index(self.kill_index, n))

    def __len__(self):
        return len(self.grid)

    @property
    def dim(self):
        return self.x.shape[1]

    def norms(self):
        return np.linalg.norm(self.x, axis=1)


@dataclass(frozen=True)
class SimulationConfig:
    """Numerical parameters of one run.

    ``store_stride`` thins storage: integration always advances in steps of
    ``dt`` but only every store_stride-th point is kept, so the stored grid is
    uniform with spacing dt * store_stride.  The stride must divide the step
    count.
    """

    model: "ModelSpec"
    dt: float
    t_max: float
    n_paths: int = 1
    master_seed: int = 0
    alpha: float = 2.0
    epsilon_zero: float = 1e-9
    burn_in: float = 0.0
    wall_delta: float = 1e-6
    store_stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.t_max > 0 and self.dt < self.t_max + 1e-15):
            raise ValidationError("need 0 < dt < t_max")
        if self.n_paths < 1:
            raise ValidationError("n_paths must be positive")
        if self.alpha <= 0:
            raise ValidationError("alpha must be positive")
        if self.epsilon_zero <= 0:
            raise ValidationError("epsilon_zero must be positive")
        if self.wall_delta <= 0:
            raise ValidationError("wall_delta must be positive")
        if self.burn_in < 0:
            raise ValidationError("burn_in must be nonnegative")
        if self.store_stride < 1:
            raise ValidationError("store_stride must be >= 1")
        if self.n_steps % self.store_stride != 0:
            raise ValidationError("store_stride must divide the number of steps")

    @property
    def n_steps(self):
        return int(round(self.t_max / self.dt))

    def stored_grid(self):
        return make_time_grid(self.dt * self.store_stride,
                              self.n_steps * self.dt + 0.5 * self.dt)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


def seed_stream(master_seed, path_index):
    """Independent, schedule-invariant random stream for one path.

    The generator is Philox keyed with the two 64-bit words
    (master_seed mod 2^64, path_index); distinct key pairs give statistically
    independent counter-based streams, so the draw sequence of a path depends
    only on (master_seed, path_index) and never on worker count or order.
    """
    if path_index < 0:
        raise ValidationError("path_index must be nonnegative")
    key = np.array([master_seed & _MASK64, int(path_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class PathDiagnostics:
    """Pure report from :func:`validate_map_path`; never raises."""

    ok: bool
    max_unit_norm_deviation: float
    first_nonfinite_index: Optional[int]
    first_norm_violation_index: Optional[int]
    grid_monotone: bool

    def __bool__(self):
        return self.ok


def validate_map_path(path, tol=UNIT_NORM_TOL):
    """Check unit-norm, finiteness, and grid monotonicity of a MapPath."""
    end = len(path) if path.kill_index is None else path.kill_index
    xi = path.xi[:end]
    theta = path.theta[:end]
    finite = np.isfinite(xi) & np.all(np.isfinite(theta), axis=1)
    first_nonfinite = None if finite.all() else int(np.flatnonzero(~finite)[0])
    norms = np.linalg.norm(np.nan_to_num(theta), axis=1)
    dev = np.abs(norms - 1.0)
    max_dev = float(dev.max()) if dev.size else 0.0
    bad = dev > tol
    first_bad = None if not bad.any() else int(np.flatnonzero(bad)[0])
    diffs = np.diff(path.grid.times)
    monotone = bool(np.all(diffs > 0)) if diffs.size else True
    ok = first_nonfinite is None and first_bad is None and monotone
    return PathDiagnostics(ok, max_dev, first_nonfinite, first_bad, monotone)


# ---------------------------------------------------------------------------
# CSV path format: UTF-8, LF newlines, round-trip float precision.
# MapPath header:  t,xi,theta_0,...,theta_{d-1}
# SsmpPath header: t,x_0,...,x_{d-1}
# Optional sidecar JSON carries {model, alpha, dt, t_max, seed, kill_index}.
# ---------------------------------------------------------------------------

def _fmt(v):
    return format(float(v), ".17g")


def write_map_path_csv(path, fname):
    d = path.dim
    header = "t,xi," + ",".join(f"theta_{i}" for i in range(d))
    end = len(path) if path.kill_index is None else path.kill_index
    with open(fname, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(end):
            row = [_fmt(path.grid.times[i]), _fmt(path.xi[i])]
            row += [_fmt(v) for v in path.theta[i]]
            fh.write(",".join(row) + "\n")


def read_map_path_csv(fname, kill_index=None):
    data = np.genfromtxt(fname, delimiter=",", skip_header=1, dtype=np.float64)
    data = np.atleast_2d(data)
    grid = TimeGrid(data[:, 0])
    return MapPath(grid, data[:, 1], data[:, 2:], kill_index=kill_index)


def write_ssmp_path_csv(path, fname):
    d = path.dim
    header = "t," + ",".join(f"x_{i}" for i in range(d))
    end = len(path) if path.kill_index is None else path.kill_index
    with open(fname, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(end):
            row = [_fmt(path.grid.times[i])] + [_fmt(v) for v in path.x[i]]
            fh.write(",".join(row) + "\n")


def read_ssmp_path_csv(fname, kill_index=None):
    data = np.genfromtxt(fname, delimiter=",", skip_header=1, dtype=np.float64)
    data = np.atleast_2d(data)
    return SsmpPath(TimeGrid(data[:, 0]), data[:, 1:], kill_index=kill_index)


def write_sidecar(fname, model, alpha, dt, t_max, seed, kill_index=None):
    meta = {"model": model, "alpha": alpha, "dt": dt, "t_max": t_max,
            "seed": seed, "kill_index": kill_index}
    with open(fname, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(fname):
    with open(fname, "r", encoding="utf-8") as fh:
        return json.load(fh)
