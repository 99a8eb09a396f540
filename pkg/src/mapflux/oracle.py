"""
Desk-scale exact reference: a discrete-time two-state-modulated walk with
+/-1 ordinate steps, small enough that every (modulator sequence, step
sequence) pair can be enumerated.  The enumerated joint law of the path
functionals (last time at supremum and infimum, extrema, ladder epochs,
completed-excursion starts) is the ground truth that the Monte Carlo
fluctuation estimators are tested against.

Enumeration cost is 4^horizon, so the practical range is horizon <= ~13;
the hard cap is 22.  Sampled paths are embedded into the shared MapPath
container with the two modulator states mapped to the fixed angles 0 and
pi/2 so the continuous-path pipeline runs on them unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import MapPath, TimeGrid, ValidationError

__all__ = [
    "OracleSpec",
    "OracleTables",
    "enumerate_discrete_map",
    "exact_g_table",
    "exact_laplace",
    "simulate_discrete_map",
    "simulate_walk",
    "sample_g_at_geometric",
    "STATE_ANGLES",
]

MAX_HORIZON = 22
STATE_ANGLES = (0.0, np.pi / 2)
_STATE_VECTORS = np.array([[1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class OracleSpec:
    """Parameters of the discrete walk.

    kill_prob is the per-step stopping probability of the geometric clock
    used as the discrete stand-in for an independent exponential time.
    """

    flip_prob: float = 0.0
    up_prob_by_state: tuple = (0.5, 0.5)
    horizon: int = 12
    kill_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValidationError("flip_prob must lie in [0, 1]")
        if len(self.up_prob_by_state) != 2:
            raise ValidationError("up_prob_by_state needs exactly two entries")
        for p in self.up_prob_by_state:
            if not 0.0 <= p <= 1.0:
                raise ValidationError("up probabilities must lie in [0, 1]")
        if not 1 <= self.horizon <= MAX_HORIZON:
            raise ValidationError(f"horizon must lie in [1, {MAX_HORIZON}]")
        if not 0.0 <= self.kill_prob < 1.0:
            raise ValidationError("kill_prob must lie in [0, 1)")

    @classmethod
    def fair(cls, horizon=12, kill_prob=0.0):
        return cls(0.0, (0.5, 0.5), horizon, kill_prob)


@dataclass(frozen=True)
class OracleTables:
    """Exact marginal tables from exhaustive enumeration.

    gbar_by_horizon[j, g] = P(last time at supremum over steps 0..j equals g),
    and likewise for the infimum.  sup_table[m] = P(max = m); inf_table[m] =
    P(min = -m).  ladder_table[c] = P(c strict ascending ladder epochs).
    occupation[s, n + z] = expected number of completed excursions from the
    supremum whose starting zero-set point has modulator state s and ordinate
    level z.
    """

    horizon: int
    gbar_by_horizon: np.ndarray
    gunder_by_horizon: np.ndarray
    sup_table: np.ndarray
    inf_table: np.ndarray
    ladder_table: np.ndarray
    occupation: np.ndarray

    @property
    def gbar(self):
        return self.gbar_by_horizon[self.horizon]

    @property
    def gunder(self):
        return self.gunder_by_horizon[self.horizon]


@njit(cache=True)
def _enumerate_kernel(n, flip_prob, up0, up1):
    gbar = np.zeros((n + 1, n + 1))
    gunder = np.zeros((n + 1, n + 1))
    sup_t = np.zeros(n + 1)
    inf_t = np.zeros(n + 1)
    ladder = np.zeros(n + 1)
    occ = np.zeros((2, 2 * n + 1))
    xi = np.zeros(n + 1, dtype=np.int64)
    states = np.zeros(n + 1, dtype=np.int64)
    for mod_bits in range(1 << n):
        pmod = 1.0
        s = 0
        states[0] = 0
        for j in range(n):
            if (mod_bits >> j) & 1:
                pmod *= flip_prob
                s = 1 - s
            else:
                pmod *= 1.0 - flip_prob
            states[j + 1] = s
        if pmod == 0.0:
            continue
        for step_bits in range(1 << n):
            p = pmod
            v = 0
            for j in range(n):
                up = (step_bits >> j) & 1
                pu = up0 if states[j] == 0 else up1
                p *= pu if up else 1.0 - pu
                v += 1 if up else -1
                xi[j + 1] = v
            if p == 0.0:
                continue
            xi[0] = 0
            m_hi = 0
            m_lo = 0
            g_hi = 0
            g_lo = 0
            n_ladder = 0
            prev_zero = 0
            for j in range(1, n + 1):
                if xi[j] > m_hi:
                    m_hi = xi[j]
                    n_ladder += 1
                if xi[j] < m_lo:
                    m_lo = xi[j]
                if xi[j] == m_hi:
                    if j > prev_zero + 1:
                        occ[states[prev_zero], n + xi[prev_zero]] += p
                    prev_zero = j
                    g_hi = j
                if xi[j] == m_lo:
                    g_lo = j
                gbar[j, g_hi] += p
                gunder[j, g_lo] += p
            gbar[0, 0] += p
            gunder[0, 0] += p
            sup_t[m_hi] += p
            inf_t[-m_lo] += p
            ladder[n_ladder] += p
    return gbar, gunder, sup_t, inf_t, ladder, occ


def enumerate_discrete_map(spec):
    """Exhaustively enumerate all modulator/step sequences of the walk."""
    if spec.horizon > MAX_HORIZON:
        raise ValidationError(f"horizon {spec.horizon} exceeds cap {MAX_HORIZON}")
    up0, up1 = spec.up_prob_by_state
    gbar, gunder, sup_t, inf_t, ladder, occ = _enumerate_kernel(
        spec.horizon, spec.flip_prob, float(up0), float(up1))
    return OracleTables(spec.horizon, gbar, gunder, sup_t, inf_t, ladder, occ)


def _geometric_weights(kill_prob, n):
    """P(G = j | G <= n) for j = 1..n with G geometric on {1, 2, ...}."""
    j = np.arange(1, n + 1, dtype=np.float64)
    w = kill_prob * (1.0 - kill_prob) ** (j - 1.0)
    total = w.sum()
    if total <= 0:
        raise ValidationError("kill_prob too small: geometric clock never lands")
    return w / total


def exact_g_table(spec, which="gbar", tables=None):
    """Exact distribution of the requested last-visit functional.

    With kill_prob = 0 this is the fixed-horizon table; otherwise the
    geometric clock G is mixed in, conditioned on G <= horizon (the sampling
    estimator rejects clocks beyond the horizon in the same way).
    Returns (values, probabilities).
    """
    if tables is None:
        tables = enumerate_discrete_map(spec)
    by_h = tables.gbar_by_horizon if which == "gbar" else tables.gunder_by_horizon
    n = spec.horizon
    values = np.arange(n + 1, dtype=np.float64)
    if spec.kill_prob == 0.0:
        return values, by_h[n].copy()
    w = _geometric_weights(spec.kill_prob, n)
    probs = np.zeros(n + 1)
    for j in range(1, n + 1):
        probs += w[j - 1] * by_h[j]
    return values, probs


def exact_laplace(spec, lam, which="gbar", tables=None):
    """E[exp(-lam * g)] under the exact law (geometric clock if configured)."""
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    values, probs = exact_g_table(spec, which, tables)
    return float(np.sum(probs * np.exp(-lam * values)))


def simulate_walk(n_steps, flip_prob, up_prob_by_state, n_paths, rng):
    """Sample modulated walk paths of arbitrary length.

    Unlike enumeration, simulation is cheap, so the horizon cap does not
    apply here; the classifier uses this for long oscillation runs.
    """
    if n_paths < 1:
        raise ValidationError("n_paths must be positive")
    if n_steps < 1:
        raise ValidationError("n_steps must be positive")
    flips = rng.random((n_paths, n_steps)) < flip_prob
    states = np.zeros((n_paths, n_steps + 1), dtype=np.int64)
    states[:, 1:] = np.cumsum(flips, axis=1) % 2
    up_p = np.asarray(up_prob_by_state)[states[:, :-1]]
    steps = np.where(rng.random((n_paths, n_steps)) < up_p, 1.0, -1.0)
    xi = np.zeros((n_paths, n_steps + 1))
    xi[:, 1:] = np.cumsum(steps, axis=1)
    grid = TimeGrid(np.arange(n_steps + 1, dtype=np.float64))
    return [MapPath(grid, xi[i], _STATE_VECTORS[states[i]]) for i in range(n_paths)]


def simulate_discrete_map(spec, n_paths, rng):
    """Sample walk paths consistent with the enumerated law.

    Returns a list of MapPath on the integer grid with modulator states
    embedded at the fixed angles 0 and pi/2.
    """
    return simulate_walk(spec.horizon, spec.flip_prob, spec.up_prob_by_state,
                         n_paths, rng)


def sample_g_at_geometric(spec, n_samples, rng, which="gbar"):
    """Monte Carlo samples of the functional at an independent geometric time.

    Draws a geometric clock per path, rejects clocks beyond the horizon, and
    evaluates the requested last-visit functional at the surviving clock.
    Returns (samples, rejection_count).
    """
    if spec.kill_prob <= 0.0:
        raise ValidationError("geometric sampling needs kill_prob > 0")
    n = spec.horizon
    clocks = rng.geometric(spec.kill_prob, size=n_samples)
    keep = clocks <= n
    rejected = int(n_samples - keep.sum())
    clocks = clocks[keep]
    paths = simulate_discrete_map(spec, clocks.size, rng)
    out = np.empty(clocks.size)
    sign = 1.0 if which == "gbar" else -1.0
    for i, path in enumerate(paths):
        xi = sign * path.xi[: clocks[i] + 1]
        run_max = np.maximum.accumulate(xi)
        out[i] = np.flatnonzero(xi >= run_max - 1e-12)[-1]
    return out, rejected
