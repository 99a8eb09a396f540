"""Trichotomy verdicts on synthetic drifting walks and the fair oracle walk."""

import numpy as np
import pytest

from mapflux.classify import (ClassifyThresholds, Verdict, slln_slope,
                              trichotomy)
from mapflux.core import MapPath, ValidationError, make_time_grid, seed_stream
from mapflux.oracle import simulate_walk


def gaussian_walk_paths(mu, n_paths, t_max=200.0, dt=0.1, seed=0):
    """Unit-variance Gaussian walks with drift mu, wrapped as MapPath."""
    rng = seed_stream(seed, 0)
    grid = make_time_grid(dt, t_max)
    n = len(grid) - 1
    theta = np.tile([1.0, 0.0], (n + 1, 1))
    paths = []
    for _ in range(n_paths):
        inc = rng.normal(mu * dt, np.sqrt(dt), size=n)
        xi = np.concatenate([[0.0], np.cumsum(inc)])
        paths.append(MapPath(grid, xi, theta))
    return paths


def test_slln_slope_deterministic():
    grid = make_time_grid(1.0, 10.0)
    theta = np.tile([1.0, 0.0], (11, 1))
    paths = [MapPath(grid, 2.0 * grid.times, theta) for _ in range(30)]
    slope, (lo, hi) = slln_slope(paths)
    assert slope == pytest.approx(2.0)
    assert lo == pytest.approx(2.0) and hi == pytest.approx(2.0)


def test_slln_slope_needs_30_paths():
    paths = gaussian_walk_paths(0.0, 5, t_max=10.0)
    with pytest.raises(ValidationError):
        slln_slope(paths)


def test_slln_slope_burn_in():
    grid = make_time_grid(1.0, 10.0)
    theta = np.tile([1.0, 0.0], (11, 1))
    # slope 0 before t=5, slope 1 after: burn-in isolates the late slope
    xi = np.where(grid.times < 5.0, 0.0, grid.times - 5.0)
    paths = [MapPath(grid, xi, theta) for _ in range(30)]
    slope, _ = slln_slope(paths, burn_in=5.0)
    assert slope == pytest.approx(1.0)


def test_drifting_up_classified():
    paths = gaussian_walk_paths(0.5, 120, seed=1)
    result = trichotomy(paths)
    assert result.verdict is Verdict.DRIFTS_PLUS
    assert result.slope_ci[0] > 0
    assert result.gunder_ratio <= 0.1
    assert result.gbar_ratio >= 0.9
    assert result.proxy_down >= 0.9  # last-infimum time stabilized


def test_drifting_down_classified():
    paths = gaussian_walk_paths(-0.5, 120, seed=2)
    result = trichotomy(paths)
    assert result.verdict is Verdict.DRIFTS_MINUS
    assert result.proxy_up >= 0.9


def test_antisymmetry_under_negation():
    paths = gaussian_walk_paths(0.5, 120, seed=3)
    up = trichotomy(paths)
    down = trichotomy([p.negated() for p in paths])
    assert up.verdict is Verdict.DRIFTS_PLUS
    assert down.verdict is Verdict.DRIFTS_MINUS
    assert down.slope == pytest.approx(-up.slope)
    assert down.gbar_ratio == pytest.approx(up.gunder_ratio)
    assert down.gunder_ratio == pytest.approx(up.gbar_ratio)
    assert down.proxy_up == pytest.approx(up.proxy_down)
    assert down.proxy_down == pytest.approx(up.proxy_up)


def test_fair_walk_oscillates():
    rng = seed_stream(11, 0)
    paths = simulate_walk(30_000, 0.0, (0.5, 0.5), 300, rng)
    lambdas = [1.0, 0.1, 100.0 / 30_000.0]  # smallest lambda * T = 100
    horizons = [7500.0, 15000.0, 22500.0, 30000.0]
    result = trichotomy(paths, lambda_grid=lambdas, horizons=horizons)
    assert result.verdict is Verdict.OSCILLATES
    assert result.slope_ci[0] <= 0 <= result.slope_ci[1]
    assert result.gbar_ratio >= 0.9 and result.gunder_ratio >= 0.9
    # proxy consistency: an oscillating ordinate has both proxies near 0
    assert result.proxy_up <= 0.1
    assert result.proxy_down <= 0.1


def test_near_critical_is_inconclusive():
    # slope indistinguishable from 0 but the ratios disagree with oscillation
    paths = gaussian_walk_paths(0.01, 40, t_max=50.0, seed=4)
    result = trichotomy(paths)
    assert result.verdict in (Verdict.INCONCLUSIVE, Verdict.OSCILLATES)


def test_thresholds_dataclass_defaults():
    th = ClassifyThresholds()
    assert th.near_one == 0.9
    assert th.near_zero == 0.1
    assert th.ci_level == 0.99


def test_classification_as_dict_round_trips():
    paths = gaussian_walk_paths(0.5, 40, t_max=50.0, seed=5)
    d = trichotomy(paths).as_dict()
    assert d["verdict"] in {v.value for v in Verdict}
    assert set(d) >= {"slope", "slope_ci", "gbar_ratio", "gunder_ratio",
                      "proxy_up", "proxy_down"}
