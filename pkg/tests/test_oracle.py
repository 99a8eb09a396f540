"""Exact enumeration of the discrete walk and its sampling counterpart.

The n = 2 fair-walk values are hand enumerable: paths (++), (+-), (-+), (--)
have last-supremum times 2, 1, 2, 0, so P(g=0) = P(g=1) = 1/4, P(g=2) = 1/2.
"""

import numpy as np
import pytest

from mapflux.core import ValidationError, seed_stream
from mapflux.oracle import (OracleSpec, enumerate_discrete_map, exact_g_table,
                            exact_laplace, sample_g_at_geometric,
                            simulate_discrete_map)
from mapflux.stats import tv_distance


def test_fair_walk_n2_exact():
    tables = enumerate_discrete_map(OracleSpec.fair(horizon=2))
    np.testing.assert_allclose(tables.gbar, [0.25, 0.25, 0.5])


def test_fair_walk_n1_exact():
    tables = enumerate_discrete_map(OracleSpec.fair(horizon=1))
    np.testing.assert_allclose(tables.gbar, [0.5, 0.5])


def test_always_up_pins_gbar_at_horizon():
    spec = OracleSpec(0.0, (1.0, 1.0), 5, 0.0)
    tables = enumerate_discrete_map(spec)
    expected = np.zeros(6)
    expected[5] = 1.0
    np.testing.assert_allclose(tables.gbar, expected)
    np.testing.assert_allclose(tables.ladder_table, [0, 0, 0, 0, 0, 1.0])


def test_probabilities_sum_to_one():
    spec = OracleSpec(0.3, (0.6, 0.4), 8, 0.0)
    tables = enumerate_discrete_map(spec)
    for j in range(9):
        assert tables.gbar_by_horizon[j].sum() == pytest.approx(1.0, abs=1e-12)
        assert tables.gunder_by_horizon[j].sum() == pytest.approx(1.0, abs=1e-12)
    assert tables.sup_table.sum() == pytest.approx(1.0, abs=1e-12)
    assert tables.inf_table.sum() == pytest.approx(1.0, abs=1e-12)


def test_horizon_cap():
    with pytest.raises(ValidationError):
        OracleSpec.fair(horizon=23)


def test_exact_laplace_at_zero_is_one():
    spec = OracleSpec.fair(horizon=6)
    assert exact_laplace(spec, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_exact_laplace_deterministic_up():
    spec = OracleSpec(0.0, (1.0, 1.0), 3, 0.0)
    lam = 0.7
    assert exact_laplace(spec, lam) == pytest.approx(np.exp(-3 * lam))


def test_exact_laplace_fair_n2_formula():
    spec = OracleSpec.fair(horizon=2)
    for lam in (0.1, 0.5, 1.0):
        expected = 0.25 + 0.25 * np.exp(-lam) + 0.5 * np.exp(-2 * lam)
        assert exact_laplace(spec, lam) == pytest.approx(expected)


def test_symmetry_gbar_gunder_fair():
    tables = enumerate_discrete_map(OracleSpec.fair(horizon=7))
    np.testing.assert_allclose(tables.gbar, tables.gunder, atol=1e-12)


def test_simulation_matches_enumeration():
    spec = OracleSpec.fair(horizon=2)
    rng = seed_stream(42, 0)
    paths = simulate_discrete_map(spec, 100_000, rng)
    count = sum(
        1 for p in paths
        if np.flatnonzero(p.xi >= np.maximum.accumulate(p.xi) - 1e-12)[-1] == 2)
    phat = count / len(paths)
    se = np.sqrt(0.5 * 0.5 / len(paths))
    assert abs(phat - 0.5) < 3 * se


def test_simulated_mean_matches_binomial():
    spec = OracleSpec(0.0, (0.7, 0.7), 10, 0.0)
    rng = seed_stream(7, 0)
    paths = simulate_discrete_map(spec, 20_000, rng)
    finals = np.array([p.xi[-1] for p in paths])
    expected = 10 * (2 * 0.7 - 1)
    se = finals.std(ddof=1) / np.sqrt(len(finals))
    assert abs(finals.mean() - expected) < 3 * se


def test_modulator_embedding_angles():
    spec = OracleSpec(1.0, (0.5, 0.5), 3, 0.0)  # flips every step
    paths = simulate_discrete_map(spec, 1, seed_stream(0, 0))
    theta = paths[0].theta
    np.testing.assert_allclose(theta[0], [1.0, 0.0])
    np.testing.assert_allclose(theta[1], [0.0, 1.0])
    np.testing.assert_allclose(theta[2], [1.0, 0.0])


def test_geometric_sampling_matches_exact_table():
    spec = OracleSpec(0.0, (0.5, 0.5), 10, kill_prob=0.25)
    rng = seed_stream(99, 0)
    samples, rejected = sample_g_at_geometric(spec, 60_000, rng)
    emp = np.bincount(samples.astype(int), minlength=11).astype(float)
    _, probs = exact_g_table(spec)
    assert tv_distance(emp, probs) < 0.02
    # rejection rate matches the geometric tail (1 - p)^n
    tail = (1 - 0.25) ** 10
    assert rejected / 60_000 == pytest.approx(tail, abs=3 * np.sqrt(tail / 60_000))


def test_modulated_walk_probabilities():
    # one-step walk starting in state 0 with asymmetric up probabilities
    spec = OracleSpec(0.0, (0.9, 0.1), 1, 0.0)
    tables = enumerate_discrete_map(spec)
    np.testing.assert_allclose(tables.gbar, [0.1, 0.9], atol=1e-12)
