"""Statistical primitives: hand-computed values and metric properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapflux.core import ValidationError
from mapflux.stats import Ecdf, ks_one_sample, ks_two_sample, mc_mean_ci, tv_distance

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)


def test_ks_identical_samples():
    d, _ = ks_two_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert d == 0.0


def test_ks_hand_computed():
    # ECDFs step at 0, 1 and 0.5, 1.5; the largest gap is 0.5
    d, _ = ks_two_sample([0.0, 1.0], [0.5, 1.5])
    assert d == pytest.approx(0.5)


def test_ks_disjoint_supports():
    d, _ = ks_two_sample([0.0, 1.0], [5.0, 6.0])
    assert d == pytest.approx(1.0)


def test_ks_critical_value_formula():
    _, crit = ks_two_sample(np.zeros(2000), np.zeros(2000))
    assert crit == pytest.approx(1.358 * np.sqrt(2 / 2000))


def test_ks_rejects_empty():
    with pytest.raises(ValidationError):
        ks_two_sample([], [1.0])


@given(st.lists(finite_floats, min_size=1, max_size=40),
       st.lists(finite_floats, min_size=1, max_size=40))
@settings(max_examples=60)
def test_ks_symmetric_and_bounded(a, b):
    d1, _ = ks_two_sample(a, b)
    d2, _ = ks_two_sample(b, a)
    assert d1 == pytest.approx(d2)
    assert 0.0 <= d1 <= 1.0


def test_ks_one_sample_exact_uniform():
    xs = np.array([0.25, 0.5, 0.75])
    d = ks_one_sample(xs, lambda x: np.clip(x, 0, 1))
    assert d == pytest.approx(0.25)


def test_mc_mean_ci_constant():
    mean, half = mc_mean_ci([2.0, 2.0, 2.0])
    assert mean == 2.0
    assert half == 0.0


def test_mc_mean_ci_two_points():
    mean, half = mc_mean_ci([0.0, 2.0], level=0.95)
    assert mean == pytest.approx(1.0)
    # sample stddev sqrt(2), n = 2: half width = z * sqrt(2)/sqrt(2) = z
    assert half == pytest.approx(1.959964, abs=1e-5)


def test_mc_mean_ci_shrinks_like_sqrt_n():
    rng = np.random.default_rng(0)
    xs = rng.normal(size=6400)
    _, h1 = mc_mean_ci(xs[:400])
    _, h2 = mc_mean_ci(xs)
    assert h2 < h1 / 3.0  # 16x samples -> 4x shrink, with slack


def test_mc_mean_ci_needs_two():
    with pytest.raises(ValidationError):
        mc_mean_ci([1.0])


def test_tv_identical():
    assert tv_distance([0.2, 0.8], [0.2, 0.8]) == 0.0


def test_tv_disjoint_point_masses():
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)


def test_tv_hand_computed():
    assert tv_distance([0.5, 0.5], [0.75, 0.25]) == pytest.approx(0.25)


def test_tv_bin_mismatch():
    with pytest.raises(ValidationError):
        tv_distance([1.0, 0.0], [1.0, 0.0, 0.0])


@given(st.lists(st.floats(0.0, 10.0), min_size=2, max_size=12),
       st.lists(st.floats(0.0, 10.0), min_size=2, max_size=12),
       st.lists(st.floats(0.0, 10.0), min_size=2, max_size=12))
@settings(max_examples=60)
def test_tv_metric_properties(a, b, c):
    n = min(len(a), len(b), len(c))
    a, b, c = a[:n], b[:n], c[:n]
    if sum(a) <= 0 or sum(b) <= 0 or sum(c) <= 0:
        return
    dab = tv_distance(a, b)
    dba = tv_distance(b, a)
    assert dab == pytest.approx(dba)
    assert 0.0 <= dab <= 1.0
    assert dab <= tv_distance(a, c) + tv_distance(c, b) + 1e-12


def test_ecdf_fractions():
    e = Ecdf.from_samples([3.0, 1.0, 2.0])
    np.testing.assert_allclose(e.fractions, [1 / 3, 2 / 3, 1.0])
    assert e(0.5) == 0.0
    assert e(1.5) == pytest.approx(1 / 3)
    assert e(99.0) == 1.0
