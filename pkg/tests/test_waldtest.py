from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from setid.errors import DegenerateBootstrapDistribution, SingularVarianceOnTestedCoords, TestError
from setid.waldtest import (
    TestResult,
    bootstrap_critical_value,
    box_distance_sq,
    circular_block_means,
    default_block_length,
    fluctuation_weights,
    measurement_error_fixture,
    qq_relative_deviation,
    shifted_means_fixture,
    wald_statistic,
    weighted_chi2_quantiles,
)


def face_enumeration_distance(x, lo, hi, V):
    """Exact box projection in the V^{-1} metric by enumerating fixed faces."""
    n = x.size
    P = np.linalg.inv(V)
    best = np.inf
    for pattern in itertools.product((0, 1, 2), repeat=n):
        fixed = np.array([k != 0 for k in pattern])
        y = x.copy()
        y[fixed] = np.where(np.array(pattern)[fixed] == 1, lo[fixed], hi[fixed])
        free = ~fixed
        if free.any():
            # minimise (y - x)' P (y - x) over free coordinates
            rhs = -P[np.ix_(free, fixed)] @ (y[fixed] - x[fixed]) if fixed.any() else np.zeros(free.sum())
            y[free] = x[free] + np.linalg.solve(P[np.ix_(free, free)], rhs)
        if np.all(y >= lo - 1e-12) and np.all(y <= hi + 1e-12):
            d = y - x
            best = min(best, float(d @ P @ d))
    return best


def test_scalar_wald_example():
    res = wald_statistic([-0.05], ([-0.4], [-0.1]), [[0.01]], 100)
    assert res.statistic == pytest.approx(25.0, rel=1e-12)
    np.testing.assert_allclose(res.projection, [-0.1])


def test_interior_point_gives_zero():
    assert wald_statistic([0.2, 0.0], ([0.0, -1.0], [0.4, 1.0]), [1.0, 2.0], 500).statistic == 0.0


def test_singular_variance_raises():
    with pytest.raises(SingularVarianceOnTestedCoords):
        wald_statistic([1.0, 0.0], ([0.0, 0.0], [0.5, 0.5]), [[1.0, 1.0], [1.0, 1.0]], 10)


def test_cloud_diagnostic_dominates_box_hull(rng):
    cloud = rng.standard_normal((30, 2))
    res = wald_statistic([3.0, -2.0], (cloud.min(axis=0), cloud.max(axis=0)), np.eye(2), 50, cloud=cloud)
    assert res.cloud_statistic >= res.statistic - 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_full_covariance_projection_matches_face_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = 3
    Lm = rng.standard_normal((n, n))
    V = Lm @ Lm.T + 0.5 * np.eye(n)
    lo = rng.uniform(-1, 0, n)
    hi = lo + rng.uniform(0.2, 1.0, n)
    x = rng.uniform(-3, 3, n)
    d2, _ = box_distance_sq(x, lo, hi, V)
    assert d2 == pytest.approx(face_enumeration_distance(x, lo, hi, V), abs=1e-8)


def test_circular_block_means_match_loop(rng):
    T, l = 23, 4
    x = rng.standard_normal((T, 2))
    starts = rng.integers(0, T, size=(7, int(np.ceil(T / l))))
    got = circular_block_means(x, starts, l)
    for b in range(7):
        idx = np.concatenate([(s + np.arange(l)) % T for s in starts[b]])[:T]
        np.testing.assert_allclose(got[b], x[idx].mean(axis=0), atol=1e-12)


def test_default_block_length():
    assert default_block_length(1000) == 10
    assert default_block_length(1001) == 11


def test_bootstrap_is_seed_deterministic_and_worker_independent():
    data, fac, tp, draws = shifted_means_fixture(400, seed=1)
    a = bootstrap_critical_value(data, fac, tp, draws, B=600, seed=3, block_length=1)
    b = bootstrap_critical_value(data, fac, tp, draws, B=600, seed=3, block_length=1, workers=3)
    c = bootstrap_critical_value(data, fac, tp, draws, B=600, seed=4, block_length=1)
    np.testing.assert_array_equal(a.bootstrap_draws, b.bootstrap_draws)
    assert not np.array_equal(a.bootstrap_draws, c.bootstrap_draws)
    assert isinstance(a, TestResult)
    assert np.all(np.diff(a.bootstrap_draws) >= 0)
    assert a.decision == (a.statistic > a.critical_value) == a.reject
    assert a.statistic >= 0.0


def test_deep_interior_projection_bootstrap_is_degenerate():
    # complete-model wedge sits far inside a very wide robust set
    data, fac, tp, draws = shifted_means_fixture(50, seed=0, displacement=-50.0, width=100.0)
    with pytest.raises(DegenerateBootstrapDistribution):
        bootstrap_critical_value(data, fac, tp, draws, B=100, block_length=1)


@pytest.mark.parametrize("bl", [0, 26])
def test_block_length_bounds(bl):
    data, fac, tp, draws = shifted_means_fixture(50, seed=0)
    with pytest.raises(TestError):
        bootstrap_critical_value(data, fac, tp, draws, B=50, block_length=bl)


def test_displaced_model_is_rejected():
    data, fac, tp, draws = shifted_means_fixture(3200, seed=5, displacement=0.2)
    res = bootstrap_critical_value(data, fac, tp, draws, B=499, seed=0, block_length=1)
    assert res.reject and res.p_value < 0.01


def test_weighted_chi2_single_weight_is_exact():
    q = weighted_chi2_quantiles([2.0], [0.5, 0.95])
    np.testing.assert_allclose(q, 2.0 * stats.chi2.ppf([0.5, 0.95], 1))


def test_weighted_chi2_equal_weights_match_chi2_two():
    q = weighted_chi2_quantiles([1.0, 1.0], [0.25, 0.5, 0.9], n_sim=400_000, seed=1)
    np.testing.assert_allclose(q, stats.chi2.ppf([0.25, 0.5, 0.9], 2), rtol=0.02)


def test_fluctuation_weights_unit_when_v_is_long_run_variance(rng):
    diff = rng.standard_normal((500, 2)) * [1.0, 3.0]
    from setid.moments import bartlett_hac
    S = bartlett_hac(diff, 2)
    np.testing.assert_allclose(fluctuation_weights(diff, S, 2), [1.0, 1.0], atol=1e-12)


def test_qq_relative_deviation():
    boot = np.arange(1, 101, dtype=float)
    ref = np.quantile(boot, [0.5]) * 1.1
    np.testing.assert_allclose(qq_relative_deviation(boot, ref, [0.5]), [0.1 / 1.1])


def test_measurement_error_fixture_closed_form():
    data, fac, tp, draws, info = measurement_error_fixture(2000, seed=0)
    x1, y = data[:, 0], data[:, 1]
    sxx = x1 @ x1 / 2000
    assert info["b_m"] == pytest.approx(info["b_ols"] * sxx / (sxx - 0.25))
    assert abs(fac(data, [info["b_ols"]]).mean()) < 1e-12


# -- invariants -----------------------------------------------------------------


@pytest.mark.invariant
@given(p=st.floats(-5, 5), lo=st.floats(-2, 0), width=st.floats(0.01, 2), v=st.floats(0.01, 5),
       s=st.floats(0.1, 10), T=st.integers(1, 10_000))
def test_statistic_scale_equivariant(p, lo, width, v, s, T):
    a = wald_statistic([p], ([lo], [lo + width]), [v], T).statistic
    b = wald_statistic([s * p], ([s * lo], [s * (lo + width)]), [s * s * v], T).statistic
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


@pytest.mark.invariant
@given(d1=st.floats(0, 3), d2=st.floats(0, 3))
def test_statistic_monotone_in_distance(d1, d2):
    near, far = sorted([d1, d2])
    box = ([0.0, 0.0], [1.0, 1.0])
    a = wald_statistic([1.0 + near, -near], box, [[1.0, 0.3], [0.3, 2.0]], 10).statistic
    b = wald_statistic([1.0 + far, -far], box, [[1.0, 0.3], [0.3, 2.0]], 10).statistic
    assert b >= a - 1e-10


@pytest.mark.invariant
@given(seed=st.integers(0, 10_000))
def test_diagonal_clamp_matches_face_enumeration(seed):
    rng = np.random.default_rng(seed)
    V = np.diag(rng.uniform(0.1, 3.0, 2))
    lo = rng.uniform(-1, 0, 2)
    hi = lo + rng.uniform(0.0, 1.0, 2)
    x = rng.uniform(-3, 3, 2)
    assert box_distance_sq(x, lo, hi, V)[0] == pytest.approx(face_enumeration_distance(x, lo, hi, V), abs=1e-8)
