from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setid.economies import adjustment_cost_fixture, simulate_consumption
from setid.errors import QPInfeasible, SingularMomentCovariance
from setid.mcmc import MCMCConfig, extract_set, run_mcmc
from setid.moments import MomentSystem, consumption_moment_factory
from setid.qp import (
    constraint_residual,
    enumerate_active_sets,
    oriented_moments,
    solve_weights,
    solve_weights_analytic,
    solve_weights_qp,
    wedge_series,
    wedges_from_set,
)


def assert_program_holds(pw, q, p, tol=1e-8):
    assert constraint_residual(pw, q, p) <= tol
    assert abs(pw.M.mean() - 1.0) <= tol
    assert pw.M.min() >= -1e-10
    assert np.max(np.abs(pw.lambda3 * pw.M)) <= tol


def scaled_instance(min_M, T=8, seed=0):
    """Single one-sided row whose closed-form weights have the requested minimum."""
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(T)
    d -= d.mean()
    qbar = (1.0 - min_M) * (d @ d) / (T * d.max())
    return (d + qbar)[:, None]


# -- closed form --------------------------------------------------------------------


def test_satisfied_rows_need_no_distortion(rng):
    q = rng.standard_normal((50, 2)) - 1.0
    pw = solve_weights_analytic(q, 0)
    np.testing.assert_allclose(pw.M, 1.0, atol=1e-14)
    np.testing.assert_allclose(pw.lambda2, 0.0, atol=1e-14)


def test_four_period_hand_kkt():
    q = np.array([1.0, -1.0, 2.0, -2.0]) + 0.5
    # x = a (q - qbar), a * 10 = -T qbar = -2
    np.testing.assert_allclose(solve_weights_analytic(q[:, None], 0).M, [0.8, 1.2, 0.6, 1.4], atol=1e-14)
    np.testing.assert_allclose(solve_weights_analytic(q[:, None], 1).M, [0.8, 1.2, 0.6, 1.4], atol=1e-14)


def test_closed_form_solves_block_kkt_system(rng):
    T = 200
    q = rng.standard_normal((T, 3)) + np.array([0.3, -0.2, 0.4])
    pw = solve_weights_analytic(q, 1)
    c = q.mean(axis=0).copy()
    c[1:] = np.maximum(c[1:], 0.0)
    A = np.vstack([np.ones(T), q.T])
    b = np.concatenate([[0.0], -T * c])
    x = pw.M - 1.0
    nu = np.concatenate([[pw.lambda1], pw.lambda2])
    K = np.block([[np.eye(T), -A.T], [A, np.zeros((4, 4))]])
    resid = K @ np.concatenate([x, nu]) - np.concatenate([np.zeros(T), b])
    assert np.max(np.abs(resid)) / T <= 1e-10


def test_singular_covariance_raises():
    q = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    with pytest.raises(SingularMomentCovariance):
        solve_weights_analytic(q, 0)


# -- nonnegative path -----------------------------------------------------------------


def test_qp_returns_feasible_closed_form_exactly(rng):
    q = scaled_instance(0.3, T=30, seed=4)
    a, b = solve_weights_analytic(q, 0), solve_weights_qp(q, 0)
    assert abs(a.objective - b.objective) < 1e-10
    np.testing.assert_allclose(a.M, b.M, atol=1e-10)


def test_negative_closed_form_clamped_and_matches_enumeration():
    q = scaled_instance(-0.2, T=8, seed=1)
    a = solve_weights_analytic(q, 0)
    assert a.meta["min_M"] == pytest.approx(-0.2, abs=1e-12)
    pw = solve_weights_qp(q, 0)
    assert pw.M.min() == pytest.approx(0.0, abs=1e-10)
    assert pw.binding_mask.any()
    assert_program_holds(pw, q, 0)
    ref = enumerate_active_sets(q, 0)
    np.testing.assert_allclose(pw.M, ref.M, atol=1e-8)
    assert pw.objective > a.objective


def test_small_adjustment_cost_binds_rarely():
    s = adjustment_cost_fixture(T=20_001, seed=1, phi=0.1)
    K = s.instrument
    e = s.wedge[:-1] + K[1:] - s.info["k_coef_frictionless"] * K[:-1]
    q = (e * K[:-1])[:, None]
    pw = solve_weights(q, 1)
    assert_program_holds(pw, q, 1)
    assert 0 < pw.binding_mask.mean() < 0.01


def test_conflicting_rows_are_infeasible():
    q = np.column_stack([np.linspace(1.0, 2.0, 20)])
    with pytest.raises(QPInfeasible) as exc:
        solve_weights_qp(q, 1)
    assert exc.value.certificate is not None


# -- wedges ---------------------------------------------------------------------------


def test_decomposition_identity(rng):
    lam = rng.standard_normal(500)
    M = np.abs(rng.standard_normal(500))
    assert np.mean(lam) == pytest.approx(np.mean(M * lam) + np.mean((1 - M) * lam), abs=1e-14)


def test_wedge_series_uses_forecast_errors():
    q = np.array([1.0, -1.0, 2.0, -2.0]) + 0.5
    e = np.array([1.0, 2.0, 3.0, 4.0])
    ms = MomentSystem(-q[:, None], [1], meta={"residuals": e})
    ws = wedge_series(ms, [0.0])
    np.testing.assert_allclose(ws.lambda_t[:, 0], (1 - np.array([0.8, 1.2, 0.6, 1.4])) * e, atol=1e-14)
    assert ws.raw_mean[0] == pytest.approx(2.5)


def test_oriented_moments_order_and_sign():
    ms = MomentSystem(np.array([[1.0, 2.0, 3.0]]), [1, 0, -1])
    q, p, order = oriented_moments(ms)
    assert p == 1
    np.testing.assert_array_equal(order, [1, 0, 2])
    np.testing.assert_array_equal(q, [[2.0, -1.0, 3.0]])


def _consumption_draws(T=3000, seed=0, lambda1=0.4):
    s = simulate_consumption(T, seed=seed, lambda1=lambda1)
    fac = consumption_moment_factory(s.c, s.regime, include_survey=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = run_mcmc(fac, [[0.0, 1.4]], MCMCConfig(chains=1, steps=1500, burn_in=300, seed=seed))
    return s, fac, d


def test_singleton_set_collapses_envelope():
    s, fac, d = _consumption_draws()
    mask = np.zeros(d.draws.shape[0], dtype=bool)
    mask[0] = True
    env = wedges_from_set(d, mask, fac)
    np.testing.assert_array_equal(env.path_lower, env.path_upper)
    np.testing.assert_array_equal(env.lower, env.upper)


def test_raw_wedge_interval_equals_endpoint_formula():
    s, fac, d = _consumption_draws()
    est = extract_set(d)
    env = wedges_from_set(d, est.mask, fac, max_draws=50, workers=2)
    mu_lo, mu_hi = env.thetas[:, 0].min(), env.thetas[:, 0].max()
    c0, c1 = s.c[:-1], s.c[1:]
    ends = sorted([c1.mean() - mu_hi * c0.mean(), c1.mean() - mu_lo * c0.mean()])
    assert env.raw_lower[0] == pytest.approx(ends[0], abs=1e-12)
    assert env.raw_upper[0] == pytest.approx(ends[1], abs=1e-12)


def test_frictionless_envelope_contains_zero():
    s, fac, d = _consumption_draws(T=5000, seed=3, lambda1=0.0)
    env = wedges_from_set(d, extract_set(d).mask, fac, max_draws=40)
    assert env.lower[0] <= 0.0 <= env.upper[0]
    e = s.c[1:] - s.mu_true * s.c[:-1]
    assert abs(e.mean()) <= 2 * e.std() / np.sqrt(e.size)


# -- invariants -----------------------------------------------------------------------


@pytest.mark.invariant
def test_qp_agrees_with_feasible_closed_form_on_1000_instances():
    rng = np.random.default_rng(20)
    done = 0
    while done < 1000:
        T, r = int(rng.integers(10, 60)), int(rng.integers(1, 4))
        q = rng.standard_normal((T, r)) + rng.normal(0, 0.1, r)
        p = int(rng.integers(0, r + 1))
        a = solve_weights_analytic(q, p)
        if not a.feasible:
            continue
        b = solve_weights_qp(q, p)
        assert np.max(np.abs(a.M - b.M)) <= 1e-8
        done += 1


@pytest.mark.invariant
@given(seed=st.integers(0, 100_000), T=st.integers(5, 80), r=st.integers(1, 3), shift=st.floats(0.0, 1.0))
def test_every_solution_satisfies_the_program(seed, T, r, shift):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((T, r)) + shift
    p = int(rng.integers(0, r + 1))
    try:
        pw = solve_weights(q, p)
    except (QPInfeasible, SingularMomentCovariance):
        return
    assert_program_holds(pw, q, p)


@pytest.mark.invariant
@given(seed=st.integers(0, 100_000), shift=st.floats(0.0, 1.5))
def test_active_set_path_matches_enumeration(seed, shift):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((8, 1)) + shift
    ref = enumerate_active_sets(q, 0)
    if ref is None:
        return
    pw = solve_weights_qp(q, 0)
    np.testing.assert_allclose(pw.M, ref.M, atol=1e-8)
