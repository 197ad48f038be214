from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg, stats

from setid.kalman import kalman_filter, stationary_covariance, steady_state_gain, whiteness_check


def random_system(rng, n_s, n_y, noise=0.1):
    A = rng.standard_normal((n_s, n_s))
    A *= rng.uniform(0.3, 0.9) / np.max(np.abs(np.linalg.eigvals(A)))
    B = rng.standard_normal((n_s, n_s))
    C = rng.standard_normal((n_y, n_s))
    H = noise * np.eye(n_y)
    return A, B, C, np.eye(n_s), H


def simulate_ss(rng, A, B, C, S, H, T):
    n_s, n_y = A.shape[0], C.shape[0]
    x = rng.multivariate_normal(np.zeros(n_s), stationary_covariance(A, B, S))
    Y = np.empty((T, n_y))
    for t in range(T):
        Y[t] = C @ x + rng.multivariate_normal(np.zeros(n_y), H) if H.any() else C @ x
        x = A @ x + B @ rng.multivariate_normal(np.zeros(B.shape[1]), S)
    return Y


def brute_riccati(A, B, C, S, H, iters=10_000):
    P = np.zeros_like(A)
    Q = B @ S @ B.T
    for _ in range(iters):
        F = C @ P @ C.T + H
        P = A @ P @ A.T + Q - A @ P @ C.T @ np.linalg.solve(F, C @ P @ A.T)
    return P


def test_exact_scalar_gain_equals_transition():
    K, P, Sa, _ = steady_state_gain(np.array([[0.9]]), np.array([[1.0]]), np.array([[1.0]]), np.array([[1.0]]),
                                    np.zeros((1, 1)))
    assert K[0, 0] == pytest.approx(0.9, abs=1e-10)
    assert P[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert Sa[0, 0] == pytest.approx(1.0, abs=1e-10)


def test_riccati_fixed_point_matches_brute_force(rng):
    A, B, C, S, H = random_system(rng, 3, 2)
    K, P, Sa, _ = steady_state_gain(A, B, C, S, H)
    P_bf = brute_riccati(A, B, C, S, H)
    np.testing.assert_allclose(P, P_bf, atol=1e-10)


def test_loglik_matches_dense_gaussian_density(rng):
    A, B, C, S, H = random_system(rng, 2, 2, noise=0.2)
    Y = simulate_ss(rng, A, B, C, S, H, 50)
    out = kalman_filter(A, B, C, S, Y, H=H)
    Sx = stationary_covariance(A, B, S)
    T, n = Y.shape
    big = np.zeros((T * n, T * n))
    for i in range(T):
        for j in range(i, T):
            blk = C @ np.linalg.matrix_power(A, j - i) @ Sx @ C.T
            if i == j:
                blk = blk + H
            big[j * n:(j + 1) * n, i * n:(i + 1) * n] = blk
            big[i * n:(i + 1) * n, j * n:(j + 1) * n] = blk.T
    ref = stats.multivariate_normal(np.zeros(T * n), big).logpdf(Y.ravel())
    assert out.loglik == pytest.approx(ref, abs=1e-6)


def test_noiseless_fully_observed_forecast(rng):
    A, B, _, S, _ = random_system(rng, 2, 2)
    C = np.array([[1.0, 0.5], [-0.3, 2.0]])
    Y = simulate_ss(rng, A, B, C, S, np.zeros((2, 2)), 200)
    out = kalman_filter(A, B, C, S, Y, H=np.zeros((2, 2)))
    pred = Y[:-1] @ np.linalg.solve(C, np.eye(2)).T @ A.T
    np.testing.assert_allclose(out.x_pred[1:], pred, atol=1e-8)
    np.testing.assert_allclose(out.a[1:], Y[1:] - pred @ C.T, atol=1e-8)


def test_zero_transition_forecasts_zero(rng):
    Y = rng.standard_normal((30, 2))
    out = kalman_filter(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2), Y)
    assert np.all(out.x_pred == 0.0)
    np.testing.assert_array_equal(out.a, Y)


def test_forecast_errors_are_data_minus_prediction(rng):
    A, B, C, S, H = random_system(rng, 3, 2)
    Y = simulate_ss(rng, A, B, C, S, H, 300)
    out = kalman_filter(A, B, C, S, Y, H=H)
    np.testing.assert_allclose(out.a, Y - out.x_pred @ C.T, atol=1e-12)
    assert out.converged_at is not None


# -- invariants ---------------------------------------------------------------


@pytest.mark.invariant
@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_joseph_update_keeps_covariances_psd():
    rng = np.random.default_rng(7)
    worst = np.inf
    for _ in range(10_000):
        n_s, n_y = rng.integers(1, 4), rng.integers(1, 3)
        A, B, C, S, H = random_system(rng, n_s, n_y, noise=float(rng.choice([0.0, 1e-3, 0.5])))
        try:
            _, P, Sa, _ = steady_state_gain(A, B, C, S, H, max_iter=200)
        except Exception:
            continue
        worst = min(worst, np.linalg.eigvalsh(P).min(), np.linalg.eigvalsh(Sa).min())
    assert worst >= -1e-10


@pytest.mark.invariant
@given(seed=st.integers(0, 5_000), shift=st.floats(-5, 5))
def test_filter_is_linear_in_data(seed, shift):
    rng = np.random.default_rng(seed)
    A, B, C, S, H = random_system(rng, 2, 2)
    Y = simulate_ss(rng, A, B, C, S, H, 60)
    c = np.full_like(Y, shift)
    full = kalman_filter(A, B, C, S, Y - c, H=H)
    parts = kalman_filter(A, B, C, S, Y, H=H).x_pred - kalman_filter(A, B, C, S, c, H=H).x_pred
    np.testing.assert_allclose(full.x_pred, parts, atol=1e-9)


@pytest.mark.invariant
def test_self_simulated_forecast_errors_are_white():
    rng = np.random.default_rng(11)
    A, B, C, S, H = random_system(rng, 2, 1)
    white = 0
    for seed in range(40):
        Y = simulate_ss(np.random.default_rng(seed), A, B, C, S, H, 2000)
        white += whiteness_check(kalman_filter(A, B, C, S, Y, H=H).a)["white"]
    assert white / 40 >= 0.95


@pytest.mark.invariant
def test_stationary_covariance_solves_lyapunov(rng):
    A, B, _, S, _ = random_system(rng, 3, 1)
    X = stationary_covariance(A, B, S)
    np.testing.assert_allclose(X, A @ X @ A.T + B @ S @ B.T, atol=1e-10)
    assert np.allclose(X, linalg.solve_discrete_lyapunov(A, B @ S @ B.T))
