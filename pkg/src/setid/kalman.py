"""Innovation-form Kalman filtering for linear state-space systems.

The state evolves as ``S_t = A S_{t-1} + B e_t`` with ``e_t ~ N(0, Sigma_eps)``
and is observed through ``Y_t = C S_t + m_t`` with ``m_t ~ N(0, H)`` (``H`` may
be zero).  Predictions follow ``S_{t+1|t} = A S_{t|t-1} + K_t a_t`` where
``a_t = Y_t - C S_{t|t-1}`` is the one-step-ahead forecast error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import linalg, signal

from .errors import DimensionMismatch, FilterError, NonPSDCovariance, RiccatiDivergence

TOL_RICCATI = 1e-10
MAX_RICCATI_ITERS = 10_000
PSD_FLOOR = -1e-10


def stationary_covariance(A: NDArray, B: NDArray, Sigma_eps: NDArray) -> NDArray:
    """Unconditional state covariance, the solution of ``P = A P A' + B S B'``."""
    Q = B @ Sigma_eps @ B.T
    P = linalg.solve_discrete_lyapunov(A, Q)
    return 0.5 * (P + P.T)


def _predict_step(A, BSB, C, H, P):
    """One Riccati step; returns (next covariance, innovation gain, innovation covariance)."""
    S = C @ P @ C.T + H
    S = 0.5 * (S + S.T)
    # filtering gain P C' S^{-1}, computed by a solve against the symmetric S
    Kf = linalg.solve(S, C @ P, assume_a="sym").T
    IKC = np.eye(P.shape[0]) - Kf @ C
    # Joseph form keeps the updated covariance symmetric and PSD
    P_filt = IKC @ P @ IKC.T + Kf @ H @ Kf.T
    P_next = A @ P_filt @ A.T + BSB
    P_next = 0.5 * (P_next + P_next.T)
    return P_next, A @ Kf, S, Kf, P_filt


def steady_state_gain(
    A: NDArray,
    B: NDArray,
    C: NDArray,
    Sigma_eps: NDArray,
    H: NDArray | None = None,
    tol: float = TOL_RICCATI,
    max_iter: int = MAX_RICCATI_ITERS,
    P0: NDArray | None = None,
) -> tuple[NDArray, NDArray, NDArray, int]:
    """Iterate the prediction Riccati recursion to its fixed point.

    Parameters
    ----------
    A, B, C : ndarray
        System matrices.
    Sigma_eps : ndarray
        Shock covariance.
    H : ndarray, optional
        Measurement noise covariance; zero when omitted.
    tol : float
        Convergence threshold on the sup-norm change of the prediction
        covariance.
    max_iter : int
        Iteration cap.
    P0 : ndarray, optional
        Starting covariance; defaults to the stationary state covariance.

    Returns
    -------
    K : ndarray
        Steady innovation gain (``n_state x n_obs``).
    P : ndarray
        Steady one-step prediction covariance.
    Sigma_a : ndarray
        Steady innovation covariance ``C P C' + H``.
    iters : int
        Number of iterations performed.

    Raises
    ------
    RiccatiDivergence
        If the change does not fall below ``tol`` within ``max_iter`` steps.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    n_y = C.shape[0]
    H = np.zeros((n_y, n_y)) if H is None else np.asarray(H, dtype=float)
    BSB = B @ Sigma_eps @ B.T
    P = stationary_covariance(A, B, Sigma_eps) if P0 is None else np.asarray(P0, dtype=float)
    for it in range(1, max_iter + 1):
        try:
            P_next, K, S, _, _ = _predict_step(A, BSB, C, H, P)
        except linalg.LinAlgError as exc:
            raise RiccatiDivergence(f"innovation covariance singular at iteration {it}") from exc
        if not np.all(np.isfinite(P_next)):
            raise RiccatiDivergence(f"non-finite covariance at iteration {it}")
        delta = np.max(np.abs(P_next - P))
        P = P_next
        if delta < tol:
            Sigma_a = C @ P @ C.T + H
            K = linalg.solve(Sigma_a, C @ P, assume_a="sym").T
            return A @ K, P, 0.5 * (Sigma_a + Sigma_a.T), it
    raise RiccatiDivergence(f"no fixed point within {max_iter} iterations (last change {delta:.3e})")


@dataclass(frozen=True)
class FilterOutput:
    """Result of :func:`kalman_filter`.

    Attributes
    ----------
    x_pred : ndarray, shape (T, n_state)
        One-step-ahead state predictions ``S_{t|t-1}``.
    a : ndarray, shape (T, n_obs)
        Forecast errors ``Y_t - C S_{t|t-1}``.
    gain_path : ndarray, shape (T, n_state, n_obs)
        Innovation gain used at each date.
    loglik : float
        Gaussian log likelihood (diagnostic only).
    converged_at : int or None
        First date from which the steady gain was used.
    """

    x_pred: NDArray
    a: NDArray
    gain_path: NDArray
    loglik: float
    converged_at: int | None
    C: NDArray

    @property
    def y_pred(self) -> NDArray:
        return self.x_pred @ self.C.T


def kalman_filter(
    A: NDArray,
    B: NDArray,
    C: NDArray,
    Sigma_eps: NDArray,
    data: NDArray,
    H: NDArray | None = None,
    x0: NDArray | None = None,
    P0: NDArray | None = None,
    tol: float = TOL_RICCATI,
) -> FilterOutput:
    """Run the prediction-form Kalman filter over ``data``.

    The default initialisation is ``S_{1|0} = 0`` with the stationary state
    covariance.  Once consecutive prediction covariances differ by less than
    ``tol`` the covariance recursion stops and the steady gain is used.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Y = np.asarray(data, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n_s, n_y = A.shape[0], C.shape[0]
    if Y.shape[1] != n_y or C.shape[1] != n_s or B.shape[0] != n_s:
        raise DimensionMismatch(
            f"data has {Y.shape[1]} columns, C is {C.shape}, A is {A.shape}, B is {B.shape}"
        )
    if not np.all(np.isfinite(Y)):
        raise FilterError("data must be finite")
    H = np.zeros((n_y, n_y)) if H is None else np.asarray(H, dtype=float)
    BSB = B @ Sigma_eps @ B.T
    x = np.zeros(n_s) if x0 is None else np.asarray(x0, dtype=float).copy()
    P = stationary_covariance(A, B, Sigma_eps) if P0 is None else np.asarray(P0, dtype=float)
    if np.min(np.linalg.eigvalsh(P)) < PSD_FLOOR:
        raise NonPSDCovariance("initial covariance is not PSD")

    T = Y.shape[0]
    x_pred = np.empty((T, n_s))
    a = np.empty((T, n_y))
    gains = np.empty((T, n_s, n_y))
    loglik = 0.0
    log2pi = np.log(2.0 * np.pi)
    converged_at = None
    K = Kf = S = None
    logdet = 0.0
    S_inv = None
    for t in range(T):
        if converged_at is not None:
            # time-invariant from here on
            loglik += _steady_tail(A, C, Kf, K, S_inv, logdet, Y[t:], x, x_pred[t:], a[t:], gains[t:])
            break
        x_pred[t] = x
        a_t = Y[t] - C @ x
        a[t] = a_t
        if converged_at is None:
            try:
                P_next, K, S, Kf, _ = _predict_step(A, BSB, C, H, P)
            except linalg.LinAlgError as exc:
                raise NonPSDCovariance(f"innovation covariance singular at t={t}") from exc
            if np.min(np.linalg.eigvalsh(P_next)) < PSD_FLOOR:
                raise NonPSDCovariance(f"prediction covariance lost PSD at t={t}")
            sign, logdet = np.linalg.slogdet(S)
            if sign <= 0:
                raise NonPSDCovariance(f"innovation covariance not PD at t={t}")
            S_inv = np.linalg.inv(S)
            if np.max(np.abs(P_next - P)) < tol:
                converged_at = t + 1
            P = P_next
        gains[t] = K
        loglik -= 0.5 * (n_y * log2pi + logdet + a_t @ S_inv @ a_t)
        x = A @ (x + Kf @ a_t)
    return FilterOutput(x_pred=x_pred, a=a, gain_path=gains, loglik=float(loglik),
                        converged_at=converged_at, C=C)


def _steady_tail(A, C, Kf, K, S_inv, logdet, Y, x, x_pred, a, gains) -> float:
    """Steady-gain recursion ``x_{t+1} = (A - A Kf C) x_t + A Kf y_t`` over ``Y``.

    Runs one first-order linear filter per eigenmode of the closed-loop
    matrix; falls back to the plain loop when the eigenvectors are badly
    conditioned.  Fills ``x_pred``, ``a`` and ``gains`` in place and returns
    the log-likelihood contribution.
    """
    n = Y.shape[0]
    M = A - A @ Kf @ C
    N = A @ Kf
    gains[:] = K
    w, V = np.linalg.eig(M)
    if np.linalg.cond(V) < 1e8:
        Vi = np.linalg.inv(V)
        U = Y @ (Vi @ N).T  # (n, n_s) inputs per mode
        z0 = Vi @ x
        Z = np.empty((n, w.size), dtype=complex)
        for j in range(w.size):
            # z_{t+1} = w z_t + u_t with z_0 given; output z_t
            zi = signal.lfiltic([0.0, 1.0], [1.0, -w[j]], y=[0.0], x=[z0[j]])
            Z[:, j] = signal.lfilter([0.0, 1.0], [1.0, -w[j]], U[:, j], zi=zi)[0]
        x_pred[:] = (Z @ V.T).real
    else:
        for t in range(n):
            x_pred[t] = x
            x = M @ x + N @ Y[t]
    a[:] = Y - x_pred @ C.T
    n_y = Y.shape[1]
    quad = np.einsum("ti,ij,tj->", a, S_inv, a)
    return -0.5 * (n * (n_y * np.log(2.0 * np.pi) + logdet) + quad)


def whiteness_check(a: NDArray, max_lag: int = 5, k: float = 3.0) -> dict:
    """Sample autocorrelations of forecast errors against a ``k/sqrt(T)`` band.

    Returns
    -------
    dict
        ``acf`` with shape (max_lag, n_obs), the ``band`` half-width and a
        boolean ``white`` that is True when every autocorrelation lies
        inside the band.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    T = a.shape[0]
    d = a - a.mean(axis=0)
    denom = np.sum(d * d, axis=0)
    acf = np.array([np.sum(d[lag:] * d[:-lag], axis=0) / denom for lag in range(1, max_lag + 1)])
    band = k / np.sqrt(T)
    return {"acf": acf, "band": band, "white": bool(np.all(np.abs(acf) <= band))}


def run_filter(ss, data: NDArray, init: tuple[NDArray, NDArray] | None = None) -> FilterOutput:
    """Filter ``data`` through a :class:`~setid.model.StateSpace`.

    ``init`` is an optional ``(mean, covariance)`` pair for ``S_{1|0}``.
    """
    x0, P0 = (None, None) if init is None else init
    return kalman_filter(ss.A, ss.B, ss.C, ss.Sigma_eps, data, H=ss.H, x0=x0, P0=P0)
