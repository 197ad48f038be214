"""Wald specification test of a complete model against the robust wedge set.

The statistic is ``T * min_{l in S} (l - l_p)' V^{-1} (l - l_p)`` where
``l_p`` are the mean wedges implied by the complete model and ``S`` is the
set of mean wedges over the robust parameter draws, represented by its
coordinate-wise box hull.  Critical values come from a circular block
bootstrap of the per-period wedge contributions with the parameters held
fixed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, stats

from .errors import (
    DegenerateBootstrapDistribution,
    SingularVarianceOnTestedCoords,
    TestError,
)
from .moments import bartlett_hac

VAR_FLOOR = 1e-14
CHUNK = 250


def _as_vec(x) -> NDArray:
    return np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)


def _check_variance(V: NDArray) -> NDArray:
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] != V.shape[1]:
        if V.shape[0] == 1:
            V = np.diag(V[0])
        else:
            raise ValueError("V must be square or a vector of variances")
    w = np.linalg.eigvalsh(0.5 * (V + V.T))
    if w.min() <= VAR_FLOOR * max(1.0, w.max()):
        raise SingularVarianceOnTestedCoords("variance is singular on the tested coordinates")
    return 0.5 * (V + V.T)


def box_distance_sq(point: ArrayLike, lower: ArrayLike, upper: ArrayLike, V: ArrayLike
                    ) -> tuple[float, NDArray]:
    """Squared ``V^{-1}`` distance from ``point`` to the box ``[lower, upper]``.

    For diagonal ``V`` the minimiser is the coordinate-wise clamp; otherwise a
    bounded least-squares problem in the whitened metric is solved.
    """
    x = _as_vec(point)
    lo, hi = _as_vec(lower), _as_vec(upper)
    V = _check_variance(V)
    if np.any(lo > hi):
        raise ValueError("box lower bound exceeds upper bound")
    if np.allclose(V, np.diag(np.diag(V)), rtol=0.0, atol=0.0):
        proj = np.clip(x, lo, hi)
        d = proj - x
        return float(np.sum(d * d / np.diag(V))), proj
    Li = np.linalg.cholesky(np.linalg.inv(V)).T
    res = optimize.lsq_linear(Li, Li @ x, bounds=(lo, hi), tol=1e-12, lsmr_tol="auto")
    proj = np.clip(res.x, lo, hi)
    d = proj - x
    return float(d @ np.linalg.solve(V, d)), proj


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    projection: NDArray
    cloud_statistic: float | None
    closest_draw: int | None


def wald_statistic(lambda_p: ArrayLike, lambda_set, V_hat: ArrayLike, T: int,
                   cloud: ArrayLike | None = None) -> WaldResult:
    """``T`` times the squared scaled distance from ``lambda_p`` to the wedge set.

    Parameters
    ----------
    lambda_p : array_like, shape (n_Y,)
    lambda_set : tuple ``(lower, upper)`` or object with ``lower``/``upper``
        Box hull of the robust wedge set.
    V_hat : array_like
        Variances (vector) or covariance matrix.
    T : int
    cloud : array_like, shape (k, n_Y), optional
        Wedges at individual draws; the infimum over the cloud is reported as
        a diagnostic.
    """
    lo, hi = (lambda_set.lower, lambda_set.upper) if hasattr(lambda_set, "lower") else lambda_set
    d2, proj = box_distance_sq(lambda_p, lo, hi, V_hat)
    cloud_stat = closest = None
    if cloud is not None:
        Cl = np.atleast_2d(np.asarray(cloud, dtype=float))
        V = _check_variance(V_hat)
        diff = Cl - _as_vec(lambda_p)
        dist = np.einsum("ij,ij->i", diff, np.linalg.solve(V, diff.T).T)
        closest = int(np.argmin(dist))
        cloud_stat = float(T * dist[closest])
    return WaldResult(statistic=float(T * d2), projection=proj, cloud_statistic=cloud_stat,
                      closest_draw=closest)


# ---------------------------------------------------------------------------
# bootstrap


def default_block_length(T: int) -> int:
    return int(math.ceil(T ** (1.0 / 3.0)))


def circular_block_means(contrib: NDArray, starts: NDArray, block_length: int) -> NDArray:
    """Means of circular block resamples.

    Parameters
    ----------
    contrib : ndarray, shape (T, ...)
    starts : ndarray of int, shape (B, n_blocks)
        Block start indices; blocks wrap around the end of the sample and the
        last block is truncated so every resample has length ``T``.
    """
    T = contrib.shape[0]
    l = int(block_length)
    B, nb = starts.shape
    lengths = np.full(nb, l)
    lengths[-1] = T - l * (nb - 1)
    # per-period inclusion counts from a difference array over [0, T + l)
    width = T + l
    rows = np.arange(B)[:, None] * (width + 1)
    diff = (np.bincount((rows + starts).ravel(), minlength=B * (width + 1))
            - np.bincount((rows + starts + lengths).ravel(), minlength=B * (width + 1)))
    counts = np.cumsum(diff.reshape(B, width + 1)[:, :width], axis=1)
    counts[:, :l] += counts[:, T:]
    flat = contrib.reshape(T, -1)
    return (counts[:, :T] @ flat / T).reshape((B,) + contrib.shape[1:])


@dataclass(frozen=True)
class TestResult:
    """Outcome of the bootstrap Wald test."""

    __test__ = False  # keep pytest from collecting this class

    statistic: float
    critical_value: float
    alpha: float
    bootstrap_draws: NDArray
    decision: bool
    block_length: int
    seed: int
    p_value: float
    V: NDArray
    lambda_p: NDArray
    lower: NDArray
    upper: NDArray
    cloud_statistic: float | None
    recenter: str
    meta: dict = field(default_factory=dict)

    @property
    def reject(self) -> bool:
        return self.decision


def bootstrap_critical_value(
    data,
    moments_factory: Callable[[object, NDArray], NDArray],
    theta_p: ArrayLike,
    draws_s: ArrayLike,
    alpha: float = 0.05,
    block_length: int | None = None,
    B: int = 2_000,
    seed: int = 0,
    recenter: str = "projection",
    workers: int = 1,
    V_hat: ArrayLike | None = None,
) -> TestResult:
    """Block-bootstrap Wald test.

    Parameters
    ----------
    data : object
        Passed unchanged to ``moments_factory``.
    moments_factory : callable
        ``(data, theta) -> (T, n_Y)`` per-period wedge contributions whose
        column means are the mean wedges at ``theta``.
    theta_p : array_like
        Complete-model parameters.
    draws_s : array_like, shape (k, n_theta)
        Draws from the robust set estimate.
    alpha : float
    block_length : int, optional
        ``ceil(T^{1/3})`` by default.
    B : int
        Bootstrap replicates.
    seed : int
    recenter : {"projection", "point"}
        ``projection`` shifts the complete-model wedges by their distance to
        the sample envelope so resamples are drawn under the null boundary
        and compares them with the resampled envelope.  ``point`` uses the
        joint fluctuation of the complete-model wedge and the closest robust
        draw, the weighted chi-square limit of the point-identified case.
    V_hat : array_like, optional
        Scaling variances; diagonal Bartlett long-run variance of the wedge
        difference at the closest draw by default.

    Raises
    ------
    DegenerateBootstrapDistribution
        When every replicate gives the same statistic.
    """
    if recenter not in ("projection", "point"):
        raise ValueError("recenter must be 'projection' or 'point'")
    Wp = np.asarray(moments_factory(data, np.asarray(theta_p, dtype=float)), dtype=float)
    if Wp.ndim == 1:
        Wp = Wp[:, None]
    T, n_y = Wp.shape
    draws_s = np.atleast_2d(np.asarray(draws_s, dtype=float))
    Ws = np.stack([np.asarray(moments_factory(data, th), dtype=float).reshape(T, n_y) for th in draws_s])
    l = default_block_length(T) if block_length is None else int(block_length)
    if not 1 <= l <= max(1, T // 2):
        raise TestError("block_length must lie in [1, T/2]")
    lam_p = Wp.mean(axis=0)
    cloud = Ws.mean(axis=1)
    lower, upper = cloud.min(axis=0), cloud.max(axis=0)
    closest = int(np.argmin(np.sum((cloud - lam_p) ** 2, axis=1)))
    diff_series = Wp - Ws[closest]
    if V_hat is None:
        V = np.diag(np.diag(bartlett_hac(diff_series, l)))
    else:
        V = _check_variance(V_hat)
    V = _check_variance(V)
    res = wald_statistic(lam_p, (lower, upper), V, T, cloud)
    shift = lam_p - res.projection

    # contributions stacked as [complete model, robust draws]
    stacked = np.concatenate([Wp[None], Ws], axis=0).transpose(1, 0, 2)  # (T, 1 + k, n_y)
    nb = int(math.ceil(T / l))
    n_chunks = int(math.ceil(B / CHUNK))
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)
    Vd = np.diag(V)
    diag_V = np.allclose(V, np.diag(Vd), rtol=0.0, atol=0.0)

    def run_chunk(c):
        size = min(CHUNK, B - c * CHUNK)
        rng = np.random.default_rng(seeds[c])
        starts = rng.integers(0, T, size=(size, nb))
        means = circular_block_means(stacked, starts, l)  # (size, 1 + k, n_y)
        if recenter == "point":
            fl = (means[:, 0] - lam_p) - (means[:, 1 + closest] - cloud[closest])
            return T * np.einsum("ij,ij->i", fl, np.linalg.solve(V, fl.T).T)
        p_star = means[:, 0] - shift
        lo_b, hi_b = means[:, 1:].min(axis=1), means[:, 1:].max(axis=1)
        if diag_V:
            d = np.clip(p_star, lo_b, hi_b) - p_star
            return T * np.sum(d * d / Vd, axis=1)
        out = np.empty(size)
        for i in range(size):
            out[i] = T * box_distance_sq(p_star[i], lo_b[i], hi_b[i], V)[0]
        return out

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    boot = np.concatenate(parts)
    if np.ptp(boot) == 0.0:
        raise DegenerateBootstrapDistribution(
            "all bootstrap replicates are identical; the robust set may lack a survey block")
    crit = float(np.quantile(boot, 1.0 - alpha))
    pval = float(np.mean(boot >= res.statistic))
    return TestResult(statistic=res.statistic, critical_value=crit, alpha=alpha,
                      bootstrap_draws=np.sort(boot), decision=bool(res.statistic > crit),
                      block_length=l, seed=seed, p_value=pval, V=V, lambda_p=lam_p, lower=lower,
                      upper=upper, cloud_statistic=res.cloud_statistic, recenter=recenter,
                      meta={"closest_draw": closest, "T": T, "B": B})


def fluctuation_weights(diff_series: ArrayLike, V: ArrayLike, bandwidth: int) -> NDArray:
    """Plug-in weights of the weighted chi-square limit.

    Eigenvalues of ``V^{-1/2} S V^{-1/2}`` where ``S`` is the Bartlett
    long-run covariance of the wedge difference series.
    """
    S = bartlett_hac(diff_series, bandwidth)
    V = _check_variance(V)
    Lc = np.linalg.cholesky(V)
    Li = np.linalg.inv(Lc)
    return np.sort(np.linalg.eigvalsh(Li @ S @ Li.T))[::-1]


def weighted_chi2_quantiles(weights: ArrayLike, probs: ArrayLike, n_sim: int = 200_000,
                            seed: int = 0) -> NDArray:
    """Quantiles of ``sum_j w_j chi2_1``; exact for a single weight."""
    w = _as_vec(weights)
    probs = _as_vec(probs)
    if w.size == 1:
        return w[0] * stats.chi2.ppf(probs, df=1)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_sim, w.size))
    return np.quantile((z * z) @ w, probs)


def qq_relative_deviation(boot: ArrayLike, reference_q: ArrayLike, probs: ArrayLike) -> NDArray:
    """``|q_boot(p) - q_ref(p)| / q_ref(p)`` over ``probs``."""
    qb = np.quantile(np.asarray(boot, dtype=float), _as_vec(probs))
    ref = _as_vec(reference_q)
    return np.abs(qb - ref) / ref


# ---------------------------------------------------------------------------
# fixtures


def shifted_means_fixture(T: int, seed, displacement: float = 0.0, width: float = 0.4,
                          n_grid: int = 21):
    """Two i.i.d. Gaussian series; the robust set is ``mean(Y) + [0, width]``.

    The complete-model wedge is ``mean(X)`` with ``E X = E Y - displacement``:
    zero displacement puts the truth on the lower boundary of the set, a
    positive one lies outside it.

    Returns
    -------
    data, factory, theta_p, draws_s
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(T) - displacement
    Y = rng.standard_normal(T)
    data = np.column_stack([X, Y])

    def factory(d, theta):
        th = float(np.asarray(theta).reshape(-1)[0])
        if th < 0.0:  # complete model
            return d[:, :1]
        return d[:, 1:2] + th

    draws = np.linspace(0.0, width, n_grid)[:, None]
    return data, factory, np.array([-1.0]), draws


def measurement_error_fixture(T: int, seed, beta: float = 1.0, intercept: float = 0.2,
                              sd_meas: float = 0.2, var_eps: float = 0.1, assumed_sd: float = 0.5):
    """Regression with a mismeasured regressor.

    ``X1 = X* + v`` with ``v ~ N(0, sd_meas^2)`` and ``Y = intercept + beta X* + e``.
    The complete model corrects OLS for an assumed measurement standard
    deviation ``assumed_sd``; the robust set is ``{b >= b_ols}``.  Wedge
    contributions are ``X1 (Y - intercept - b X1)``.

    Returns
    -------
    data, factory, theta_p, draws_s, info
    """
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal(T)
    x1 = xs + sd_meas * rng.standard_normal(T)
    y = intercept + beta * xs + np.sqrt(var_eps) * rng.standard_normal(T)
    sxx = float(x1 @ x1) / T
    b_ols = float(x1 @ (y - intercept)) / T / sxx
    # Gaussian ML slope under the assumed error variance
    b_m = b_ols * sxx / (sxx - assumed_sd ** 2)
    data = np.column_stack([x1, y])

    def factory(d, theta):
        b = float(np.asarray(theta).reshape(-1)[0])
        return (d[:, 0] * (d[:, 1] - intercept - b * d[:, 0]))[:, None]

    draws = np.array([[b_ols], [b_ols + 1.0]])
    return data, factory, np.array([b_m]), draws, {"b_ols": b_ols, "b_m": b_m}
