"""Chi-square perturbation weights that reconcile the data with the moments.

Given per-period moment contributions ``q`` (``T x r``), with the first ``p``
columns equalities and the rest one-sided rows oriented so the restriction
reads ``E q <= 0``, find weights ``M`` closest to one in squared distance with

    mean(M) = 1,
    mean(M q_j) = 0                   for equality rows,
    mean(M q_j) = qbar_j - [qbar_j]+  for one-sided rows,
    M >= 0.

Writing ``x = M - 1`` the linear constraints are ``1'x = 0`` and
``q'x = -T c`` with ``c = [qbar_1; [qbar_2]+]``.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg, optimize

from .errors import QPError, QPInfeasible, SingularMomentCovariance

TOL_KKT = 1e-8
TOL_FEAS = 1e-10
COND_MAX = 1e12


@dataclass(frozen=True)
class PerturbationWeights:
    """Solution of the weighting program.

    Attributes
    ----------
    M : ndarray, shape (T,)
    lambda1 : float
        Multiplier of the unit-mean constraint.
    lambda2 : ndarray, shape (r,)
        Multipliers of the moment constraints (scaled by ``1/T``).
    lambda3 : ndarray, shape (T,)
        Multipliers of ``M >= 0``.
    binding_mask : ndarray of bool
    method : str
        ``"analytic"`` or ``"active_set"``.
    iterations : int
    """

    M: NDArray
    lambda1: float
    lambda2: NDArray
    lambda3: NDArray
    binding_mask: NDArray
    method: str
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        x = self.M - 1.0
        return 0.5 * float(x @ x)

    @property
    def feasible(self) -> bool:
        return bool(self.M.min() >= -TOL_FEAS)


def _prepare(q: ArrayLike, p: int):
    q = np.asarray(q, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    T, r = q.shape
    if not 0 <= p <= r:
        raise ValueError("split p must lie in [0, r]")
    qbar = q.mean(axis=0)
    c = qbar.copy()
    # the kink at exactly zero counts as satisfied
    c[p:] = np.where(qbar[p:] > 0.0, qbar[p:], 0.0)
    return q, T, r, qbar, c


def _constraints(q: NDArray, c: NDArray):
    T = q.shape[0]
    A = np.vstack([np.ones((1, T)), q.T])
    b = np.concatenate([[0.0], -T * c])
    return A, b


def constraint_residual(pw: PerturbationWeights, q: ArrayLike, p: int) -> float:
    """Sup-norm violation of the linear constraints and the sign constraint."""
    q, T, r, qbar, c = _prepare(q, p)
    A, b = _constraints(q, c)
    x = pw.M - 1.0
    lin = np.abs(A @ x - b) / T
    return float(max(lin.max(initial=0.0), max(0.0, -pw.M.min())))


def solve_weights_analytic(q: ArrayLike, p: int = 0) -> PerturbationWeights:
    """Closed form ignoring ``M >= 0``.

    ``lambda2 = -V^{-1} c`` with ``V = T^{-1} qtilde' q`` and ``qtilde`` the
    demeaned contributions; ``M = 1 + qtilde lambda2``.

    Raises
    ------
    SingularMomentCovariance
        If ``V`` is singular.
    """
    q, T, r, qbar, c = _prepare(q, p)
    qt = q - qbar
    V = qt.T @ q / T
    V = 0.5 * (V + V.T)
    if r and (not np.all(np.isfinite(V)) or np.linalg.cond(V) > COND_MAX):
        raise SingularMomentCovariance("moment covariance is singular")
    lam2 = -linalg.solve(V, c, assume_a="sym") if r else np.zeros(0)
    x = qt @ lam2
    M = 1.0 + x
    lam1 = float(-qbar @ lam2)
    return PerturbationWeights(M=M, lambda1=lam1, lambda2=lam2, lambda3=np.zeros(T),
                               binding_mask=np.zeros(T, dtype=bool), method="analytic",
                               meta={"min_M": float(M.min()), "needs_qp": bool(M.min() < -TOL_FEAS)})


def _solve_active(A, b, active):
    """KKT point for a fixed active set: ``x_S = -1`` and ``x_F = A_F' nu``.

    ``x_F`` is the minimum-norm solution of ``A_F x_F = b + A_S 1``, computed
    by least squares on ``A_F`` rather than the normal equations so nearly
    collinear moment rows keep their accuracy.
    """
    free = ~active
    AF = A[:, free]
    rhs = b + A[:, active].sum(axis=1)
    if AF.shape[1] == 0:
        return None, None
    xF, _, rank, sv = np.linalg.lstsq(AF, rhs, rcond=None)
    if rank < A.shape[0] or sv[-1] <= sv[0] * 1e-10:
        return None, None
    if np.max(np.abs(AF @ xF - rhs)) > 1e-9 * max(1.0, np.abs(rhs).max()):
        return None, None
    nu = np.linalg.lstsq(AF.T, xF, rcond=None)[0]
    x = np.full(A.shape[1], -1.0)
    x[free] = xF
    return nu, x


def _farkas(A, b):
    """Certificate ``y`` with ``A'y <= 0`` and ``y'(b + A 1) > 0`` if infeasible, else None."""
    T = A.shape[1]
    bp = b + A.sum(axis=1)
    # phase one: z >= 0, A z = bp
    res = optimize.linprog(np.zeros(T), A_eq=A, b_eq=bp, bounds=[(0, None)] * T, method="highs")
    if res.status == 0:
        return None
    m = A.shape[0]
    cert = optimize.linprog(-bp, A_ub=np.vstack([A.T, bp[None, :]]),
                            b_ub=np.concatenate([np.zeros(T), [1.0]]),
                            bounds=[(None, None)] * m, method="highs")
    return cert.x if cert.status == 0 else np.full(m, np.nan)


def _kkt_point(A, b, active, tol):
    """Weights for a fixed active set if that set satisfies the KKT conditions."""
    nu, x = _solve_active(A, b, active)
    if nu is None:
        return None
    g = A.T @ nu
    tg = tol * max(1.0, float(np.abs(g).max()))
    if np.all(x[~active] >= -1.0 - tol) and np.all(g[active] <= -1.0 + tg):
        return nu, x, g
    return None


def _dual_objective(A, b, nu):
    """``min_{x >= -1} 1/2|x|^2 - nu'(A x - b)``, concave in ``nu``."""
    x = np.maximum(A.T @ nu, -1.0)
    return float(0.5 * x @ x - nu @ (A @ x - b)), x


def solve_weights_qp(q: ArrayLike, p: int = 0, max_iter: int = 2000, tol: float = TOL_KKT
                     ) -> PerturbationWeights:
    """Weights with ``M >= 0`` by an active-set method on the bound constraints.

    The iteration runs on the multipliers ``nu`` of the linear constraints.
    The active set is ``S = {t : (A' nu)_t <= -1}`` and each step solves the
    reduced KKT system ``(A_F A_F') nu = b + A_S 1`` for the free set ``F``,
    damped by a backtracking search on the concave dual objective.  Once the
    active set settles, coordinates sitting exactly on the bound are
    resolved one at a time, lowest index first, until the KKT conditions
    hold.  When the unconstrained closed form is already nonnegative the
    first step returns it.

    Raises
    ------
    QPInfeasible
        When no nonnegative weights satisfy the constraints; ``certificate``
        holds a Farkas vector ``y`` with ``A'y <= 0`` and ``y'(b + A 1) > 0``.
    """
    q, T, r, qbar, c = _prepare(q, p)
    A, b = _constraints(q, c)
    m = A.shape[0]
    scale = max(1.0, float(np.abs(A).max()))
    ridge = 1e-13 * scale ** 2 * T
    active = np.zeros(T, dtype=bool)
    hit = _kkt_point(A, b, active, tol)
    if hit is not None:
        return _weights(hit, active, T, 1)
    nu = _solve_active(A, b, active)[0]
    if nu is None:
        nu = np.zeros(m)
    it = 0
    for it in range(1, max_iter + 1):
        val, x = _dual_objective(A, b, nu)
        g = A.T @ nu
        grad = b - A @ x
        if np.max(np.abs(grad)) <= tol * T:
            break
        AF = A[:, g > -1.0]
        d = linalg.solve(AF @ AF.T + ridge * np.eye(m), grad, assume_a="pos")
        slope = float(grad @ d)
        t = 1.0
        while t > 1e-12:
            new_val, _ = _dual_objective(A, b, nu + t * d)
            if new_val >= val + 1e-4 * t * slope:
                break
            t *= 0.5
        nu = nu + t * d
        if not np.all(np.isfinite(nu)) or np.max(np.abs(nu)) > 1e12 * scale:
            break
    if np.all(np.isfinite(nu)):
        g = A.T @ nu
        active = g < -1.0
        hit = _kkt_point(A, b, active, tol)
        if hit is not None:
            return _weights(hit, active, T, it)
        # coordinates on the bound: flip status lowest index first
        ties = np.flatnonzero(np.abs(g + 1.0) <= 1e-6 * max(1.0, np.abs(g).max()))
        for t_idx in ties[:50]:
            active = active.copy()
            active[t_idx] = ~active[t_idx]
            hit = _kkt_point(A, b, active, tol)
            if hit is not None:
                return _weights(hit, active, T, it)
        # ill-conditioned free set: the converged dual iterate is already primal
        # feasible to tolerance and optimal by duality
        x = np.maximum(g, -1.0)
        if np.max(np.abs(A @ x - b)) <= tol * T:
            return _weights((nu, x, g), g <= -1.0, T, it)
    cert = _farkas(A, b)
    if cert is not None:
        raise QPInfeasible("no nonnegative weights satisfy the moment constraints", certificate=cert)
    raise QPError("active-set iteration did not converge")


def _weights(hit, active, T, it) -> PerturbationWeights:
    nu, x, g = hit
    M = 1.0 + x
    M[active] = 0.0
    return PerturbationWeights(
        M=M, lambda1=float(nu[0] / T), lambda2=nu[1:] / T,
        lambda3=np.where(active, -1.0 - g, 0.0) / T, binding_mask=active.copy(),
        method="active_set" if active.any() else "analytic", iterations=it)


def solve_weights(q: ArrayLike, p: int = 0) -> PerturbationWeights:
    """Analytic weights when nonnegative, the active-set path otherwise."""
    try:
        pw = solve_weights_analytic(q, p)
    except SingularMomentCovariance:
        return solve_weights_qp(q, p)
    if pw.feasible:
        return pw
    return solve_weights_qp(q, p)


def enumerate_active_sets(q: ArrayLike, p: int = 0, tol: float = 1e-9) -> PerturbationWeights | None:
    """Exhaustive search over active sets (small ``T`` only); used as a reference."""
    q, T, r, qbar, c = _prepare(q, p)
    if T > 16:
        raise ValueError("enumeration is limited to T <= 16")
    A, b = _constraints(q, c)
    best = None
    for k in range(T + 1):
        for S in itertools.combinations(range(T), k):
            active = np.zeros(T, dtype=bool)
            active[list(S)] = True
            nu, x = _solve_active(A, b, active)
            if nu is None:
                continue
            g = A.T @ nu
            if np.all(x[~active] >= -1.0 - tol) and np.all(g[active] <= -1.0 + tol):
                M = 1.0 + x
                M[active] = 0.0
                cand = PerturbationWeights(M=M, lambda1=float(nu[0] / T), lambda2=nu[1:] / T,
                                           lambda3=np.where(active, -1.0 - g, 0.0) / T,
                                           binding_mask=active, method="enumeration")
                if best is None or cand.objective < best.objective - 1e-12:
                    best = cand
    return best


# ---------------------------------------------------------------------------
# wedges


@dataclass(frozen=True)
class WedgeSeries:
    """Wedge paths implied by the perturbation weights at one parameter point.

    Attributes
    ----------
    lambda_t : ndarray, shape (T, n_Y)
        ``(1 - M_t) e_t`` with ``e_t`` the forecast errors.
    lambda_mean : ndarray
        Time average of ``lambda_t``.
    lambda_std : ndarray
        ``lambda_mean`` divided by the standard deviation of ``e``.
    raw_mean : ndarray
        Time average of the forecast errors themselves.
    theta_used : ndarray
    weights : PerturbationWeights
    """

    lambda_t: NDArray
    lambda_mean: NDArray
    lambda_std: NDArray
    raw_mean: NDArray
    theta_used: NDArray
    weights: PerturbationWeights


def oriented_moments(ms) -> tuple[NDArray, int, NDArray]:
    """Reorder a moment system into ``[equalities, one-sided as <= 0]``."""
    d = ms.directions
    eq = np.flatnonzero(d == 0)
    ineq = np.flatnonzero(d != 0)
    q = np.hstack([ms.contributions[:, eq], -d[ineq] * ms.contributions[:, ineq]])
    return q, eq.size, np.concatenate([eq, ineq])


def wedge_series(ms, theta) -> WedgeSeries:
    """Solve the weights for one moment system and form the wedge paths."""
    q, p, _ = oriented_moments(ms)
    pw = solve_weights(q, p)
    e = ms.meta.get("residuals")
    if e is None:
        raise QPError("moment system carries no forecast errors under meta['residuals']")
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    e = e[-q.shape[0]:]
    lam = (1.0 - pw.M)[:, None] * e
    sd = e.std(axis=0)
    mean = lam.mean(axis=0)
    return WedgeSeries(lambda_t=lam, lambda_mean=mean,
                       lambda_std=np.divide(mean, sd, out=np.zeros_like(mean), where=sd > 0),
                       raw_mean=e.mean(axis=0), theta_used=np.asarray(theta, dtype=float), weights=pw)


@dataclass(frozen=True)
class WedgeEnvelope:
    """Envelope of wedge statistics over the retained parameter draws."""

    lower: NDArray
    upper: NDArray
    raw_lower: NDArray
    raw_upper: NDArray
    path_lower: NDArray
    path_upper: NDArray
    means: NDArray
    raw_means: NDArray
    thetas: NDArray
    binding_share: NDArray


def wedges_from_set(draws, mask: ArrayLike, ms_factory: Callable, max_draws: int = 200,
                    workers: int = 1) -> WedgeEnvelope:
    """Wedge envelopes over the draws in the set estimate.

    At most ``max_draws`` distinct draws are used, evenly spaced through the
    retained sample in order.
    """
    mask = np.asarray(mask, dtype=bool)
    thetas = draws.draws[mask]
    if thetas.shape[0] == 0:
        raise QPError("set estimate is empty")
    thetas = np.unique(thetas, axis=0)
    if thetas.shape[0] > max_draws:
        thetas = thetas[np.linspace(0, thetas.shape[0] - 1, max_draws).round().astype(int)]

    def one(th):
        return wedge_series(ms_factory(th), th)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(one, thetas))
    else:
        series = [one(th) for th in thetas]
    means = np.array([s.lambda_mean for s in series])
    raw = np.array([s.raw_mean for s in series])
    n = min(s.lambda_t.shape[0] for s in series)
    paths = np.stack([s.lambda_t[-n:] for s in series])
    binding = np.array([s.weights.binding_mask.mean() for s in series])
    return WedgeEnvelope(lower=means.min(axis=0), upper=means.max(axis=0), raw_lower=raw.min(axis=0),
                         raw_upper=raw.max(axis=0), path_lower=paths.min(axis=0),
                         path_upper=paths.max(axis=0), means=means, raw_means=raw, thetas=thetas,
                         binding_share=binding)
