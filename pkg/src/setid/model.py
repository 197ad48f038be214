"""Linear rational-expectations models: specification, solution and state space.

A model is the expectational system

    G X_t = F E_t X_{t+1} + H X_{t-1} + L Z_t,      Z_t = R Z_{t-1} + eps_t,

with ``eps_t ~ N(0, Sigma)``.  Its stable solution is the decision rule
``X_t = P X_{t-1} + Q Z_t``.  ``P`` solves the matrix quadratic
``F P^2 - G P + H = 0`` and ``Q`` solves ``F Q R + (F P - G) Q = -L``.
The lag loading ``H`` defaults to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .errors import (
    DimensionMismatch,
    Indeterminate,
    NoStableSolution,
    NumericalFailure,
    SolveError,
    SolveFailedAtPerturbation,
)
from .kalman import steady_state_gain

TOL_SOLVE = 1e-8
COND_MAX = 1e12
UNIT_CIRCLE_MARGIN = 1e-8
RANK_TOL = 1e-7


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ParamVector:
    """Named parameter vector with box bounds and a friction partition.

    Parameters
    ----------
    names : sequence of str
    values : array_like
    bounds : array_like, shape (n, 2)
        Closed interval per coordinate.
    friction : array_like of bool, optional
        Marks the friction block; the remaining coordinates are structural.
    """

    names: tuple[str, ...]
    values: NDArray
    bounds: NDArray
    friction: NDArray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        values = np.array(self.values, dtype=float).reshape(-1)
        bounds = np.array(self.bounds, dtype=float).reshape(-1, 2)
        n = len(names)
        friction = (np.zeros(n, dtype=bool) if self.friction is None
                    else np.array(self.friction, dtype=bool).reshape(-1))
        if values.size != n or bounds.shape[0] != n or friction.size != n:
            raise DimensionMismatch("names, values, bounds and friction must have equal length")
        if len(set(names)) != n:
            raise ValueError("parameter names must be unique")
        if np.any(bounds[:, 0] > bounds[:, 1]):
            raise ValueError("each lower bound must not exceed its upper bound")
        if np.any(values < bounds[:, 0]) or np.any(values > bounds[:, 1]):
            bad = [names[i] for i in np.flatnonzero((values < bounds[:, 0]) | (values > bounds[:, 1]))]
            raise ValueError(f"values outside bounds for {bad}")
        for arr in (values, bounds, friction):
            arr.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "friction", friction)

    def __len__(self) -> int:
        return len(self.names)

    @property
    def structural_index(self) -> NDArray:
        return np.flatnonzero(~self.friction)

    @property
    def friction_index(self) -> NDArray:
        return np.flatnonzero(self.friction)

    def with_values(self, values: ArrayLike) -> "ParamVector":
        return ParamVector(self.names, values, self.bounds, self.friction)

    def frictionless(self) -> "ParamVector":
        """Copy with the friction block set to zero (bounds widened to admit 0)."""
        v = self.values.copy()
        b = self.bounds.copy()
        v[self.friction] = 0.0
        b[self.friction, 0] = np.minimum(b[self.friction, 0], 0.0)
        b[self.friction, 1] = np.maximum(b[self.friction, 1], 0.0)
        return ParamVector(self.names, v, b, self.friction)

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}


class ModelMatrices(NamedTuple):
    G: NDArray
    F: NDArray
    H: NDArray
    L: NDArray
    R: NDArray
    Sigma: NDArray


@dataclass(frozen=True)
class ModelSpec:
    """Parameterised linear model.

    Parameters
    ----------
    n_x, n_z : int
        Endogenous and exogenous dimensions.
    matrix_map : callable
        ``theta_values -> mapping`` with keys ``G, F, L, Sigma`` and
        optionally ``H`` and ``R`` (zero when absent).
    params : ParamVector
        Names, bounds, default values and friction partition.
    selector : array_like, shape (n_y, n_x)
        Observation selector mapping endogenous states to observables.
    friction_signs : array_like of {-1, 0, 1}, shape (n_y,)
        Known direction of each observable's wedge; 0 marks an equality.
    obs_names, state_names : sequence of str, optional
    measurement_cov : array_like, optional
        Measurement noise covariance (zero by default).
    """

    n_x: int
    n_z: int
    matrix_map: Callable[[NDArray], Mapping[str, ArrayLike]]
    params: ParamVector
    selector: NDArray
    friction_signs: NDArray
    obs_names: tuple[str, ...] = ()
    state_names: tuple[str, ...] = ()
    measurement_cov: NDArray | None = None

    def __post_init__(self):
        sel = np.atleast_2d(np.asarray(self.selector, dtype=float))
        signs = np.asarray(self.friction_signs, dtype=int).reshape(-1)
        if sel.shape[1] != self.n_x:
            raise DimensionMismatch(f"selector has {sel.shape[1]} columns, expected n_x={self.n_x}")
        if signs.size != sel.shape[0]:
            raise DimensionMismatch("one friction sign per observable is required")
        if not set(np.unique(signs)).issubset({-1, 0, 1}):
            raise ValueError("friction signs must be -1, 0 or +1")
        n_y = sel.shape[0]
        obs = tuple(self.obs_names) or tuple(f"y{i + 1}" for i in range(n_y))
        states = tuple(self.state_names) or tuple(f"x{i + 1}" for i in range(self.n_x))
        if len(obs) != n_y or len(states) != self.n_x:
            raise DimensionMismatch("observable or state names do not match dimensions")
        mcov = None
        if self.measurement_cov is not None:
            mcov = np.atleast_2d(np.asarray(self.measurement_cov, dtype=float))
            if mcov.shape != (n_y, n_y):
                raise DimensionMismatch("measurement covariance must be n_y x n_y")
        object.__setattr__(self, "selector", sel)
        object.__setattr__(self, "friction_signs", signs)
        object.__setattr__(self, "obs_names", obs)
        object.__setattr__(self, "state_names", states)
        object.__setattr__(self, "measurement_cov", mcov)

    @property
    def n_y(self) -> int:
        return self.selector.shape[0]

    def matrices(self, theta: ParamVector | ArrayLike) -> ModelMatrices:
        """Evaluate and validate the system matrices at ``theta``."""
        values = _values(theta)
        raw = self.matrix_map(values)
        nx, nz = self.n_x, self.n_z
        shapes = {"G": (nx, nx), "F": (nx, nx), "H": (nx, nx), "L": (nx, nz),
                  "R": (nz, nz), "Sigma": (nz, nz)}
        out = {}
        for key, shape in shapes.items():
            if key in ("H", "R") and key not in raw:
                out[key] = np.zeros(shape)
                continue
            m = np.asarray(raw[key], dtype=float)
            if m.ndim < 2:
                m = m.reshape(shape)
            if m.shape != shape:
                raise DimensionMismatch(f"{key} has shape {m.shape}, expected {shape}")
            if not np.all(np.isfinite(m)):
                raise NumericalFailure(f"{key} has non-finite entries")
            out[key] = m
        S = out["Sigma"]
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S), initial=0.0)):
            raise ValueError("Sigma must be symmetric")
        if nz and np.min(np.linalg.eigvalsh(S)) < -1e-12:
            raise ValueError("Sigma must be positive semi-definite")
        return ModelMatrices(**out)

    def check_shock_stability(self, n_samples: int = 64, seed: int = 0) -> float:
        """Largest spectral radius of ``R`` over random draws within bounds."""
        rng = np.random.default_rng(seed)
        lo, hi = self.params.bounds[:, 0], self.params.bounds[:, 1]
        worst = 0.0
        for _ in range(n_samples):
            v = lo + (hi - lo) * rng.random(lo.size)
            R = self.matrices(v).R
            if R.size:
                worst = max(worst, float(np.max(np.abs(np.linalg.eigvals(R)))))
        return worst


def _values(theta: ParamVector | ArrayLike) -> NDArray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=float).reshape(-1)


# ---------------------------------------------------------------------------
# solution


@dataclass(frozen=True)
class Solution:
    """Stable decision rule ``X_t = P X_{t-1} + Q Z_t``."""

    P_star: NDArray
    Q_star: NDArray
    theta: NDArray
    eigenvalues: NDArray
    residual_P: float
    residual_Q: float
    matrices: ModelMatrices


def _stable_select(alpha, beta):
    # generalized eigenvalue alpha/beta strictly inside the unit circle, with a margin
    return np.abs(alpha) < (1.0 - UNIT_CIRCLE_MARGIN) * np.abs(beta)


def _newton_refine(F, G, H, P, steps: int = 3):
    """Polish a solvent of ``F P^2 - G P + H = 0`` with Newton steps.

    The Frechet derivative ``dP -> (F P - G) dP + F dP P`` is solved in
    Kronecker form; a step is kept only if it lowers the residual.
    """
    n = P.shape[0]
    res = (F @ P - G) @ P + H
    best = np.max(np.abs(res), initial=0.0)
    for _ in range(steps):
        if best <= 1e-14 * max(1.0, np.max(np.abs(G), initial=0.0)):
            break
        J = np.kron(np.eye(n), F @ P - G) + np.kron(P.T, F)
        try:
            dP = np.linalg.solve(J, -res.reshape(-1, order="F")).reshape((n, n), order="F")
        except np.linalg.LinAlgError:
            break
        trial = P + dP
        trial_res = (F @ trial - G) @ trial + H
        trial_best = np.max(np.abs(trial_res), initial=0.0)
        if not trial_best < best:
            break
        P, res, best = trial, trial_res, trial_best
    return P


def solve_matrices(m: ModelMatrices, theta: ArrayLike | None = None) -> Solution:
    """Solve the model given evaluated matrices.

    The quadratic ``F P^2 - G P + H = 0`` is linearised into the pencil

        [[0, I], [-H, G]] v = lam [[I, 0], [0, F]] v,

    whose eigenvectors have the form ``(x, lam x)``.  An ordered QZ
    decomposition moves the stable eigenvalues to the leading block and ``P``
    is read off the corresponding deflating subspace.  Eigenvalues within
    ``UNIT_CIRCLE_MARGIN`` of the unit circle count as unstable.
    """
    G, F, H, L, R = m.G, m.F, m.H, m.L, m.R
    n = G.shape[0]
    I = np.eye(n)
    Z0 = np.zeros((n, n))
    A = np.block([[Z0, I], [-H, G]])
    B = np.block([[I, Z0], [Z0, F]])
    try:
        AA, BB, alpha, beta, _, Zm = linalg.ordqz(A, B, sort=_stable_select, output="real")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"QZ decomposition failed: {exc}") from exc
    if np.any((np.abs(alpha) < 1e-14) & (np.abs(beta) < 1e-14)):
        raise NumericalFailure("singular pencil: some eigenvalue is 0/0")
    with np.errstate(divide="ignore", invalid="ignore"):
        eig = np.where(np.abs(beta) > 0, alpha / np.where(beta == 0, 1.0, beta), np.inf)
    n_stable = int(np.sum(_stable_select(alpha, beta)))
    if n_stable > n:
        raise Indeterminate(f"{n_stable} stable roots for {n} states")
    if n_stable < n:
        raise NoStableSolution(f"only {n_stable} stable roots for {n} states")
    Z11 = Zm[:n, :n]
    Z21 = Zm[n:, :n]
    if np.linalg.cond(Z11) > COND_MAX:
        raise NumericalFailure("stable deflating subspace is ill conditioned")
    P = _newton_refine(F, G, H, linalg.solve(Z11.T, Z21.T).T)
    nz = L.shape[1]
    M = np.kron(R.T, F) + np.kron(np.eye(nz), F @ P - G)
    if nz:
        if np.linalg.cond(M) > COND_MAX:
            raise NumericalFailure("shock-loading equation is ill conditioned")
        Q = np.linalg.solve(M, -L.reshape(-1, order="F")).reshape((n, nz), order="F")
    else:
        Q = np.zeros((n, 0))
    res_P = float(np.max(np.abs((F @ P - G) @ P + H), initial=0.0))
    res_Q = float(np.max(np.abs(F @ Q @ R + (F @ P - G) @ Q + L), initial=0.0))
    if res_P > TOL_SOLVE or res_Q > TOL_SOLVE:
        raise NumericalFailure(f"solution residuals too large ({res_P:.2e}, {res_Q:.2e})")
    order = np.lexsort((np.angle(eig.astype(complex)), np.abs(eig)))
    theta_arr = np.array([] if theta is None else theta, dtype=float)
    for arr in (P, Q, theta_arr):
        arr.setflags(write=False)
    return Solution(P_star=P, Q_star=Q, theta=theta_arr, eigenvalues=eig[order],
                    residual_P=res_P, residual_Q=res_Q, matrices=m)


def solve_re(spec: ModelSpec, theta: ParamVector | ArrayLike) -> Solution:
    """Solve ``spec`` at ``theta`` for its unique stable decision rule.

    Raises
    ------
    Indeterminate
        More stable roots than endogenous states.
    NoStableSolution
        Fewer stable roots than endogenous states.
    NumericalFailure
        Ill-conditioned decomposition or residuals above ``TOL_SOLVE``.
    """
    if isinstance(theta, ParamVector):
        values = theta.values
    else:
        values = np.asarray(theta, dtype=float).reshape(-1)
        b = spec.params.bounds
        if values.size != b.shape[0]:
            raise DimensionMismatch("theta has the wrong length")
        if np.any(values < b[:, 0]) or np.any(values > b[:, 1]):
            raise ValueError("theta outside parameter bounds")
    return solve_matrices(spec.matrices(values), values)


# ---------------------------------------------------------------------------
# state space


@dataclass(frozen=True)
class StateSpace:
    """Innovation-form system ``S_t = A S_{t-1} + B eps_t``, ``Y_t = C S_t + m_t``.

    When the shock process is serially correlated the state stacks
    ``(X_t, Z_t)``; otherwise it is ``X_t`` alone.
    """

    A: NDArray
    B: NDArray
    C: NDArray
    K: NDArray
    Sigma_a: NDArray
    Sigma_eps: NDArray
    H: NDArray
    P_pred: NDArray
    riccati_iters: int
    lci3_nonsingular: bool
    n_x: int

    @property
    def n_state(self) -> int:
        return self.A.shape[0]


def assemble_state_space(sol: Solution, spec: ModelSpec) -> StateSpace:
    """Build the state-space form and its steady Kalman gain."""
    P, Q = sol.P_star, sol.Q_star
    m = sol.matrices
    R, Sigma = m.R, m.Sigma
    n_x, n_z = P.shape[0], Q.shape[1]
    if n_z and np.any(R != 0.0):
        A = np.block([[P, Q @ R], [np.zeros((n_z, n_x)), R]])
        B = np.vstack([Q, np.eye(n_z)])
        C = np.hstack([spec.selector, np.zeros((spec.n_y, n_z))])
    else:
        A, B, C = P.copy(), Q.copy(), spec.selector.copy()
    Hm = spec.measurement_cov if spec.measurement_cov is not None else np.zeros((spec.n_y, spec.n_y))
    K, P_pred, Sigma_a, iters = steady_state_gain(A, B, C, Sigma, Hm)
    D = C @ B
    DSD = D @ Sigma @ D.T
    lci3 = bool(np.linalg.matrix_rank(DSD, tol=RANK_TOL * max(1.0, np.max(np.abs(DSD), initial=0.0)))
                == DSD.shape[0])
    return StateSpace(A=A, B=B, C=C, K=K, Sigma_a=Sigma_a, Sigma_eps=Sigma, H=Hm, P_pred=P_pred,
                      riccati_iters=iters, lci3_nonsingular=lci3, n_x=n_x)


def rank_diagnostics(ss: StateSpace) -> dict:
    """Controllability and observability ranks (reported, never enforced)."""
    n = ss.n_state
    ctrb = np.hstack([np.linalg.matrix_power(ss.A, k) @ ss.B for k in range(n)])
    obsv = np.vstack([ss.C @ np.linalg.matrix_power(ss.A, k) for k in range(n)])
    rc = int(np.linalg.matrix_rank(ctrb, tol=RANK_TOL * max(1.0, np.linalg.norm(ctrb, 2))))
    ro = int(np.linalg.matrix_rank(obsv, tol=RANK_TOL * max(1.0, np.linalg.norm(obsv, 2))))
    return {"n_state": n, "controllability_rank": rc, "observability_rank": ro,
            "controllable": rc == n, "observable": ro == n}


# ---------------------------------------------------------------------------
# local identification


@dataclass(frozen=True)
class IdentificationReport:
    rank: int
    required: int
    passed: bool
    singular_values: NDArray
    jacobian: NDArray


def _reduced_form_vector(ss: StateSpace) -> NDArray:
    n_y = ss.Sigma_a.shape[0]
    iu = np.triu_indices(n_y)
    return np.concatenate([ss.A.ravel(order="F"), ss.K.ravel(order="F"),
                           ss.C.ravel(order="F"), ss.Sigma_a.T[iu]])


def check_local_identification(
    spec: ModelSpec,
    theta: ParamVector | ArrayLike,
    eps_fd: ArrayLike | None = None,
    rank_tol: float = RANK_TOL,
) -> IdentificationReport:
    """Rank test on the Jacobian of the innovation-form reduced form.

    The reduced form ``(vec(T A T^-1), vec(T K), vec(C T^-1), vech(Sigma_a))``
    is differentiated with respect to ``theta`` by central differences and
    with respect to the similarity transform ``T`` analytically at ``T = I``.
    Local identification requires rank ``n_theta + n_state**2``.
    """
    values = _values(theta).copy()
    n_t = values.size
    if eps_fd is None:
        steps = 1e-6 * (1.0 + np.abs(values))
    else:
        steps = np.broadcast_to(np.asarray(eps_fd, dtype=float), values.shape).copy()

    def reduced(v):
        try:
            sol = solve_matrices(spec.matrices(v), v)
            return _reduced_form_vector(assemble_state_space(sol, spec))
        except SolveError as exc:
            raise SolveFailedAtPerturbation(str(exc)) from exc

    base_ss = assemble_state_space(solve_matrices(spec.matrices(values), values), spec)
    base = _reduced_form_vector(base_ss)
    cols = []
    for i in range(n_t):
        up, dn = values.copy(), values.copy()
        up[i] += steps[i]
        dn[i] -= steps[i]
        cols.append((reduced(up) - reduced(dn)) / (2.0 * steps[i]))

    A, K, C = base_ss.A, base_ss.K, base_ss.C
    n = A.shape[0]
    n_y = base_ss.Sigma_a.shape[0]
    for j in range(n):
        for i in range(n):
            E = np.zeros((n, n))
            E[i, j] = 1.0
            dA = E @ A - A @ E
            dK = E @ K
            dC = -C @ E
            cols.append(np.concatenate([dA.ravel(order="F"), dK.ravel(order="F"),
                                        dC.ravel(order="F"), np.zeros(n_y * (n_y + 1) // 2)]))
    J = np.column_stack(cols)
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0])) if sv.size and sv[0] > 0 else 0
    required = n_t + n * n
    assert base.size == J.shape[0]
    return IdentificationReport(rank=rank, required=required, passed=rank >= required,
                                singular_values=sv, jacobian=J)


# ---------------------------------------------------------------------------
# simulation


def simulate(
    sol: Solution,
    T: int,
    seed: int | np.random.Generator = 0,
    burn: int = 200,
    wedge: Callable[[int, NDArray], NDArray] | None = None,
) -> tuple[NDArray, NDArray]:
    """Simulate ``X_t = P X_{t-1} + Q Z_t (+ wedge)`` and the shock process.

    Parameters
    ----------
    wedge : callable, optional
        ``(t, X_prev) -> vector`` added to the endogenous block each period.

    Returns
    -------
    X : ndarray, shape (T, n_x)
    Z : ndarray, shape (T, n_z)
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = sol.matrices
    P, Q, R = sol.P_star, sol.Q_star, m.R
    n_x, n_z = Q.shape
    chol = _psd_factor(m.Sigma)
    eps = rng.standard_normal((T + burn, n_z)) @ chol.T
    X = np.zeros((T + burn, n_x))
    Z = np.zeros((T + burn, n_z))
    x_prev = np.zeros(n_x)
    z_prev = np.zeros(n_z)
    for t in range(T + burn):
        z = R @ z_prev + eps[t]
        x = P @ x_prev + Q @ z
        if wedge is not None and t >= burn:
            x = x + wedge(t - burn, x_prev)
        X[t], Z[t] = x, z
        x_prev, z_prev = x, z
    return X[burn:], Z[burn:]


def _psd_factor(S: NDArray) -> NDArray:
    if S.size == 0:
        return S
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def random_stable_model(
    rng: np.random.Generator,
    n_x: int,
    n_z: int,
    stable_radius: float = 0.95,
    unstable_radius: float = 1.05,
) -> tuple[ModelMatrices, NDArray]:
    """Draw a determinate model with a known stable solvent.

    The quadratic is built from the factorisation
    ``F lam^2 - G lam + H = (F lam - F U)(lam I - P)`` with ``P`` stable and
    ``U`` having every eigenvalue outside the unit circle, so ``P`` is the
    unique stable solvent.

    Returns
    -------
    matrices : ModelMatrices
    P : ndarray
        The planted stable solvent.
    """
    def with_spectrum(radii):
        V = rng.standard_normal((n_x, n_x)) + 2.0 * np.eye(n_x)
        return V @ np.diag(radii) @ np.linalg.inv(V)

    sign = rng.choice([-1.0, 1.0], size=n_x)
    P = with_spectrum(sign * rng.uniform(0.0, stable_radius, size=n_x))
    U = with_spectrum(rng.choice([-1.0, 1.0], size=n_x) * rng.uniform(unstable_radius, 3.0, size=n_x))
    F = rng.standard_normal((n_x, n_x)) + 2.0 * np.eye(n_x)
    G = F @ P + F @ U
    H = F @ U @ P
    L = rng.standard_normal((n_x, n_z))
    R = np.diag(rng.uniform(-0.9, 0.9, size=n_z))
    W = rng.standard_normal((n_z, n_z))
    Sigma = W @ W.T + np.eye(n_z)
    return ModelMatrices(G=G, F=F, H=H, L=L, R=R, Sigma=Sigma), P


def rbc_investment_spec(
    alpha: float = 0.33,
    sbar: float = 0.20,
    omega: float = 2.0,
    width: float = 0.05,
) -> ModelSpec:
    """Frictionless aggregate investment rule as a one-state model with a lag.

    The second-order difference equation

        (sbar/alpha) E I_{t+1} - (1 + ((1-alpha)(1-sbar) + sbar*omega)/(alpha*omega)) I_t
            + I_{t-1} = Z_t / alpha

    is written as ``G I_t = F E I_{t+1} + H I_{t-1} + L Z_t`` with i.i.d.
    productivity.  The generalized eigenvalues of the solver's pencil are the
    roots of ``F lam^2 - G lam + H``.
    """
    names = ("alpha", "sbar", "omega")
    vals = np.array([alpha, sbar, omega])
    bounds = np.column_stack([vals - width * np.abs(vals), vals + width * np.abs(vals)])

    def matrix_map(v):
        a, s, w = v
        return {
            "G": [[1.0 + ((1.0 - a) * (1.0 - s) + s * w) / (a * w)]],
            "F": [[s / a]],
            "H": [[1.0]],
            "L": [[-1.0 / a]],
            "R": [[0.0]],
            "Sigma": [[1.0]],
        }

    return ModelSpec(n_x=1, n_z=1, matrix_map=matrix_map,
                     params=ParamVector(names, vals, bounds),
                     selector=[[1.0]], friction_signs=[0], obs_names=("investment",),
                     state_names=("investment",))


def investment_polynomial(alpha: float, sbar: float, omega: float) -> NDArray:
    """Coefficients (highest power first) of the investment lag polynomial."""
    return np.array([sbar / alpha, -(1.0 + ((1.0 - alpha) * (1.0 - sbar) + sbar * omega) / (alpha * omega)), 1.0])


__all__: Sequence[str] = [
    "ParamVector", "ModelMatrices", "ModelSpec", "Solution", "StateSpace",
    "IdentificationReport", "solve_re", "solve_matrices", "assemble_state_space",
    "check_local_identification", "rank_diagnostics", "simulate",
    "random_stable_model", "rbc_investment_spec", "investment_polynomial",
]
