"""Mapping first-order-condition distortions to decision-rule distortions.

If the equilibrium conditions carry an additive distortion ``mu_t`` and the
induced decision-rule distortion follows ``lambda_t = Gamma lambda_{t-1} + nu_t``,
conditional means satisfy ``(F Gamma - G) lambda = -mu`` with ``F`` and ``G``
evaluated at the frictionless parameter point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from .errors import CalibrationOutsideValidRegion, SingularMapUnflagged
from .model import ModelSpec, ParamVector

RANK_TOL = 1e-10


@dataclass(frozen=True)
class WedgeLaw:
    """Persistence of the decision-rule wedge and the implied sign pattern.

    Attributes
    ----------
    Gamma : ndarray
        Wedge persistence matrix.
    sign_mu : ndarray
        Direction of each equation's mean distortion.
    sign_lambda : ndarray
        Direction of each state's mean wedge implied by ``sign_mu``.
    used_pinv : bool
        True when the map was rank deficient and a minimum-norm solution was
        returned.
    """

    Gamma: NDArray
    sign_mu: NDArray
    sign_lambda: NDArray
    used_pinv: bool = False


@dataclass(frozen=True)
class MuToLambdaResult:
    lambda_mean: NDArray
    signs: NDArray
    residual: float
    used_pinv: bool


def distortion_map(spec: ModelSpec, theta: ParamVector | ArrayLike, Gamma: ArrayLike) -> NDArray:
    """``F Gamma - G`` at ``theta`` with the friction block set to zero."""
    values = _frictionless_values(spec, theta)
    m = spec.matrices(values)
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    if Gamma.shape != m.F.shape:
        raise ValueError(f"Gamma must be {m.F.shape}, got {Gamma.shape}")
    return m.F @ Gamma - m.G


def _frictionless_values(spec: ModelSpec, theta) -> NDArray:
    if isinstance(theta, ParamVector):
        return theta.frictionless().values
    values = np.asarray(theta, dtype=float).reshape(-1).copy()
    values[spec.params.friction] = 0.0
    return values


def solve_distortion(
    C: ArrayLike,
    mu_mean: ArrayLike,
    allow_pinv: bool = False,
    rank_tol: float = RANK_TOL,
) -> MuToLambdaResult:
    """Solve ``C lambda = -mu`` for the mean wedge.

    A rank-deficient ``C`` raises unless ``allow_pinv`` is set, in which case
    the minimum-norm least-squares solution is returned and flagged.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    mu = np.asarray(mu_mean, dtype=float).reshape(-1)
    if C.shape[0] != mu.size:
        raise ValueError("mu has the wrong length")
    sv = np.linalg.svd(C, compute_uv=False)
    full_rank = sv.size > 0 and sv[-1] > rank_tol * max(sv[0], 1.0) and C.shape[0] == C.shape[1]
    if full_rank:
        lu = linalg.lu_factor(C)
        lam = linalg.lu_solve(lu, -mu)
        used = False
    elif allow_pinv:
        lam = np.linalg.pinv(C, rcond=rank_tol) @ (-mu)
        used = True
    else:
        raise SingularMapUnflagged("F Gamma - G is rank deficient; pass allow_pinv=True to accept a "
                                   "minimum-norm solution")
    res = float(np.max(np.abs(C @ lam + mu), initial=0.0))
    signs = np.sign(np.where(np.abs(lam) > 1e-14, lam, 0.0)).astype(int)
    return MuToLambdaResult(lambda_mean=lam, signs=signs, residual=res, used_pinv=used)


def mu_to_lambda(
    spec: ModelSpec,
    theta1: ParamVector | ArrayLike,
    Gamma: ArrayLike,
    mu_mean: ArrayLike,
    allow_pinv: bool = False,
) -> MuToLambdaResult:
    """Conditional-mean decision-rule wedge implied by an equation distortion.

    Parameters
    ----------
    spec : ModelSpec
    theta1 : ParamVector or array_like
        Parameter point; its friction block is zeroed before evaluation.
    Gamma : array_like
        Wedge persistence, ``n_x x n_x``.
    mu_mean : array_like
        Mean distortion of each equilibrium condition.
    allow_pinv : bool
        Accept a minimum-norm solution when the map is singular.
    """
    return solve_distortion(distortion_map(spec, theta1, Gamma), mu_mean, allow_pinv=allow_pinv)


def wedge_law(spec, theta1, Gamma, sign_mu, allow_pinv: bool = False) -> WedgeLaw:
    """Sign pattern of the state wedges implied by the equation distortion signs."""
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=float))
    if Gamma.size and np.max(np.abs(np.linalg.eigvals(Gamma))) >= 1.0:
        raise ValueError("Gamma must have spectral radius below one")
    res = mu_to_lambda(spec, theta1, Gamma, np.asarray(sign_mu, dtype=float), allow_pinv)
    return WedgeLaw(Gamma=Gamma, sign_mu=np.asarray(sign_mu, dtype=int), sign_lambda=res.signs,
                    used_pinv=res.used_pinv)


def default_gamma(residuals: ArrayLike, n_x: int) -> tuple[NDArray, float]:
    """``rho I`` with ``rho`` the pooled AR(1) coefficient of ``residuals``.

    The coefficient is clipped into (-0.99, 0.99) so the law stays stable.
    """
    r = np.asarray(residuals, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    r = r - r.mean(axis=0)
    num = float(np.sum(r[1:] * r[:-1]))
    den = float(np.sum(r[:-1] ** 2))
    rho = num / den if den > 0 else 0.0
    rho = float(np.clip(rho, -0.99, 0.99))
    return rho * np.eye(n_x), rho


# ---------------------------------------------------------------------------
# capital-adjustment reduction used as a worked check


def capital_adjustment_spec(alpha: float = 0.33, gamma1: float = 0.4, gamma2: float = 0.5,
                            gamma3: float = 0.6) -> ModelSpec:
    """Two-equation investment / capital block ``(I_t, K_{t+1})``.

    ``G = [[1, gamma1 + (1-alpha) gamma3], [1, -1]]``, ``F = diag(1, 0)``,
    ``L = (gamma2, 0)'``.  The second row imposes ``K_{t+1} = I_t``.
    """
    names = ("alpha", "gamma1", "gamma2", "gamma3")
    vals = np.array([alpha, gamma1, gamma2, gamma3])
    bounds = np.column_stack([vals - 0.1, vals + 0.1])

    def matrix_map(v):
        a, g1, g2, g3 = v
        return {"G": [[1.0, g1 + (1.0 - a) * g3], [1.0, -1.0]],
                "F": [[1.0, 0.0], [0.0, 0.0]],
                "L": [[g2], [0.0]], "R": [[0.0]], "Sigma": [[1.0]]}

    return ModelSpec(n_x=2, n_z=1, matrix_map=matrix_map, params=ParamVector(names, vals, bounds),
                     selector=np.eye(2), friction_signs=[-1, -1],
                     obs_names=("investment", "capital_next"), state_names=("investment", "capital_next"))


# ---------------------------------------------------------------------------
# sign fixtures


class Economy(enum.Enum):
    LiquidityConstraint = "liquidity_constraint"
    AdjustmentCost = "adjustment_cost"
    Irreversibility = "irreversibility"
    NonRationalExp = "non_rational_expectations"


def _calib(calibration) -> dict[str, float]:
    if isinstance(calibration, ParamVector):
        return calibration.as_dict()
    return {k: float(v) for k, v in dict(calibration).items()}


def sign_fixture(economy: Economy | str, calibration: ParamVector | dict) -> NDArray:
    """Known direction of ``E[wedge * instrument]`` for a friction economy.

    Returns a one-element direction vector: ``+1`` for a nonnegative moment,
    ``-1`` for a nonpositive one.

    Raises
    ------
    CalibrationOutsideValidRegion
        When the calibration violates the conditions under which the sign is
        established.
    """
    econ = Economy(economy) if not isinstance(economy, Economy) else economy
    c = _calib(calibration)

    def need(name, ok, msg):
        if name in c and not ok(c[name]):
            raise CalibrationOutsideValidRegion(f"{econ.name}: {msg} (got {name}={c[name]})")

    if econ is Economy.LiquidityConstraint:
        need("beta", lambda b: 0.0 < b < 1.0, "beta must lie in (0, 1)")
        need("r", lambda r: r > -1.0, "r must exceed -1")
        need("omega", lambda w: w > 0.0, "omega must be positive")
        return np.array([1])
    if econ is Economy.AdjustmentCost:
        need("omega", lambda w: w > 1.0, "omega must exceed 1")
        need("phi", lambda p: 0.0 <= p < 1.0, "phi must lie in [0, 1)")
        if "alpha" in c and "beta" in c and not c["alpha"] < 1.0 / (2.0 * c["beta"]):
            raise CalibrationOutsideValidRegion("AdjustmentCost: alpha must be below 1/(2 beta)")
        if "alpha" in c and "sbar" in c and not c["sbar"] < c["alpha"]:
            raise CalibrationOutsideValidRegion("AdjustmentCost: saddle path requires sbar < alpha")
        return np.array([-1])
    if econ is Economy.Irreversibility:
        need("p_high", lambda p: 0.0 <= p < 1.0, "p_high must lie in [0, 1)")
        need("eps_gap", lambda d: d > 0.0, "eps_gap must be positive")
        return np.array([-1])
    need("rho", lambda r: abs(r) < 1.0, "rho must lie inside (-1, 1)")
    need("alpha", lambda a: 0.0 < a < 1.0, "alpha must lie in (0, 1)")
    return np.array([1])
