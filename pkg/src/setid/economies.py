"""Simulators for the friction economies used as sign and bound fixtures.

Each simulator returns the wedge series, the instrument it is paired with,
and the direction the paired moment is known to take.  Parameters follow the
usual real-business-cycle notation: ``alpha`` capital share, ``beta``
discount factor, ``omega`` inverse intertemporal elasticity, ``sbar``
steady-state savings rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .model import ModelSpec, ParamVector, solve_re
from .wedges import Economy, sign_fixture


@dataclass(frozen=True)
class FixtureSample:
    economy: Economy
    wedge: NDArray
    instrument: NDArray
    direction: int
    info: dict = field(default_factory=dict)

    @property
    def moment_series(self) -> NDArray:
        return self.wedge * self.instrument


def batch_means_se(x: NDArray, n_batches: int = 50) -> tuple[float, float]:
    """Sample mean and its batch-means standard error."""
    x = np.asarray(x, dtype=float)
    m = x.size // n_batches
    if m < 2:
        raise ValueError("series too short for the requested batches")
    means = x[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / np.sqrt(n_batches))


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# liquidity constraint (partial equilibrium consumption)


@dataclass(frozen=True)
class ConsumptionSample:
    """Two-regime consumption panel for one household.

    ``c`` has length ``T + 1``; ``regime[t]`` is 1 when the transition from
    ``c[t]`` to ``c[t+1]`` happens in the constrained regime.
    """

    c: NDArray
    regime: NDArray
    mu_true: float
    lambda1: float

    @property
    def macro_bound(self) -> float:
        """Upper endpoint ``1 + E[c_t dc_{t+1}] / E[c_t^2]`` of the macro-only set."""
        c0, c1 = self.c[:-1], self.c[1:]
        return float(1.0 + np.dot(c0, c1 - c0) / np.dot(c0, c0))

    @property
    def survey_bound(self) -> float:
        """Upper endpoint once the survey row is added: OLS on unconstrained periods."""
        c0, c1 = self.c[:-1], self.c[1:]
        w = 1.0 - self.regime
        return float(np.dot(w * c0, c1) / np.dot(w * c0, c0))


def simulate_consumption(
    T: int,
    seed=0,
    mu_tilde: float = -0.5,
    lambda1: float = 0.4,
    lambda2: float = 0.0,
    p_constrained: float = 0.5,
    sigma: float = 1.0,
    burn: int = 500,
) -> ConsumptionSample:
    """Simulate ``c_{t+1} = (1 + mu_tilde) c_t + e_{t+1} + chi_t (lambda1 c_t + lambda2 e_{t+1})``.

    The regime indicator ``chi_t`` is i.i.d. Bernoulli(``p_constrained``) and
    independent of the consumption history, which keeps the process
    stationary.  The wedge ``chi_t (lambda1 c_t + lambda2 e)`` has
    ``E[c_t wedge_t] = p lambda1 E[c_t^2] > 0`` for ``lambda1 > 0``.
    """
    rng = _rng(seed)
    mu = 1.0 + mu_tilde
    n = T + burn
    eps = sigma * rng.standard_normal(n)
    chi = (rng.random(n) < p_constrained).astype(float)
    # stationarity in mean square
    if (1 - p_constrained) * mu ** 2 + p_constrained * (mu + lambda1) ** 2 >= 1.0:
        raise ValueError("consumption process is not mean-square stationary")
    c = np.empty(n + 1)
    c[0] = 0.0
    for t in range(n):
        c[t + 1] = (mu + chi[t] * lambda1) * c[t] + (1.0 + chi[t] * lambda2) * eps[t]
    return ConsumptionSample(c=c[burn:], regime=chi[burn:], mu_true=mu, lambda1=lambda1)


def liquidity_fixture(T: int = 100_000, seed=0, **kw) -> FixtureSample:
    s = simulate_consumption(T, seed, **kw)
    c0, c1 = s.c[:-1], s.c[1:]
    wedge = c1 - s.mu_true * c0
    direction = int(sign_fixture(Economy.LiquidityConstraint, {})[0])
    return FixtureSample(Economy.LiquidityConstraint, wedge, c0, direction,
                         {"macro_bound": s.macro_bound, "mu_true": s.mu_true})


# ---------------------------------------------------------------------------
# adjustment constraints with the investment-rate cost family


def adjustment_gammas(alpha, sbar, omega, beta, phi, psi1: float = 1.0):
    """Coefficients of ``g1 E I_{t+1} - (1 + g1 + (1-alpha) g3) I_t + I_{t-1} = g2 Z_t``.

    ``psi1`` is the slope of the aggregate investment-rate function at steady
    state and ``phi`` its curvature ratio.
    """
    big1 = 1.0 + beta * (psi1 - 1.0)
    big2 = omega * (psi1 * sbar * (alpha - sbar) + sbar) - sbar * (1.0 - sbar) * phi
    g1 = (omega * sbar - phi * sbar * (1.0 - sbar)) / big2
    g2 = omega / big2
    g3 = big1 * (1.0 - sbar) / big2
    return g1, g2, g3


def adjustment_investment_spec(alpha=0.33, sbar=0.20, omega=2.0, beta=0.99) -> ModelSpec:
    """Investment rule with the adjustment curvature ``phi`` as its friction parameter."""
    names = ("alpha", "sbar", "omega", "beta", "phi")
    vals = np.array([alpha, sbar, omega, beta, 0.0])
    bounds = np.array([[0.2, 0.5], [0.05, 0.3], [1.0, 4.0], [0.9, 0.999], [0.0, 0.9]])

    def matrix_map(v):
        a, s, w, b, p = v
        g1, g2, g3 = adjustment_gammas(a, s, w, b, p)
        return {"G": [[1.0 + g1 + (1.0 - a) * g3]], "F": [[g1]], "H": [[1.0]],
                "L": [[-g2]], "R": [[0.0]], "Sigma": [[1.0]]}

    return ModelSpec(n_x=1, n_z=1, matrix_map=matrix_map,
                     params=ParamVector(names, vals, bounds, friction=[0, 0, 0, 0, 1]),
                     selector=[[1.0]], friction_signs=[-1], obs_names=("investment",),
                     state_names=("investment",))


def adjustment_general_fixture(T: int = 100_000, seed=0, alpha=0.33, sbar=0.20, omega=2.0,
                               beta=0.99, phi=0.5) -> FixtureSample:
    """Capital adjustment constraints versus the frictionless investment rule.

    Data are generated from the constrained rule ``I_t = rho1(phi) K_t + Q(phi) Z_t``
    with ``K_t = I_{t-1}``; the wedge is measured against the frictionless
    coefficients ``(rho1(0), Q(0))``.
    """
    direction = int(sign_fixture(Economy.AdjustmentCost,
                                 {"omega": omega, "alpha": alpha, "beta": beta, "phi": phi,
                                  "sbar": sbar})[0])
    spec = adjustment_investment_spec(alpha, sbar, omega, beta)
    base = np.array([alpha, sbar, omega, beta, 0.0])
    sol0 = solve_re(spec, base)
    sol1 = solve_re(spec, np.array([alpha, sbar, omega, beta, phi]))
    rho0, q0 = float(sol0.P_star[0, 0]), float(sol0.Q_star[0, 0])
    rho1, q1 = float(sol1.P_star[0, 0]), float(sol1.Q_star[0, 0])
    rng = _rng(seed)
    burn = 200
    z = rng.standard_normal(T + burn + 1)
    inv = np.empty(T + burn + 1)
    inv[0] = 0.0
    for t in range(1, T + burn + 1):
        inv[t] = rho1 * inv[t - 1] + q1 * z[t]
    k = inv[burn:-1]
    i_con = inv[burn + 1:]
    zz = z[burn + 1:]
    wedge = i_con - (rho0 * k + q0 * zz)
    return FixtureSample(Economy.AdjustmentCost, wedge, k, direction,
                         {"rho1_frictionless": rho0, "rho1_constrained": rho1})


# ---------------------------------------------------------------------------
# quadratic adjustment costs with full depreciation


def adjustment_cost_coefficients(alpha, beta, omega, phi):
    den = omega + phi * (1.0 + beta * (1.0 - alpha)) + 1.0 - alpha
    g1 = (alpha - phi * (1.0 - beta * alpha)) / den
    g2 = (omega + beta * phi) / den
    g3 = -alpha * (1.0 - beta * phi) / den
    return g1, g2, g3, g1 / (1.0 - g2)


def adjustment_cost_fixture(T: int = 100_000, seed=0, alpha=0.33, beta=0.99, omega=2.0,
                            phi=0.5) -> FixtureSample:
    """Quadratic capital adjustment costs, full depreciation, i.i.d. productivity.

    The wedge is the closed-form distortion

        -(s/omega) dzeta (1-alpha) K_t + (s/omega)(dzeta + g3(0) - g3(phi)) Z_t,

    where ``zeta = g1/(1-g2)`` is the long-run weight of the forward return sum
    and ``dzeta = zeta(0) - zeta(phi) > 0``.  It is evaluated along the
    frictionless capital path ``K_{t+1} = I*_t`` with
    ``I* = (1+s)(Z + alpha K) + (s/omega)(zeta(0) R + g3(0) Z)`` and
    ``R = Z - (1-alpha) K``.
    """
    direction = int(sign_fixture(Economy.AdjustmentCost,
                                 {"omega": omega, "alpha": alpha, "beta": beta, "phi": phi})[0])
    sbar = alpha * beta
    s = (1.0 - sbar) / sbar
    *_, g3_0, zeta0 = adjustment_cost_coefficients(alpha, beta, omega, 0.0)
    *_, g3_1, zeta1 = adjustment_cost_coefficients(alpha, beta, omega, phi)
    dzeta = zeta0 - zeta1
    k0 = (1.0 + s) * alpha - (s / omega) * zeta0 * (1.0 - alpha)
    zc0 = (1.0 + s) + (s / omega) * (zeta0 + g3_0)
    if abs(k0) >= 1.0:
        raise ValueError("frictionless capital process is not stationary")
    rng = _rng(seed)
    burn = 200
    z = rng.standard_normal(T + burn)
    cap = np.empty(T + burn + 1)
    cap[0] = 0.0
    for t in range(T + burn):
        cap[t + 1] = k0 * cap[t] + zc0 * z[t]
    k = cap[burn:-1]
    zz = z[burn:]
    wedge = (s / omega) * (-dzeta * (1.0 - alpha) * k + (dzeta + g3_0 - g3_1) * zz)
    return FixtureSample(Economy.AdjustmentCost, wedge, k, direction,
                         {"delta_zeta": dzeta, "k_coef_frictionless": k0})


# ---------------------------------------------------------------------------
# irreversibility


def irreversibility_fixture(T: int = 100_000, seed=0, p_high: float = 0.5, eps_gap: float = 0.1,
                            rho1: float = 0.36, q0: float = 1.0) -> FixtureSample:
    """Occasionally binding dis-investment constraint.

    The frictionless rule is ``I* = rho1 K + q0 Z``; the wedge is
    ``-(1 - p_high)(I* + K + eps_gap)`` and capital follows ``K_{t+1} = I* + wedge``.
    """
    direction = int(sign_fixture(Economy.Irreversibility, {"p_high": p_high, "eps_gap": eps_gap})[0])
    p = 1.0 - p_high
    rng = _rng(seed)
    burn = 200
    z = rng.standard_normal(T + burn)
    cap = np.empty(T + burn + 1)
    wedge = np.empty(T + burn)
    cap[0] = 0.0
    for t in range(T + burn):
        i_star = rho1 * cap[t] + q0 * z[t]
        wedge[t] = -p * (i_star + cap[t] + eps_gap)
        cap[t + 1] = i_star + wedge[t]
    k = cap[burn:-1]
    r = (1.0 - p) * rho1 - p
    a = p * (1.0 + rho1)
    mean_k = -p * eps_gap / (1.0 - r)
    var_k = ((1.0 - p) * q0) ** 2 / (1.0 - r ** 2)
    expected = -a * (var_k + mean_k ** 2) + p * p * eps_gap ** 2 / (1.0 - r)
    return FixtureSample(Economy.Irreversibility, wedge[burn:], k, direction,
                         {"expected_moment": expected})


# ---------------------------------------------------------------------------
# non-rational expectations


def non_rational_fixture(T: int = 100_000, seed=0, alpha=0.33, beta=0.99, omega=2.0,
                         rho: float = 0.5) -> FixtureSample:
    """Agents forecast productivity from output with persistence ``rho``.

    The wedge ``A2 (1 - A3 rho)^{-1} (alpha K + rho A3 Z)`` is evaluated along
    the frictionless capital path ``K_{t+1} = A1 K_t + A2 Z_t``.
    """
    direction = int(sign_fixture(Economy.NonRationalExp, {"rho": rho, "alpha": alpha})[0])
    sbar = alpha * beta
    s = (1.0 - sbar) / sbar
    *_, zeta0 = adjustment_cost_coefficients(alpha, beta, omega, 0.0)
    a1 = (1.0 + s) * alpha - (s / omega) * zeta0 * (1.0 - alpha)
    a2 = 1.0 + s
    a3 = s * alpha / ((1.0 + s) * (omega + 1.0 - alpha))
    rng = _rng(seed)
    burn = 200
    z = rng.standard_normal(T + burn)
    cap = np.empty(T + burn + 1)
    cap[0] = 0.0
    for t in range(T + burn):
        cap[t + 1] = a1 * cap[t] + a2 * z[t]
    k = cap[burn:-1]
    zz = z[burn:]
    wedge = a2 / (1.0 - a3 * rho) * (alpha * k + rho * a3 * zz)
    return FixtureSample(Economy.NonRationalExp, wedge, k, direction, {"A1": a1, "A2": a2, "A3": a3})


FIXTURES = {
    "liquidity_constraint": liquidity_fixture,
    "adjustment_general": adjustment_general_fixture,
    "adjustment_cost": adjustment_cost_fixture,
    "irreversibility": irreversibility_fixture,
    "non_rational_expectations": non_rational_fixture,
}
