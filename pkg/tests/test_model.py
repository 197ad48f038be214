from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from setid.errors import DimensionMismatch, Indeterminate, NoStableSolution
from setid.model import (
    ModelMatrices,
    ModelSpec,
    ParamVector,
    assemble_state_space,
    check_local_identification,
    investment_polynomial,
    random_stable_model,
    rank_diagnostics,
    rbc_investment_spec,
    simulate,
    solve_matrices,
    solve_re,
)


def scalar_matrices(G=1.0, F=0.0, H=0.0, L=1.0, R=0.0, S=1.0):
    a = lambda v: np.array([[v]], dtype=float)  # noqa: E731
    return ModelMatrices(G=a(G), F=a(F), H=a(H), L=a(L), R=a(R), Sigma=a(S))


def ar1_spec(extra_unused=False, product=False):
    names = ["rho", "sigma"]
    vals = [0.5, 1.0]
    bounds = [[-0.99, 0.99], [0.1, 5.0]]
    if extra_unused:
        names.append("ghost")
        vals.append(0.3)
        bounds.append([0.0, 1.0])

    def mm(v):
        rho = v[0] * v[2] if product else v[0]
        return {"G": [[1.0]], "F": [[0.0]], "H": [[rho]], "L": [[1.0]], "Sigma": [[v[1] ** 2]]}

    if product:
        names.append("kappa")
        vals.append(1.0)
        bounds.append([0.5, 2.0])
    pv = ParamVector(tuple(names), np.array(vals), np.array(bounds))
    return ModelSpec(n_x=1, n_z=1, matrix_map=mm, params=pv, selector=[[1.0]], friction_signs=[1])


# -- parameters ----------------------------------------------------------------


def test_param_vector_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        ParamVector(("a",), np.array([2.0]), np.array([[0.0, 1.0]]))


def test_param_vector_partition_and_frictionless():
    pv = ParamVector(("a", "phi"), np.array([0.3, 0.5]), np.array([[0.0, 1.0], [0.1, 1.0]]),
                     np.array([False, True]))
    assert list(pv.structural_index) == [0]
    assert list(pv.friction_index) == [1]
    fl = pv.frictionless()
    assert fl.values[1] == 0.0
    assert fl.values[0] == 0.3


# -- solver examples -----------------------------------------------------------


def test_static_model_decision_rule_is_shock_loading():
    m = ModelMatrices(G=np.eye(2), F=np.zeros((2, 2)), H=np.zeros((2, 2)), L=np.eye(2),
                      R=np.zeros((2, 2)), Sigma=np.eye(2))
    sol = solve_matrices(m, np.zeros(0))
    np.testing.assert_array_equal(sol.P_star, np.zeros((2, 2)))
    np.testing.assert_allclose(sol.Q_star, np.eye(2), atol=1e-14)


def test_scalar_forward_looking_q_from_sylvester():
    # beta P^2 - P = 0 has stable root 0; (beta rho - 1) Q = -1
    sol = solve_matrices(scalar_matrices(G=1.0, F=0.99, R=0.9), np.zeros(0))
    assert sol.P_star[0, 0] == pytest.approx(0.0, abs=1e-14)
    assert sol.Q_star[0, 0] == pytest.approx(9.174311926605505, rel=1e-12)


def test_rbc_root_matches_quadratic_formula():
    a, s, w = 0.33, 0.20, 2.0
    A = s / a
    B = -(1.0 + ((1 - a) * (1 - s) + s * w) / (a * w))
    disc = np.sqrt(B * B - 4 * A)
    roots = sorted([(-B - disc) / (2 * A), (-B + disc) / (2 * A)], key=abs)
    spec = rbc_investment_spec(a, s, w)
    sol = solve_re(spec, spec.params.values)
    assert abs(sol.P_star[0, 0] - roots[0]) <= 1e-12
    assert abs(roots[0]) < 1 < abs(roots[1])
    eig = np.sort(np.abs(sol.eigenvalues[np.isfinite(sol.eigenvalues)]))
    np.testing.assert_allclose(eig, np.abs(roots), rtol=1e-12)


def test_rbc_polynomial_coefficients_by_hand():
    # s/a = 0.606060..., 1 + (0.67*0.8 + 0.4)/(0.66) = 2.418181...
    c = investment_polynomial(0.33, 0.20, 2.0)
    np.testing.assert_allclose(c, [0.2 / 0.33, -(1 + 0.936 / 0.66), 1.0], rtol=1e-14)


def test_no_stable_solution_raises():
    # F P^2 - G P + H = 0 with both roots outside the unit circle
    with pytest.raises(NoStableSolution):
        solve_matrices(scalar_matrices(G=1.0, F=1.0, H=4.0), np.zeros(0))


def test_indeterminate_raises():
    # P^2 - 0.5 P + 0.06 = 0 has roots 0.2 and 0.3
    with pytest.raises(Indeterminate):
        solve_matrices(scalar_matrices(G=0.5, F=1.0, H=0.06), np.zeros(0))


def test_borderline_unit_root_classified_unstable():
    # roots 1 and 0.5: only 0.5 counts as stable
    sol = solve_matrices(scalar_matrices(G=1.5, F=1.0, H=0.5), np.zeros(0))
    assert sol.P_star[0, 0] == pytest.approx(0.5, abs=1e-12)


def test_solve_is_deterministic():
    rng = np.random.default_rng(3)
    m, _ = random_stable_model(rng, 3, 2)
    a = solve_matrices(m, np.zeros(0))
    b = solve_matrices(m, np.zeros(0))
    assert np.array_equal(a.P_star, b.P_star) and np.array_equal(a.Q_star, b.Q_star)


def test_matrices_shape_validation():
    pv = ParamVector(("a",), np.array([0.5]), np.array([[0.0, 1.0]]))
    spec = ModelSpec(1, 1, lambda v: {"G": np.eye(2), "F": [[0.0]], "L": [[1.0]], "Sigma": [[1.0]]}, pv,
                     [[1.0]], [1])
    with pytest.raises(DimensionMismatch):
        spec.matrices([0.5])


# -- state space ----------------------------------------------------------------


def test_state_augmented_when_shocks_persist():
    pv = ParamVector(("rho",), np.array([0.6]), np.array([[-0.9, 0.9]]))
    spec = ModelSpec(1, 1, lambda v: {"G": [[1.0]], "F": [[0.5]], "L": [[1.0]], "R": [[v[0]]],
                                      "Sigma": [[1.0]]}, pv, [[1.0]], [1])
    ss = assemble_state_space(solve_re(spec, [0.6]), spec)
    assert ss.n_state == 2
    assert np.max(np.abs(np.linalg.eigvals(ss.A))) < 1
    d = rank_diagnostics(ss)
    assert d["n_state"] == 2


def test_rbc_innovation_form_values():
    spec = rbc_investment_spec()
    ss = assemble_state_space(solve_re(spec, spec.params.values), spec)
    # exact observation: K = A, Sigma_a = B Sigma B'
    assert ss.K[0, 0] == pytest.approx(ss.A[0, 0], rel=1e-10)
    assert ss.Sigma_a[0, 0] == pytest.approx((1 / 0.33 / (2.418181818181818 - 0.6060606060606061 * 0.4685580587523153)) ** 2,
                                             rel=1e-9)


# -- identification -----------------------------------------------------------


def test_ar1_identification_matches_analytic_jacobian():
    rep = check_local_identification(ar1_spec(), [0.5, 1.0])
    # columns: d/drho, d/dsigma, d/dT; rows: A, K, C, Sigma_a
    expected = np.array([[1.0, 0.0, 0.0],
                         [1.0, 0.0, 0.5],
                         [0.0, 0.0, -1.0],
                         [0.0, 2.0, 0.0]])
    np.testing.assert_allclose(rep.jacobian, expected, rtol=1e-6, atol=1e-8)
    assert rep.passed and rep.rank == rep.required == 3


def test_unused_parameter_fails_identification():
    rep = check_local_identification(ar1_spec(extra_unused=True), [0.5, 1.0, 0.3])
    assert not rep.passed
    assert rep.rank == rep.required - 1


def test_product_parameters_fail_identification():
    rep = check_local_identification(ar1_spec(product=True), [0.5, 1.0, 1.0])
    assert not rep.passed


# -- invariants --------------------------------------------------------------------


@pytest.mark.invariant
@given(seed=st.integers(0, 10_000), n_x=st.integers(1, 4), n_z=st.integers(1, 3))
def test_random_models_solve_to_tolerance(seed, n_x, n_z):
    rng = np.random.default_rng(seed)
    m, P_planted = random_stable_model(rng, n_x, n_z)
    sol = solve_matrices(m, np.zeros(0))
    assert sol.residual_P <= 1e-8
    assert sol.residual_Q <= 1e-8
    assert np.max(np.abs(np.linalg.eigvals(sol.P_star))) < 1.0
    np.testing.assert_allclose(sol.P_star, P_planted, atol=1e-7)


@pytest.mark.invariant
@given(seed=st.integers(0, 10_000))
def test_simulated_path_satisfies_expectational_equation(seed):
    rng = np.random.default_rng(seed)
    m, _ = random_stable_model(rng, 2, 2)
    m = m._replace(R=0.5 * np.eye(2), H=np.zeros((2, 2)))
    try:
        sol = solve_matrices(m, np.zeros(0))
    except (Indeterminate, NoStableSolution):
        return
    X, Z = simulate(sol, 50, seed=seed, burn=0)
    P, Q = sol.P_star, sol.Q_star
    for t in range(50):
        expect_next = P @ X[t] + Q @ (m.R @ Z[t])
        resid = m.G @ X[t] - m.F @ expect_next - m.L @ Z[t] - (m.H @ X[t - 1] if t else 0.0)
        assert np.max(np.abs(resid)) <= 1e-8 * max(1.0, np.max(np.abs(X[t])))


@pytest.mark.invariant
def test_shock_stability_check_within_bounds():
    spec = ar1_spec()
    assert spec.check_shock_stability() < 1.0
