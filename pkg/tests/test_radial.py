import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from overdet import geometry, symfun
from overdet.geometry import Space
from overdet.radial import (RadialSolution, ShootingError, admissibility_check, exact_solution,
                            p_brackets, p_function, p_subsolution_residual, radial_eigenvalues,
                            radial_field, radial_ode_residual, shoot_radial)

EXACT = [("euclidean", 2, 1, 1.0), ("euclidean", 3, 2, 1.0), ("euclidean", 3, 3, 0.9),
         ("euclidean", 4, 2, 1.3), ("hyperbolic", 2, 1, 0.5), ("hyperbolic", 3, 1, math.tanh(0.8)),
         ("hyperbolic", 3, 2, math.tanh(0.8)), ("hyperbolic", 3, 3, math.tanh(0.8))]
SHOOTING = [(2, 1), (3, 1), (3, 2), (3, 3), (4, 2)]


def interior_points(rng, sol, m=100):
    x = geometry.sample_ball(rng, m, sol.n, 1.0)
    r = geometry.chart_radius(sol.R * np.linalg.norm(x, axis=-1), sol.space)
    return x / np.maximum(np.linalg.norm(x, axis=-1), 1e-300)[:, None] * r[:, None]


# ------------------------------------------------------------ exact solutions


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_exact_solution_operator_is_identity(rng, space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    W = geometry.operator_matrix(sol.field(), interior_points(rng, sol))
    assert np.max(np.abs(W - np.eye(n))) <= 1e-8
    np.testing.assert_allclose(symfun.sigma_k(W, k), math.comb(n, k), atol=1e-8)


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_exact_solution_boundary_data(space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    theta = np.linspace(0, 2 * np.pi, 50)
    omega = np.zeros((50, n))
    omega[:, 0], omega[:, 1] = np.cos(theta), np.sin(theta)
    x = geometry.chart_radius(sol.R, sol.space) * omega
    jet = geometry.covariant_jet(sol.field(), x)
    assert np.max(np.abs(jet.value)) <= 1e-12
    np.testing.assert_allclose(np.sum(jet.grad * omega, axis=-1), c0, atol=1e-12)


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_exact_solution_negative_inside(rng, space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    assert np.all(sol.field()(interior_points(rng, sol)) < 0)


def test_hyperbolic_radius_from_neumann_value():
    sol = exact_solution("hyperbolic", 2, 1, 0.5)
    assert sol.R == pytest.approx(oracles.ARTANH_HALF, abs=1e-15)
    assert float(sol.u(0.0)) == pytest.approx(oracles.U0_H2_K1_HALF, abs=1e-15)


@pytest.mark.parametrize("space,c0", [("hyperbolic", 1.0), ("hyperbolic", 1.5), ("hyperbolic", 0.0),
                                      ("euclidean", 0.0), ("euclidean", -1.0)])
def test_exact_solution_rejects_bad_c0(space, c0):
    with pytest.raises(ValueError):
        exact_solution(space, 2, 1, c0)


def test_hyperbolic_error_mentions_tanh():
    with pytest.raises(ValueError, match="tanh R = c0"):
        exact_solution("hyperbolic", 3, 2, 1.5)


@pytest.mark.parametrize("n,k", [(0, 1), (2, 0), (2, 3)])
def test_exact_solution_rejects_bad_nk(n, k):
    with pytest.raises(ValueError):
        exact_solution("euclidean", n, k, 1.0)


# ----------------------------------------------------------------- ODE form


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_radial_ode_residual_vanishes(space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    r = np.linspace(0.0, sol.R, 1001)
    assert np.max(np.abs(radial_ode_residual(sol, r))) <= 1e-12


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_scaled_solution_violates_ode(space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    bad = replace(sol, u=lambda r: 1.1 * sol.u(r), du=lambda r: 1.1 * sol.du(r),
                  d2u=lambda r: 1.1 * sol.d2u(r), chart_field=None)
    r = np.linspace(0.0, sol.R, 101)
    assert np.max(np.abs(radial_ode_residual(bad, r))) > 1e-2


def test_radial_ode_residual_rejects_outside_interval():
    sol = exact_solution("euclidean", 2, 1, 1.0)
    with pytest.raises(ValueError):
        radial_ode_residual(sol, 1.5)


@pytest.mark.parametrize("space", ["euclidean", "hyperbolic"])
def test_radial_eigenvalues_match_full_operator(rng, space):
    # u = r^4 is not a solution; compare the 1-D formulas with the chart computation
    sol = RadialSolution(3, 2, Space.parse(space), 0.7, 0.0, u=lambda r: np.asarray(r) ** 4,
                         du=lambda r: 4 * np.asarray(r) ** 3, d2u=lambda r: 12 * np.asarray(r) ** 2)
    x = interior_points(rng, sol, 30)
    r = geometry.geodesic_radius(x, space)
    lam = radial_eigenvalues(sol, r)
    expected = np.sort(np.stack([lam.radial, lam.tangential, lam.tangential], axis=-1), axis=-1)
    eigs = np.linalg.eigvalsh(geometry.operator_matrix(sol.field(), x))
    np.testing.assert_allclose(eigs, expected, atol=1e-10)


def test_radial_field_chain_rule_matches_finite_differences(rng):
    f = radial_field(lambda r: np.sinh(r) ** 2, lambda r: np.sinh(2 * r), lambda r: 2 * np.cosh(2 * r),
                     "hyperbolic", 2)
    x = geometry.sample_ball(rng, 20, 2, 0.6)
    fd = f.finite_difference(1e-3)
    np.testing.assert_allclose(f.chart_hessian(x), fd.chart_hessian(x), atol=1e-7)


# ------------------------------------------------------------------ shooting


@pytest.mark.parametrize("space", ["euclidean", "hyperbolic"])
@pytest.mark.parametrize("n,k", SHOOTING)
def test_shooting_matches_exact_solution(space, n, k):
    R = 0.8
    shot = shoot_radial(n, k, space, R)
    exact = exact_solution(space, n, k, R if space == "euclidean" else math.tanh(R))
    r = np.linspace(0, R, 200)
    assert np.max(np.abs(shot.u(r) - exact.u(r))) <= 1e-8
    assert shot.c0 == pytest.approx(exact.c0, abs=1e-8)
    assert abs(float(shot.u(R))) <= 1e-10


def test_shooting_centre_values():
    assert float(shoot_radial(2, 1, "euclidean", 1.0).u(0.0)) == pytest.approx(-0.5, abs=1e-8)
    hyp = shoot_radial(2, 1, "hyperbolic", oracles.ARTANH_HALF)
    assert float(hyp.u(0.0)) == pytest.approx(oracles.U0_H2_K1_HALF, abs=1e-8)


def test_shot_solution_is_admissible_field(rng):
    shot = shoot_radial(3, 2, "hyperbolic", 0.8)
    W = geometry.operator_matrix(shot.field(), interior_points(rng, shot, 30))
    assert np.max(np.abs(W - np.eye(3))) <= 1e-7


def test_shooting_reports_missing_sign_change():
    with pytest.raises(ShootingError, match="no sign change"):
        shoot_radial(2, 1, "euclidean", 1.0, scan=(0.1, 1.0))


def test_shooting_rejects_bad_radius():
    with pytest.raises(ValueError):
        shoot_radial(2, 1, "euclidean", 0.0)


# ------------------------------------------------------------ admissibility


def test_admissibility_examples(rng):
    sol = exact_solution("euclidean", 3, 2, 1.0)
    reports = admissibility_check(sol, interior_points(rng, sol, 10))
    assert all(r.in_cone for r in reports)
    saddle = geometry.monomial_field("euclidean", (2, 0)) - geometry.monomial_field("euclidean", (0, 2))
    rep = admissibility_check(saddle, np.array([[0.1, 0.2]]), k=2)[0]
    assert not rep.in_cone
    assert rep.sigma_values == pytest.approx((0.0, -4.0), abs=1e-12)
    assert admissibility_check(-sol.field(), np.zeros((1, 3)), k=1)[0].in_cone is False


def test_admissibility_requires_k_for_fields():
    with pytest.raises(ValueError):
        admissibility_check(geometry.v_field("hyperbolic", 2), np.zeros((1, 2)))


# --------------------------------------------------------------- P-function


@pytest.mark.parametrize("space,n,k,c0", EXACT)
def test_p_function_is_constant(rng, space, n, k, c0):
    sol = exact_solution(space, n, k, c0)
    sample = p_function(sol, interior_points(rng, sol, 50))
    expected = c0**2 if space == "euclidean" else math.tanh(sol.R) ** 2
    assert np.max(sample.p_value) - np.min(sample.p_value) <= 1e-9
    np.testing.assert_allclose(sample.p_value, expected, atol=1e-9)
    assert np.max(np.abs(sample.hess_trace_pairing)) <= 1e-5


def test_p_subsolution_residual_small(rng):
    sol = exact_solution("hyperbolic", 3, 2, math.tanh(0.8))
    assert np.max(np.abs(p_subsolution_residual(sol, interior_points(rng, sol, 20)))) <= 1e-5


def test_p_function_detects_non_solution(rng):
    u = geometry.monomial_field("euclidean", (4, 0))
    sample = p_function(u, geometry.sample_ball(rng, 20, 2, 0.8), k=1)
    assert np.ptp(sample.p_value) > 1e-3


def test_p_function_requires_k_for_fields():
    with pytest.raises(ValueError):
        p_function(geometry.v_field("hyperbolic", 2), np.zeros((1, 2)))


def test_p_brackets_at_identity():
    b = p_brackets(np.eye(3), 2)
    assert b.euclidean == pytest.approx(3 * 3 - 3 * 1 - 2 * 3)
    assert b.euclidean_bound == pytest.approx(0.0)
    assert b.hyperbolic == pytest.approx(2 * 3 - 2 * 3)


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.data())
def test_property_p_brackets_on_cone(seed, n, data):
    k = data.draw(st.integers(1, n))
    A = symfun.random_cone_matrix(np.random.default_rng(seed), n, k)
    b = p_brackets(A, k)
    assert b.euclidean >= b.euclidean_bound - symfun.scaled_tolerance(A, 1e-9, k + 1)
    # on the level set sigma_k = C(n,k) both brackets are non-negative
    A = A * (math.comb(n, k) / symfun.sigma_k(A, k)) ** (1.0 / k)
    b = p_brackets(A, k)
    assert b.euclidean_bound >= -symfun.scaled_tolerance(A, 1e-9, k + 1)
    assert b.hyperbolic >= -symfun.scaled_tolerance(A, 1e-9, k)
