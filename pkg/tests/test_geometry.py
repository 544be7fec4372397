import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from overdet import symfun
from overdet.geometry import (
    Space,
    ScalarField,
    boundary_shape,
    chart_radius,
    conformal_factor,
    covariant_jet,
    divergence_free_residual,
    exchange_commutator,
    geodesic_radius,
    index_exchange_residual,
    level_set_curvature,
    monomial_field,
    operator_matrix,
    plane_wave_field,
    sample_ball,
    third_derivatives,
    v_field,
)
from overdet.quadrature import Ball, Domain, Ellipsoid
from overdet.radial import exact_solution

E, H = Space.EUCLIDEAN, Space.HYPERBOLIC


def mobius(a, y):
    """Isometry of the Poincare ball sending 0 to ``a`` (Mobius addition a (+) y)."""
    ay, aa, yy = a @ y, a @ a, y @ y
    return ((1 + 2 * ay + yy) * a + (1 - aa) * y) / (1 + 2 * ay + aa * yy)


def hyperbolic_hessian_eigs_oracle(f, x, h=1e-4):
    """Frame Hessian eigenvalues at x via an isometry to the origin.

    At the origin the Christoffel symbols vanish and lam = 2, so the frame
    Hessian of ``f o M`` there is a quarter of its Euclidean Hessian.
    """
    x = np.asarray(x, float)
    g = lambda y: float(f(mobius(x, y)[None])[0])
    Hm = oracles.hessian_fd(g, np.zeros_like(x), h) / 4.0
    return np.sort(np.linalg.eigvalsh(0.5 * (Hm + Hm.T)))


# ------------------------------------------------------------------ chart


def test_conformal_factor_values():
    assert conformal_factor(np.zeros(2)) == 2.0
    assert conformal_factor(np.array([0.5, 0.0])) == pytest.approx(8 / 3)


@pytest.mark.parametrize("s", [1.0, 1.0 - 1e-10, 1.5])
def test_conformal_factor_rejects_chart_boundary(s):
    with pytest.raises(ValueError):
        conformal_factor(np.array([s, 0.0]))


def test_geodesic_radius_matches_log_form():
    x = np.array([0.3, -0.4])
    assert geodesic_radius(x, H) == pytest.approx(oracles.hyperbolic_distance(x))
    assert chart_radius(geodesic_radius(x, H), H) == pytest.approx(0.5)


def test_scalar_field_step_validated():
    with pytest.raises(ValueError):
        ScalarField(2, E, lambda x: x[..., 0], step=0.1)
    with pytest.raises(ValueError):
        ScalarField(2, E, lambda x: x[..., 0], step=0.0)


# ------------------------------------------------------------------ V field


def test_v_field_values():
    V = v_field(H, 2)
    j = covariant_jet(V, np.zeros(2))
    assert j.value == pytest.approx(1.0)
    np.testing.assert_allclose(j.grad, 0.0)
    x = np.array([0.5, 0.0])
    assert V(x) == pytest.approx(oracles.V_AT_HALF)
    assert V(x) == pytest.approx(math.cosh(math.log(3.0)))
    np.testing.assert_allclose(covariant_jet(v_field(E, 2), np.array([1.0, 0.0])).grad, [1.0, 0.0])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_static_potential_hessian(n, rng):
    x = sample_ball(rng, 100, n, 0.95)
    j = covariant_jet(v_field(H, n), x)
    dev = np.abs(j.hess - j.value[:, None, None] * np.eye(n))
    assert np.max(dev) <= 1e-10 * np.max(j.value)


def test_euclidean_quadratic_jet(rng):
    x = sample_ball(rng, 10, 3, 2.0)
    j = covariant_jet(v_field(E, 3), x)
    np.testing.assert_allclose(j.grad, x)
    np.testing.assert_allclose(j.hess, np.broadcast_to(np.eye(3), (10, 3, 3)))


def test_operator_matrix_of_v_vanishes(rng):
    x = sample_ball(rng, 20, 3, 0.9)
    W = operator_matrix(v_field(H, 3), x)
    assert np.max(np.abs(W)) < 1e-9
    assert np.max(np.abs(symfun.sigma_k(W, 1))) < 1e-9


# -------------------------------------------------------- Hessian oracles


@pytest.mark.parametrize("n", [2, 3])
def test_hyperbolic_hessian_matches_isometry_oracle(n, rng):
    u = v_field(H, n) * 0.3 + plane_wave_field(H, np.linspace(1.2, -0.7, n)) + monomial_field(H, (2,) + (1,) * (n - 1))
    for x in sample_ball(rng, 5, n, 0.7):
        ours = np.sort(np.linalg.eigvalsh(covariant_jet(u, x).hess))
        ref = hyperbolic_hessian_eigs_oracle(u, x)
        np.testing.assert_allclose(ours, ref, atol=2e-6)


def test_radial_solution_operator_is_identity():
    R = 0.55
    sol = exact_solution(H, 3, 2, math.tanh(R))
    x = np.array([chart_radius(0.3, H), 0.0, 0.0])
    W = operator_matrix(sol.field(), x)
    np.testing.assert_allclose(np.linalg.eigvalsh(W), 1.0, atol=1e-8)


@pytest.mark.parametrize("space", [E, H])
def test_finite_difference_jet_converges_at_second_order(space):
    u = plane_wave_field(space, np.array([1.5, -0.8])) + monomial_field(space, (3, 1))
    x = np.array([[0.3, 0.2]])
    exact = covariant_jet(u, x).hess
    errs = [np.max(np.abs(covariant_jet(u.finite_difference(h, richardson=False), x).hess - exact))
            for h in (4e-3, 2e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    rich = covariant_jet(u.finite_difference(1e-3), x).hess
    assert np.max(np.abs(rich - exact)) < 1e-8


@pytest.mark.parametrize("alpha", [(3, 0), (1, 2), (2, 1, 1)])
def test_monomial_exact_derivatives_match_fd(alpha, rng):
    u = monomial_field(E, alpha)
    x = sample_ball(rng, 4, len(alpha), 0.8)
    a, b = covariant_jet(u, x), covariant_jet(u.finite_difference(), x)
    np.testing.assert_allclose(a.grad, b.grad, atol=1e-9)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-7)


# ------------------------------------------------------------ level sets


def test_level_set_curvature_sphere():
    u = v_field(E, 3)
    x = np.array([2.0, 0.0, 0.0])
    assert level_set_curvature(u, x, 2) == pytest.approx(1.0)
    assert level_set_curvature(u, x, 1) == pytest.approx(1.0)


@pytest.mark.parametrize("n,k", [(2, 1), (3, 2), (3, 3), (4, 3)])
def test_level_set_curvature_geodesic_spheres(n, k, rng):
    for space, kappa in ((E, lambda r: 1 / r), (H, lambda r: 1 / math.tanh(r))):
        sol = exact_solution(space, n, k, 0.6)
        x = sample_ball(rng, 5, n, 0.9 * float(chart_radius(sol.R, space)))
        r = geodesic_radius(x, space)
        want = math.comb(n - 1, k - 1) * np.array([kappa(ri) for ri in r]) ** (k - 1)
        np.testing.assert_allclose(level_set_curvature(sol.field(), x, k), want, rtol=1e-7)


def test_level_set_curvature_hyperbolic_k1_is_one():
    sol = exact_solution(H, 3, 1, 0.6)
    x = np.array([chart_radius(0.4, H), 0.0, 0.0])
    assert level_set_curvature(sol.field(), x, 1) == pytest.approx(1.0)


def test_level_set_curvature_rejects_critical_point():
    with pytest.raises(ValueError, match="critical"):
        level_set_curvature(v_field(E, 2), np.zeros(2), 1)


# ------------------------------------------------------------ boundaries


def test_geodesic_circle_curvature():
    R = 0.8
    shape = boundary_shape(Domain(2, H, Ball(R)), np.array([0.0, 1.0, 2.5]))
    s = math.tanh(R / 2)
    np.testing.assert_allclose(shape.curvatures[:, 0], (1 + s * s) / (2 * s), rtol=1e-12)
    np.testing.assert_allclose(shape.curvatures[:, 0], 1 / math.tanh(R), rtol=1e-9)


def test_ellipse_vertex_curvature():
    a, b = 1.3, 0.8
    shape = boundary_shape(Domain(2, E, Ellipsoid((a, b))), np.array([0.0, 1.1]))
    assert shape.curvatures[0, 0] == pytest.approx(a / b**2, rel=1e-12)
    np.testing.assert_allclose(np.linalg.norm(shape.normal, axis=-1), 1.0)


def test_ellipse_curvature_off_axis():
    a, b = 1.3, 0.8
    theta = 0.7
    shape = boundary_shape(Domain(2, E, Ellipsoid((a, b))), np.array([theta]))
    x, y = shape.point[0]
    t = math.atan2(y / b, x / a)
    assert shape.curvatures[0, 0] == pytest.approx(oracles.ellipse_curvature(a, b, t), rel=1e-11)


def test_sphere_curvatures():
    s = 0.7
    shape = boundary_shape(Domain(3, E, Ball(s)), np.array([0.4, 1.3]), np.array([0.2, 4.0]))
    np.testing.assert_allclose(shape.curvatures, 1 / s, rtol=1e-12)


def test_hyperbolic_sphere_curvatures():
    R = 0.8
    shape = boundary_shape(Domain(3, H, Ball(R)), np.array([0.4]), np.array([2.0]))
    np.testing.assert_allclose(shape.curvatures, 1 / math.tanh(R), rtol=1e-9)


# ---------------------------------------------------- third-order checks


def test_divergence_free_quadratic_is_exact(rng):
    u = v_field(E, 3) + monomial_field(E, (1, 1, 0)) * 0.3
    x = sample_ball(rng, 5, 3, 1.0)
    for k in (1, 2, 3):
        assert np.max(np.abs(divergence_free_residual(u, x, k))) < 1e-9


def test_divergence_free_cubic_perturbation():
    # D^2u is affine, so G = sigma_2^{ij}(D^2u) is affine and central differences are exact
    u = v_field(E, 3) + 0.1 * monomial_field(E, (3, 0, 0)) + 0.2 * monomial_field(E, (1, 2, 0))
    x = np.array([[0.3, -0.2, 0.4]])
    for h in (4e-2, 1e-2, 1e-3):
        assert np.max(np.abs(divergence_free_residual(u, x, 2, h=h, richardson=False))) < 1e-12


def test_divergence_free_residual_converges_second_order():
    u = v_field(E, 3) + 0.1 * plane_wave_field(E, np.array([1.0, 2.0, -1.0]))
    x = np.array([[0.3, -0.2, 0.4]])
    res = [np.max(np.abs(divergence_free_residual(u, x, 2, h=h, richardson=False)))
           for h in (4e-2, 2e-2, 1e-2)]
    assert res[0] / res[1] == pytest.approx(4, rel=0.05)
    assert res[1] / res[2] == pytest.approx(4, rel=0.05)
    assert np.max(np.abs(divergence_free_residual(u, x, 2, h=1e-3))) < 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_divergence_free_hyperbolic_exact_solution(k, rng):
    sol = exact_solution(H, 3, k, 0.6)
    x = sample_ball(rng, 5, 3, 0.8 * float(chart_radius(sol.R, H)))
    assert np.max(np.abs(divergence_free_residual(sol.field(), x, k, h=1e-3))) <= 1e-6


@pytest.mark.parametrize("k", [1, 2, 3])
def test_divergence_free_hyperbolic_generic_field(k, rng):
    u = v_field(H, 3) + 0.1 * plane_wave_field(H, np.array([1.0, 0.5, -0.8])) + 0.1 * monomial_field(H, (2, 1, 0))
    x = sample_ball(rng, 5, 3, 0.6)
    assert np.max(np.abs(divergence_free_residual(u, x, k, h=1e-3))) <= 1e-6


def test_divergence_free_detects_wrong_operator(rng):
    # sigma_k^{ij}(D^2u) (without the -uI shift) is not divergence-free in H^n
    from overdet.geometry import tensor_divergence
    u = v_field(H, 3) + 0.2 * monomial_field(H, (2, 1, 0))
    x = sample_ball(rng, 5, 3, 0.6)
    wrong = tensor_divergence(lambda y: symfun.sigma_gradient(covariant_jet(u, y).hess, 2), x, H, 1e-3)
    assert np.max(np.abs(wrong)) > 1e-3


@pytest.mark.parametrize("space", [E, H])
def test_ricci_commutation(space, rng):
    u = v_field(space, 3) + 0.2 * plane_wave_field(space, np.array([1.0, -0.5, 0.7])) + 0.1 * monomial_field(space, (1, 1, 1))
    x = sample_ball(rng, 4, 3, 0.6)
    U = third_derivatives(u, x, h=1e-3)
    comm = U - np.swapaxes(U, -1, -2)
    if space is H:
        g = covariant_jet(u, x).grad
        eye = np.eye(3)
        comm += np.einsum("pl,ij->pilj", g, eye) - np.einsum("pj,il->pilj", g, eye)
    assert np.max(np.abs(comm)) < 1e-5
    # and the commutator itself is far from zero in H^n
    if space is H:
        assert np.max(np.abs(U - np.swapaxes(U, -1, -2))) > 1e-3


# -------------------------------------------------------- index exchange


def test_index_exchange_diagonal_exact():
    W = np.diag([1.0, 2.0, 3.0])
    assert exchange_commutator(W, W, 2) == 0.0


def test_index_exchange_negative_control(rng):
    W = symfun.random_symmetric(rng, 4)
    Hm = symfun.random_symmetric(rng, 4)
    assert exchange_commutator(W, Hm, 2) > 1e-3


@given(st.integers(0, 2**32 - 1), st.sampled_from([E, H]), st.integers(2, 4))
def test_property_index_exchange_on_smooth_fields(seed, space, n):
    r = np.random.default_rng(seed)
    u = v_field(space, n) + float(r.uniform(-1, 1)) * plane_wave_field(space, r.uniform(-2, 2, n)) \
        + float(r.uniform(-1, 1)) * monomial_field(space, tuple(r.integers(0, 3, n)))
    x = sample_ball(r, 3, n, 0.8)
    res = index_exchange_residual(u, x, int(r.integers(1, n + 1)))
    scale = 1 + np.max(np.abs(covariant_jet(u, x).hess)) ** (n + 1)
    assert np.all(res <= 1e-9 * scale)


@given(st.integers(0, 2**32 - 1), st.sampled_from([E, H]))
def test_property_grad_norm_consistent(seed, space):
    r = np.random.default_rng(seed)
    u = v_field(space, 3) + plane_wave_field(space, r.uniform(-2, 2, 3))
    j = covariant_jet(u, sample_ball(r, 5, 3, 0.8))
    np.testing.assert_allclose(j.grad_norm**2, np.sum(j.grad**2, axis=-1), rtol=1e-12)


@pytest.mark.parametrize("space", ["euclidean", "hyperbolic"])
def test_radius_helpers_accept_space_names(space):
    x = np.array([0.3, 0.4])
    r = geodesic_radius(x, space)
    assert r == pytest.approx(geodesic_radius(x, Space(space)))
    assert chart_radius(r, space) == pytest.approx(0.5)
