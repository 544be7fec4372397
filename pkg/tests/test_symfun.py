import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from overdet import symfun


def sym_matrices(max_n=6, bound=2.0):
    """Hypothesis strategy for symmetric matrices with entries in [-bound, bound]."""
    return st.integers(1, max_n).flatmap(
        lambda n: arrays(np.float64, (n, n),
                         elements=st.floats(-bound, bound, allow_nan=False, width=64))
    ).map(lambda a: np.triu(a) + np.triu(a, 1).T)


# ---------------------------------------------------------------- values


def test_sigma_of_identity_is_binomial():
    assert symfun.sigma_k(np.eye(4), 2) == pytest.approx(6.0, abs=1e-14)


def test_sigma_diag123():
    A = np.diag([1.0, 2.0, 3.0])
    assert symfun.sigma_k(A, 2) == pytest.approx(oracles.SIGMA2_DIAG123, abs=1e-13)
    assert symfun.sigma_k(A, 0) == 1.0
    np.testing.assert_allclose(symfun.sigma_all(A), [1, 6, 11, 6], atol=1e-13)


def test_sigma_stack_broadcasts(rng):
    As = np.stack([symfun.random_symmetric(rng, 4) for _ in range(5)])
    out = symfun.sigma_k(As, 3)
    assert out.shape == (5,)
    for A, v in zip(As, out):
        assert v == pytest.approx(oracles.sigma_minors(A, 3), abs=1e-12)


def test_esym_pads_beyond_variable_count():
    e = symfun.esym([2.0, 3.0], 4)
    np.testing.assert_array_equal(e, [1.0, 5.0, 6.0, 0.0, 0.0])


@pytest.mark.parametrize("bad", [np.array([[1.0, 2.0], [0.0, 1.0]]), np.ones((2, 3)), np.array([[np.nan]])])
def test_rejects_invalid_matrices(bad):
    with pytest.raises(ValueError):
        symfun.sigma_k(bad, 1)


@pytest.mark.parametrize("k", [-1, 4])
def test_rejects_k_out_of_range(k):
    with pytest.raises(ValueError):
        symfun.sigma_k(np.eye(3), k)


def test_rejects_non_integer_k():
    with pytest.raises(TypeError):
        symfun.sigma_k(np.eye(3), 1.0)


def test_tiny_asymmetry_accepted():
    A = np.eye(3)
    A[0, 1] = 1e-14
    assert symfun.sigma_k(A, 3) == pytest.approx(1.0)


# -------------------------------------------------------------- gradient


@pytest.mark.parametrize("n,k", [(3, 1), (4, 2), (5, 3), (6, 6)])
def test_gradient_of_identity(n, k):
    np.testing.assert_allclose(symfun.sigma_gradient(np.eye(n), k),
                               math.comb(n - 1, k - 1) * np.eye(n), atol=1e-12)


def test_gradient_diag123_matches_frozen_and_fd():
    A = np.diag([1.0, 2.0, 3.0])
    G = symfun.sigma_gradient(A, 2)
    np.testing.assert_allclose(G, oracles.GRAD_SIGMA2_DIAG123, atol=1e-12)
    np.testing.assert_allclose(oracles.sigma_gradient_fd(A, 2), G, atol=1e-8)


def test_gradient_random_5x5_matches_entrywise_fd(rng):
    A = symfun.random_symmetric(rng, 5)
    G = symfun.sigma_gradient(A, 3)
    fd = oracles.sigma_gradient_fd(A, 3)
    np.testing.assert_allclose(G, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(G)))


def test_gradient_symmetric_for_symmetric_input(rng):
    A = symfun.random_symmetric(rng, 6)
    for k in range(1, 7):
        G = symfun.sigma_gradient(A, k)
        np.testing.assert_allclose(G, G.T, atol=1e-11)


def test_sigma_and_gradient_consistent(rng):
    A = symfun.random_symmetric(rng, 4)
    sig, G, Gp = symfun.sigma_and_gradient(A, 3)
    np.testing.assert_allclose(sig, symfun.sigma_all(A))
    np.testing.assert_allclose(G, symfun.sigma_gradient(A, 3))
    np.testing.assert_allclose(Gp, symfun.sigma_gradient(A, 2))
    _, G1, G0 = symfun.sigma_and_gradient(A, 1)
    np.testing.assert_array_equal(G0, 0.0)


# ------------------------------------------------------------------ trace


def test_trace_identities_diag123():
    A = np.diag([1.0, 2.0, 3.0])
    G = symfun.sigma_gradient(A, 2)
    assert np.sum(G * A) == pytest.approx(22.0)
    assert np.trace(G) == pytest.approx(12.0)
    r = symfun.trace_identities(A, 2)
    assert r.pairing == pytest.approx(0, abs=1e-12)
    assert r.trace == pytest.approx(0, abs=1e-12)
    r1 = symfun.trace_identities(A, 1)
    assert r1.square == pytest.approx(0, abs=1e-12)  # tr A^2 = 14 = 36 - 22


def test_trace_square_at_top_degree(rng):
    A = symfun.random_symmetric(rng, 4)
    assert symfun.trace_identities(A, 4).square < 1e-10 * (1 + symfun.spectral_norm(A) ** 5)


# ------------------------------------------------------------------- cone


def test_cone_membership_examples():
    r = symfun.cone_membership(np.diag([3.0, -1.0]), 2)
    assert r.sigma_values == pytest.approx((2.0, -3.0))
    assert not r.in_cone
    assert symfun.cone_membership(np.diag([3.0, -1.0]), 1).in_cone
    assert symfun.cone_membership(np.eye(5), 5).in_cone
    assert not symfun.cone_membership(np.diag([1.0, 2.0, 3.0]) - 10 * np.eye(3), 1).in_cone


def test_random_cone_matrix_is_in_cone(rng):
    for n in range(2, 7):
        for k in range(1, n + 1):
            assert symfun.cone_membership(symfun.random_cone_matrix(rng, n, k), k).in_cone


# ------------------------------------------------------------- inequalities


def test_newton_slack_diag123():
    assert symfun.newton_slack(np.diag([1.0, 2.0, 3.0]), 1) == pytest.approx(oracles.NEWTON_SLACK_DIAG123_K1)


def test_maclaurin_slack_diag123():
    s = symfun.classical_inequalities(np.diag([1.0, 2.0, 3.0]), 2)
    assert s.maclaurin == pytest.approx(oracles.MACLAURIN_SLACK_DIAG123_K2, abs=1e-13)
    assert s.maclaurin > 0.085


@pytest.mark.parametrize("n,c", [(2, 0.5), (4, 1.0), (6, 3.0)])
def test_equal_eigenvalues_give_zero_slack(n, c):
    for k in range(1, n + 1):
        s = symfun.classical_inequalities(c * np.eye(n), k)
        assert abs(s.newton) <= 1e-9 * (1 + c ** (2 * k))
        assert abs(s.maclaurin) <= 1e-12 * (1 + c)
        assert abs(s.quotient) <= 1e-12 * (1 + c)


def test_inequalities_reject_outside_cone():
    with pytest.raises(symfun.NotInConeError) as info:
        symfun.classical_inequalities(np.diag([3.0, -1.0]), 2)
    assert info.value.report.sigma_values == pytest.approx((2.0, -3.0))


def test_k1_has_trivial_maclaurin_and_quotient():
    s = symfun.classical_inequalities(np.diag([1.0, 5.0]), 1)
    assert s.maclaurin == 0.0 and s.quotient == 0.0


# ------------------------------------------------------------- properties


@given(sym_matrices())
def test_property_eigen_route_matches_minor_sums(A):
    n = A.shape[0]
    norm = np.max(np.abs(np.linalg.eigvalsh(A)))
    for k in range(n + 1):
        scale = 1 + math.comb(n, k) * norm**k
        assert abs(symfun.sigma_k(A, k) - oracles.sigma_minors(A, k)) <= 1e-10 * scale


@given(sym_matrices(), st.integers(0, 2**32 - 1))
def test_property_orthogonal_invariance(A, seed):
    n = A.shape[0]
    Q = symfun.random_orthogonal(np.random.default_rng(seed), n)
    B = Q @ A @ Q.T
    B = 0.5 * (B + B.T)
    norm = symfun.spectral_norm(A)
    for k in range(n + 1):
        assert abs(symfun.sigma_k(B, k) - symfun.sigma_k(A, k)) <= 1e-9 * (1 + math.comb(n, k) * norm**k)


@given(sym_matrices())
def test_property_trace_identities(A):
    n = A.shape[0]
    norm = symfun.spectral_norm(A)
    for k in range(1, n + 1):
        r = symfun.trace_identities(A, k)
        assert r.pairing <= 1e-9 * (1 + norm**k)
        assert r.trace <= 1e-9 * (1 + norm ** (k - 1))
        assert r.square <= 1e-9 * (1 + norm ** (k + 1))


@given(sym_matrices(max_n=6), st.floats(0.0, 3.0))
def test_property_shifted_matrices_satisfy_inequalities(A0, margin):
    # shift into Gamma_n (hence every Gamma_k) by t I
    n = A0.shape[0]
    lam_min = float(np.min(np.linalg.eigvalsh(A0)))
    A = A0 + (1 + max(0.0, -lam_min) * (1 + margin)) * np.eye(n)
    for k in range(1, n + 1):
        s = symfun.classical_inequalities(A, k)
        assert s.newton >= -symfun.scaled_tolerance(A, 1e-9, 2 * k)
        assert s.maclaurin >= -symfun.scaled_tolerance(A, 1e-9, 1)
        assert s.quotient >= -symfun.scaled_tolerance(A, 1e-9, 1)


@given(sym_matrices())
def test_property_newton_holds_for_all_symmetric(A):
    n = A.shape[0]
    for k in range(1, n):
        assert symfun.newton_slack(A, k) >= -symfun.scaled_tolerance(A, 1e-9, 2 * k)


@given(sym_matrices(max_n=5))
def test_property_principal_minor_sum_reference(A):
    for k in range(A.shape[0] + 1):
        assert symfun.principal_minor_sum(A, k) == pytest.approx(oracles.sigma_charpoly(A)[k], abs=1e-9 * (1 + np.max(np.abs(A)) ** k * 20))
