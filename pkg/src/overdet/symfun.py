"""Elementary symmetric functions of symmetric matrices.

All routines accept a single ``(n, n)`` matrix or a stack ``(..., n, n)``
and broadcast over the leading axes. Values are computed from the
eigenvalues (``numpy.linalg.eigvalsh``) with the product recurrence

    e_j <- e_j + lam * e_{j-1}

which is stable for the small dimensions used here. The derivative matrix
``sigma_k^{ij} = d sigma_k / d a_ij`` (all n^2 entries independent) comes
from the recursion

    G_1 = I,    G_k = sigma_{k-1}(A) I - G_{k-1} A^T.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import NamedTuple

import numpy as np

SYMMETRY_TOL = 1e-12


class NotInConeError(ValueError):
    """Raised when an inequality requiring A in Gamma_k is evaluated outside it."""

    def __init__(self, report: "ConeReport"):
        self.report = report
        super().__init__(
            f"matrix is not in Gamma_{report.k}: sigma_1..sigma_{report.k} = "
            f"{[float(s) for s in report.sigma_values]}"
        )


@dataclass(frozen=True)
class ConeReport:
    k: int
    sigma_values: tuple[float, ...]
    in_cone: bool


class TraceResiduals(NamedTuple):
    pairing: float
    trace: float
    square: float


class InequalitySlacks(NamedTuple):
    newton: float
    maclaurin: float
    quotient: float


def check_symmetric(A, tol: float = SYMMETRY_TOL) -> np.ndarray:
    """Return ``A`` as a float array after validating shape and symmetry."""
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2] or A.shape[-1] < 1:
        raise ValueError(f"expected (..., n, n) with n >= 1, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    asym = np.max(np.abs(A - np.swapaxes(A, -1, -2)), initial=0.0)
    scale = 1.0 + np.max(np.abs(A), initial=0.0)
    if asym > tol * scale:
        raise ValueError(f"matrix is not symmetric (max |a_ij - a_ji| = {asym:.3e})")
    return A


def _check_k(k: int, n: int, lo: int = 0) -> None:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise TypeError(f"k must be an integer, got {k!r}")
    if not lo <= k <= n:
        raise ValueError(f"k = {k} out of range [{lo}, {n}]")


def esym(values, k_max: int | None = None) -> np.ndarray:
    """Elementary symmetric polynomials e_0..e_{k_max} of the last axis of ``values``.

    Returns an array of shape ``values.shape[:-1] + (k_max + 1,)``. Entries
    with index larger than the number of variables are zero.
    """
    values = np.asarray(values, dtype=float)
    m = values.shape[-1]
    if k_max is None:
        k_max = m
    out = np.zeros(values.shape[:-1] + (k_max + 1,))
    out[..., 0] = 1.0
    for i in range(m):
        lam = values[..., i]
        # descending j so that e_{j-1} is still the old value
        for j in range(min(i + 1, k_max), 0, -1):
            out[..., j] += lam * out[..., j - 1]
    return out


def sigma_all(A) -> np.ndarray:
    """All of sigma_0(A), ..., sigma_n(A); shape ``(..., n + 1)``."""
    A = check_symmetric(A)
    return esym(np.linalg.eigvalsh(A))


def sigma_k(A, k: int):
    """k-th elementary symmetric function of the eigenvalues of ``A``.

    ``sigma_0 = 1`` by convention. Returns a float for a single matrix and an
    array for a stack.
    """
    A = check_symmetric(A)
    _check_k(k, A.shape[-1])
    val = esym(np.linalg.eigvalsh(A), k)[..., k]
    return float(val) if np.ndim(val) == 0 else val


def sigma_gradient(A, k: int) -> np.ndarray:
    """Matrix of partial derivatives d sigma_k / d a_ij, shape ``(..., n, n)``."""
    A = check_symmetric(A)
    n = A.shape[-1]
    _check_k(k, n, lo=1)
    return _gradients(A, sigma_all(A), k)[k]


def _gradients(A: np.ndarray, sig: np.ndarray, k_max: int) -> dict[int, np.ndarray]:
    """G_1..G_{k_max} from precomputed sigmas (no validation)."""
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n), A.shape)
    At = np.swapaxes(A, -1, -2)
    grads = {1: np.array(eye)}
    for m in range(2, k_max + 1):
        grads[m] = sig[..., m - 1, None, None] * eye - grads[m - 1] @ At
    return grads


def sigma_and_gradient(A, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(sigma_all(A), G_k, G_{k-1})`` in one eigen-decomposition.

    ``G_0`` is taken to be the zero matrix. Used by the mesh integrators,
    which need sigma_{k-1}, sigma_k and the derivative matrix at every node.
    """
    A = check_symmetric(A)
    n = A.shape[-1]
    _check_k(k, n, lo=1)
    sig = sigma_all(A)
    grads = _gradients(A, sig, k)
    prev = grads[k - 1] if k >= 2 else np.zeros_like(A)
    return sig, grads[k], prev


def spectral_norm(A) -> float:
    A = check_symmetric(A)
    return float(np.max(np.abs(np.linalg.eigvalsh(A)), initial=0.0))


def scaled_tolerance(A, tol: float, degree: int) -> float:
    """``tol * (1 + ||A||^degree)``; sigma_k is homogeneous of degree k."""
    return tol * (1.0 + spectral_norm(A) ** degree)


def trace_identities(A, k: int) -> TraceResiduals:
    """Residuals of the three trace identities satisfied by sigma_k^{ij}.

    * pairing: ``|k sigma_k - sum_ij sigma_k^{ij} a_ij|``
    * trace:   ``|(n-k+1) sigma_{k-1} - sum_i sigma_k^{ii}|``
    * square:  ``|sum_ij sigma_k^{ij} (A^2)_ij - (sigma_1 sigma_k - (k+1) sigma_{k+1})|``

    For ``k = n`` the last one uses sigma_{n+1} = 0, which is where the
    identity still holds.
    """
    A = check_symmetric(A)
    if A.ndim != 2:
        raise ValueError("trace_identities expects a single matrix")
    n = A.shape[0]
    _check_k(k, n, lo=1)
    sig = np.append(sigma_all(A), 0.0)
    G = _gradients(A, sig, k)[k]
    pairing = abs(k * sig[k] - np.sum(G * A))
    trace = abs((n - k + 1) * sig[k - 1] - np.trace(G))
    square = abs(np.sum(G * (A @ A)) - (sig[1] * sig[k] - (k + 1) * sig[k + 1]))
    return TraceResiduals(float(pairing), float(trace), float(square))


def cone_membership(A, k: int) -> ConeReport:
    """Evaluate sigma_1..sigma_k and report membership in the Garding cone."""
    A = check_symmetric(A)
    if A.ndim != 2:
        raise ValueError("cone_membership expects a single matrix")
    _check_k(k, A.shape[0], lo=1)
    vals = tuple(float(v) for v in sigma_all(A)[1 : k + 1])
    return ConeReport(k=k, sigma_values=vals, in_cone=all(v > 0 for v in vals))


def newton_slack(A, k: int) -> float:
    """``k(n-k) sigma_k^2 - (n-k+1)(k+1) sigma_{k-1} sigma_{k+1}``, valid for any symmetric A."""
    A = check_symmetric(A)
    n = A.shape[-1]
    _check_k(k, n, lo=1)
    s = np.append(sigma_all(A), 0.0)
    return float(k * (n - k) * s[k] ** 2 - (n - k + 1) * (k + 1) * s[k - 1] * s[k + 1])


def classical_inequalities(A, k: int) -> InequalitySlacks:
    """Slacks of the Newton, MacLaurin and Newton-MacLaurin quotient inequalities.

    MacLaurin: ``min_{1<=l<k} (sigma_l/C(n,l))^{1/l} - (sigma_k/C(n,k))^{1/k}``.
    Quotient:  ``min_{1<=l<k} q_l - q_k`` with
    ``q_j = (sigma_j/C(n,j)) / (sigma_{j-1}/C(n,j-1))``.
    Both are 0 for ``k = 1`` (no nontrivial comparison). Raises
    :class:`NotInConeError` when A is outside Gamma_k.
    """
    A = check_symmetric(A)
    n = A.shape[-1]
    _check_k(k, n, lo=1)
    report = cone_membership(A, k)
    if not report.in_cone:
        raise NotInConeError(report)
    s = sigma_all(A)
    normed = [s[j] / comb(n, j) for j in range(n + 1)]
    root = [normed[j] ** (1.0 / j) if j else 1.0 for j in range(k + 1)]
    quot = [normed[j] / normed[j - 1] if j else 1.0 for j in range(k + 1)]
    maclaurin = min((root[l] - root[k] for l in range(1, k)), default=0.0)
    quotient = min((quot[l] - quot[k] for l in range(1, k)), default=0.0)
    return InequalitySlacks(newton_slack(A, k), float(maclaurin), float(quotient))


def principal_minor_sum(A, k: int) -> float:
    """Reference value of sigma_k: the sum of all k x k principal minors.

    Cost grows like C(n, k); meant for cross-checks on small matrices.
    """
    A = check_symmetric(A)
    if A.ndim != 2:
        raise ValueError("principal_minor_sum expects a single matrix")
    n = A.shape[0]
    _check_k(k, n)
    if k == 0:
        return 1.0
    with np.errstate(divide="ignore", invalid="ignore"):  # exactly singular minors give 0
        return float(sum(np.linalg.det(A[np.ix_(idx, idx)]) for idx in combinations(range(n), k)))


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Symmetric matrix with independent N(0, scale^2) upper-triangular entries."""
    g = scale * rng.standard_normal((n, n))
    return np.triu(g) + np.triu(g, 1).T


def with_eigenvalues(rng: np.random.Generator, eigenvalues) -> np.ndarray:
    """Random symmetric matrix with the given spectrum."""
    lam = np.asarray(eigenvalues, dtype=float)
    q = random_orthogonal(rng, lam.size)
    A = (q * lam) @ q.T
    return 0.5 * (A + A.T)


def random_cone_matrix(rng: np.random.Generator, n: int, k: int,
                       max_tries: int = 1000) -> np.ndarray:
    """Random matrix in Gamma_k by rejection on shifted Gaussian spectra.

    The shift is itself random so that samples reach the cone boundary as
    well as its interior.
    """
    _check_k(k, n, lo=1)
    for _ in range(max_tries):
        lam = rng.standard_normal(n) + rng.uniform(0.0, 2.0)
        if np.all(esym(lam, k)[1:] > 0):
            return with_eigenvalues(rng, lam)
    raise RuntimeError(f"no Gamma_{k} sample found in {max_tries} tries")
