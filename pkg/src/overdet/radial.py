"""Radial solutions of the overdetermined k-Hessian problems and P-functions.

For a radial function ``u(r)`` the operator matrix ``W`` has one radial
eigenvalue and ``n - 1`` equal tangential ones:

=========  =================  =====================
space      radial             tangential
=========  =================  =====================
R^n        ``u''``            ``u'/r``
H^n        ``u'' - u``        ``u' coth r - u``
=========  =================  =====================

so ``sigma_k(W) = C(n-1,k) t^k + C(n-1,k-1) a t^{k-1}``. The equation
``sigma_k(W) = C(n,k)`` is linear in ``u''``, which the shooting solver uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import symfun
from .geometry import (
    ScalarField,
    Space,
    covariant_jet,
    geodesic_radius,
    jet_operator,
    v_field,
)

P_STEP = 1e-3
SHOOT_STEPS = 4096


class ShootingError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialSolution:
    """A radial profile ``u(r)`` on ``[0, R]`` with its first two derivatives."""

    n: int
    k: int
    space: Space
    R: float
    c0: float
    u: Callable[[np.ndarray], np.ndarray]
    du: Callable[[np.ndarray], np.ndarray]
    d2u: Callable[[np.ndarray], np.ndarray]
    chart_field: ScalarField | None = None
    label: str = "exact"

    def field(self) -> ScalarField:
        """The solution as a scalar field on the chart."""
        if self.chart_field is not None:
            return self.chart_field
        return radial_field(self.u, self.du, self.d2u, self.space, self.n)

    def describe(self) -> dict:
        return {"space": self.space.value, "n": self.n, "k": self.k, "R": self.R,
                "c0": self.c0, "solution": self.label}


def _check_nk(n: int, k: int) -> None:
    if n < 1 or not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got n = {n}, k = {k}")


def euclidean_exact(n: int, k: int, c0: float) -> RadialSolution:
    """``u = (|x|^2 - c0^2) / 2`` on the ball of radius ``c0``."""
    _check_nk(n, k)
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    c0 = float(c0)
    field = ScalarField(
        n, Space.EUCLIDEAN,
        value=lambda x: 0.5 * (np.sum(x * x, axis=-1) - c0 * c0),
        grad=lambda x: np.array(x, dtype=float),
        hess=lambda x: np.broadcast_to(np.eye(n), x.shape + (n,)).copy(),
        name=f"(|x|^2-{c0:g}^2)/2",
    )
    return RadialSolution(
        n, k, Space.EUCLIDEAN, c0, c0,
        u=lambda r: 0.5 * (np.asarray(r, float) ** 2 - c0 * c0),
        du=lambda r: np.asarray(r, float) * 1.0,
        d2u=lambda r: np.ones_like(np.asarray(r, float)),
        chart_field=field,
    )


def hyperbolic_exact(n: int, k: int, c0: float) -> RadialSolution:
    """``u = cosh r / cosh R - 1`` on the geodesic ball with ``tanh R = c0``."""
    _check_nk(n, k)
    if not 0.0 < c0 < 1.0:
        raise ValueError(
            f"hyperbolic c0 must lie in (0, 1) so that tanh R = c0 has a solution, got {c0}"
        )
    c0 = float(c0)
    R = math.atanh(c0)
    ch = math.cosh(R)
    field = (1.0 / ch) * v_field(Space.HYPERBOLIC, n) + (-1.0)
    field = ScalarField(n, Space.HYPERBOLIC, field.value, field.grad, field.hess,
                        name=f"cosh r/cosh {R:.6g} - 1")
    return RadialSolution(
        n, k, Space.HYPERBOLIC, R, c0,
        u=lambda r: np.cosh(r) / ch - 1.0,
        du=lambda r: np.sinh(r) / ch,
        d2u=lambda r: np.cosh(r) / ch,
        chart_field=field,
    )


def exact_solution(space, n: int, k: int, c0: float) -> RadialSolution:
    if Space.parse(space) is Space.EUCLIDEAN:
        return euclidean_exact(n, k, c0)
    return hyperbolic_exact(n, k, c0)


def radial_field(u, du, d2u, space, n: int) -> ScalarField:
    """Chart field ``x -> u(r(x))`` with derivatives by the chain rule."""
    space = Space.parse(space)

    def radius_terms(x):
        s = np.linalg.norm(x, axis=-1)
        if space is Space.EUCLIDEAN:
            return s, np.ones_like(s), np.zeros_like(s)
        return geodesic_radius(x, space), 2.0 / (1.0 - s * s), 4.0 * s / (1.0 - s * s) ** 2

    def value(x):
        return u(geodesic_radius(x, space))

    def grad(x):
        s = np.linalg.norm(x, axis=-1)
        r, dr, _ = radius_terms(x)
        # du(r) * dr / s, finite at the centre because du(0) = 0
        safe = np.where(s > 1e-12, s, 1.0)
        coef = np.where(s > 1e-12, du(r) * dr / safe, 0.0)
        return coef[..., None] * x

    def hess(x):
        s = np.linalg.norm(x, axis=-1)
        r, dr, d2r = radius_terms(x)
        safe = np.where(s > 1e-12, s, 1.0)
        xhat = x / safe[..., None]
        P = xhat[..., :, None] * xhat[..., None, :]
        eye = np.eye(n)
        d1 = du(r)
        radial = d2u(r) * dr**2 + d1 * d2r
        tangential = np.where(s > 1e-12, d1 * dr / safe, d2u(r) * dr**2)
        out = radial[..., None, None] * P + tangential[..., None, None] * (eye - P)
        centre = (d2u(r) * dr**2)[..., None, None] * eye
        return np.where((s > 1e-12)[..., None, None], out, centre)

    return ScalarField(n, space, value, grad, hess, name="radial")


class RadialEigenvalues(NamedTuple):
    radial: np.ndarray
    tangential: np.ndarray


def radial_eigenvalues(sol: RadialSolution, r) -> RadialEigenvalues:
    """Radial and tangential eigenvalues of W; the centre uses ``u'/r -> u''(0)``."""
    r = np.asarray(r, dtype=float)
    u, d1, d2 = sol.u(r), sol.du(r), sol.d2u(r)
    safe = np.where(r > 0, r, 1.0)
    if sol.space is Space.EUCLIDEAN:
        return RadialEigenvalues(d2, np.where(r > 0, d1 / safe, d2))
    tan = np.where(r > 0, d1 / np.tanh(safe), d2) - u
    return RadialEigenvalues(d2 - u, tan)


def radial_sigma(n: int, k: int, radial, tangential):
    return comb(n - 1, k) * tangential**k + comb(n - 1, k - 1) * radial * tangential ** (k - 1)


def radial_ode_residual(sol: RadialSolution, r):
    """``sigma_k(W) - C(n,k)`` for the radial profile at ``r``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > sol.R * (1 + 1e-12)):
        raise ValueError("r must lie in [0, R]")
    lam = radial_eigenvalues(sol, r)
    out = radial_sigma(sol.n, sol.k, lam.radial, lam.tangential) - comb(sol.n, sol.k)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- shooting


def _rk4(n: int, k: int, hyperbolic: bool, R: float, a, steps: int):
    """Integrate from the centre with u(0) = a, u'(0) = 0 on a uniform grid.

    Works on floats and on numpy arrays of initial values. Returns the grid
    and the lists of ``u`` and ``u'`` values.
    """
    cn, c1, c2 = comb(n, k), comb(n - 1, k), comb(n - 1, k - 1)
    h = R / steps
    grid = [i * h for i in range(steps + 1)]
    if hyperbolic:
        g = [0.0] + [1.0 / math.tanh(r) for r in grid[1:]]
        gm = [1.0 / math.tanh(r + 0.5 * h) for r in grid]
    else:
        g = [0.0] + [1.0 / r for r in grid[1:]]
        gm = [1.0 / (r + 0.5 * h) for r in grid]

    def accel(u, p, gr):
        t = p * gr - u if hyperbolic else p * gr
        rad = (cn - c1 * t**k) / (c2 * t ** (k - 1))
        return rad + u if hyperbolic else rad

    # admissible branch at the centre: W = I, so u''(0) = 1 (+ u(0) in H^n)
    a2 = (1.0 + a) if hyperbolic else (1.0 + 0.0 * a)
    us, ps = [a], [0.0 * a]
    u, p = a + 0.5 * a2 * h * h, a2 * h
    us.append(u)
    ps.append(p)
    for i in range(1, steps):
        k1u, k1p = p, accel(u, p, g[i])
        u2, p2 = u + 0.5 * h * k1u, p + 0.5 * h * k1p
        k2u, k2p = p2, accel(u2, p2, gm[i])
        u3, p3 = u + 0.5 * h * k2u, p + 0.5 * h * k2p
        k3u, k3p = p3, accel(u3, p3, gm[i])
        u4, p4 = u + h * k3u, p + h * k3p
        k4u, k4p = p4, accel(u4, p4, g[i + 1])
        u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        us.append(u)
        ps.append(p)
    return grid, us, ps, a2, accel, g


def shoot_radial(n: int, k: int, space, R: float, steps: int = SHOOT_STEPS,
                 scan: Sequence[float] | None = None) -> RadialSolution:
    """Solve ``sigma_k(W) = C(n,k)``, ``u'(0) = 0``, ``u(R) = 0`` by shooting on ``u(0)``.

    The interval of trial centre values (default ``[-(1 + R^2), 0]``) is scanned
    for a sign change of ``u(R)``, then refined with Brent's method.
    """
    _check_nk(n, k)
    space = Space.parse(space)
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    hyperbolic = space is Space.HYPERBOLIC
    lo, hi = scan if scan is not None else (-(1.0 + R * R), 0.0)
    trial = np.linspace(lo, hi, 65)
    with np.errstate(all="ignore"):
        end = np.asarray(_rk4(n, k, hyperbolic, R, trial, steps)[1][-1])
    ok = np.isfinite(end)
    sign = np.flatnonzero(ok[:-1] & ok[1:] & (np.sign(end[:-1]) != np.sign(end[1:])))
    if len(sign) == 0:
        raise ShootingError(
            f"no sign change of u(R) for u(0) in [{lo:g}, {hi:g}] "
            f"(n={n}, k={k}, {space.value}, R={R:g})"
        )
    i = int(sign[0])

    def miss(a):
        return _rk4(n, k, hyperbolic, R, a, steps)[1][-1]

    a0 = brentq(miss, trial[i], trial[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                maxiter=200)
    grid, us, ps, a2, accel, g = _rk4(n, k, hyperbolic, R, a0, steps)
    r = np.asarray(grid)
    u = np.asarray(us, dtype=float)
    p = np.asarray(ps, dtype=float)
    acc = np.array([a2] + [accel(us[j], ps[j], g[j]) for j in range(1, len(grid))], dtype=float)
    if abs(u[-1]) > 1e-10:
        raise ShootingError(f"shooting converged to u(R) = {u[-1]:.3e}, above 1e-10")
    u_s = CubicHermiteSpline(r, u, p)
    p_s = CubicHermiteSpline(r, p, acc)
    return RadialSolution(
        n, k, space, float(R), float(p[-1]),
        u=lambda x: u_s(np.asarray(x, float)),
        du=lambda x: p_s(np.asarray(x, float)),
        d2u=lambda x: p_s(np.asarray(x, float), 1),
        label="shot",
    )


# ---------------------------------------------------------- admissibility


def _as_field(u) -> ScalarField:
    return u.field() if isinstance(u, RadialSolution) else u


def admissibility_check(u, points, k: int | None = None) -> list[symfun.ConeReport]:
    """Garding-cone report for ``W`` at each sample point."""
    if k is None:
        if not isinstance(u, RadialSolution):
            raise ValueError("k is required for a bare field")
        k = u.k
    field = _as_field(u)
    W = jet_operator(covariant_jet(field, np.atleast_2d(points)), field.space)
    return [symfun.cone_membership(Wi, k) for Wi in W]


# -------------------------------------------------------------- P-functions


@dataclass(frozen=True)
class PFunctionSample:
    point: np.ndarray
    p_value: np.ndarray
    hess_trace_pairing: np.ndarray


def p_field(u: ScalarField, step: float = P_STEP) -> ScalarField:
    """``|Du|^2 - 2u`` (R^n) or ``|Du|^2 - u^2 - 2u`` (H^n) as a difference-only field."""
    def value(x):
        jet = covariant_jet(u, x)
        v = jet.grad_norm**2 - 2.0 * jet.value
        if u.space is Space.HYPERBOLIC:
            v = v - jet.value**2
        return v

    return ScalarField(u.dim, u.space, value, step=step, name=f"P[{u.name}]")


def p_function(u, x, k: int | None = None, step: float = P_STEP) -> PFunctionSample:
    """P-function value and the contraction ``sigma_k^{ij}(W) P_ij`` at ``x``."""
    if k is None:
        if not isinstance(u, RadialSolution):
            raise ValueError("k is required for a bare field")
        k = u.k
    field = _as_field(u)
    x = np.asarray(x, dtype=float)
    P = p_field(field, step)
    G = symfun.sigma_gradient(jet_operator(covariant_jet(field, x), field.space), k)
    Pjet = covariant_jet(P, x)
    pairing = np.sum(G * Pjet.hess, axis=(-2, -1))
    return PFunctionSample(x, Pjet.value, pairing)


def p_subsolution_residual(sol: RadialSolution, points) -> np.ndarray:
    """``sigma_k^{ij}(W) P_ij`` at the sample points (zero for the exact solutions)."""
    return p_function(sol, np.atleast_2d(points)).hess_trace_pairing


class PBrackets(NamedTuple):
    euclidean: float
    euclidean_bound: float
    hyperbolic: float


def p_brackets(A, k: int) -> PBrackets:
    """The algebraic brackets of the P-function computation at a matrix ``A``.

    * ``euclidean = sigma_1 sigma_k - (k+1) sigma_{k+1} - k sigma_k``
    * ``euclidean_bound = k sigma_k (sigma_1/n - 1)``; ``euclidean >= euclidean_bound``
      on Gamma_k, and on the level set ``sigma_k = C(n,k)`` the bound equals
      ``k sigma_k (sigma_1/n - sigma_k/C(n,k)) >= 0``
    * ``hyperbolic = (n-k+1) sigma_{k-1} - k sigma_k`` (>= 0 on that level set)
    """
    A = symfun.check_symmetric(A)
    n = A.shape[-1]
    s = np.append(symfun.sigma_all(A), 0.0)
    e = s[1] * s[k] - (k + 1) * s[k + 1] - k * s[k]
    bound = k * s[k] * (s[1] / n - 1.0)
    hyp = (n - k + 1) * s[k - 1] - k * s[k]
    return PBrackets(float(e), float(bound), float(hyp))
