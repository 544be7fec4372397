"""Covariant calculus on R^n and on H^n in the Poincare-ball chart.

Hyperbolic space is realised on the unit ball with metric ``lam(x)^2 |dx|^2``,
``lam = 2 / (1 - |x|^2)``. Every tensor handed to the symmetric-function
routines is expressed in the orthonormal frame ``e_i = lam^{-1} d/dx_i``;
Euclidean space is the special case ``lam = 1``.

Writing ``phi = log lam`` (so ``d phi = lam x``), the Christoffel symbols are

    Gamma^k_ij = delta_ik phi_j + delta_jk phi_i - delta_ij phi_k

and the frame-component formulas used below follow from them:

* Hessian:   ``hess = lam^-2 (d^2 u - du (x) dphi - dphi (x) du + <dphi, du> I)``
* div X:     ``lam^-1 (d_i X_i + (n - 1) <dphi, X>)``
* div T:     ``lam^-1 (d_i T_il + n (T dphi)_l - tr(T) phi_l)``
* (nabla T)_{il;j} = ``lam^-1 (d_j T_il - phi_i T_jl - phi_l T_ij
  + delta_ij (T dphi)_l + delta_jl (T dphi)_i)``
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import symfun

CHART_MARGIN = 1e-9
DEFAULT_STEP = 1e-4
CRITICAL_GRAD = 1e-8

Array = np.ndarray
PointFn = Callable[[Array], Array]


class Space(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    HYPERBOLIC = "hyperbolic"

    @classmethod
    def parse(cls, value) -> "Space":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown space {value!r}; expected 'euclidean' or 'hyperbolic'"
            ) from None


# ---------------------------------------------------------------- chart


def _points(x) -> Array:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        raise ValueError("a chart point needs at least one coordinate")
    return x


def check_chart(x, space: Space) -> Array:
    x = _points(x)
    if Space.parse(space) is Space.HYPERBOLIC:
        s = np.linalg.norm(x, axis=-1)
        if np.any(s >= 1.0 - CHART_MARGIN):
            raise ValueError(
                f"point outside the Poincare ball (|x| = {float(np.max(s)):.12g})"
            )
    return x


def conformal_factor(x) -> Array | float:
    """``2 / (1 - |x|^2)``; the hyperbolic metric is its square times |dx|^2."""
    x = check_chart(x, Space.HYPERBOLIC)
    lam = 2.0 / (1.0 - np.sum(x * x, axis=-1))
    return float(lam) if np.ndim(lam) == 0 else lam


def _factor_and_dphi(x: Array, space: Space) -> tuple[Array, Array]:
    if space is Space.EUCLIDEAN:
        return np.ones(x.shape[:-1]), np.zeros_like(x)
    lam = 2.0 / (1.0 - np.sum(x * x, axis=-1))
    return lam, lam[..., None] * x


def geodesic_radius(x, space: Space) -> Array:
    """Distance from the chart origin: ``|x|`` or ``log((1+|x|)/(1-|x|))``."""
    s = np.linalg.norm(_points(x), axis=-1)
    if Space.parse(space) is Space.EUCLIDEAN:
        return s
    return 2.0 * np.arctanh(s)


def chart_radius(r, space: Space) -> Array:
    """Inverse of :func:`geodesic_radius` along a ray."""
    r = np.asarray(r, dtype=float)
    return r if Space.parse(space) is Space.EUCLIDEAN else np.tanh(0.5 * r)


def sample_ball(rng: np.random.Generator, m: int, n: int, radius: float) -> Array:
    """``m`` points uniform (in chart volume) in the chart ball of the given radius."""
    d = rng.standard_normal((m, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radius * rng.random(m)[:, None] ** (1.0 / n) * d


# -------------------------------------------------------- finite differences


def _safe_step(x: Array, h: float, space: Space) -> Array:
    """Per-point step, shrunk near the ideal boundary so the stencil stays in chart."""
    check_chart(x, space)
    hh = np.full(x.shape[:-1], float(h))
    if space is Space.HYPERBOLIC:
        room = 1.0 - np.linalg.norm(x, axis=-1)
        hh = np.minimum(hh, room / 4.0)
    return hh


def _expand(h: Array, ndim: int) -> Array:
    return h.reshape(h.shape + (1,) * (ndim - h.ndim))


def partials(F: PointFn, x: Array, h: Array, richardson: bool = True) -> Array:
    """Central differences of ``F`` in every chart direction.

    ``F`` maps points ``(..., n)`` to ``(..., *shape)``; the result has shape
    ``(..., *shape, n)``.
    """
    n = x.shape[-1]

    def central(step: Array) -> Array:
        cols = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            off = step[..., None] * e
            diff = F(x + off) - F(x - off)
            cols.append(diff / (2.0 * _expand(step, diff.ndim)))
        return np.stack(cols, axis=-1)

    d = central(h)
    if richardson:
        d = (4.0 * central(0.5 * h) - d) / 3.0
    return d


def second_partials(f: PointFn, x: Array, h: Array, richardson: bool = True) -> Array:
    """Hessian of a scalar function by second differences, shape ``(..., n, n)``."""
    n = x.shape[-1]
    eye = np.eye(n)

    def stencil(step: Array) -> Array:
        f0 = f(x)
        hs = step[..., None]
        out = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            ei = hs * eye[i]
            out[..., i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / step**2
            for j in range(i + 1, n):
                ej = hs * eye[j]
                v = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                    4.0 * step**2
                )
                out[..., i, j] = out[..., j, i] = v
        return out

    H = stencil(h)
    if richardson:
        H = (4.0 * stencil(0.5 * h) - H) / 3.0
    return H


# ------------------------------------------------------------- scalar fields


def _add(f: Optional[PointFn], g: Optional[PointFn]) -> Optional[PointFn]:
    if f is None or g is None:
        return None
    return lambda x: f(x) + g(x)


def _scale(c: float, f: Optional[PointFn]) -> Optional[PointFn]:
    if f is None:
        return None
    return lambda x: c * f(x)


@dataclass(frozen=True)
class ScalarField:
    """A scalar function on the chart with exact or finite-difference derivatives.

    ``grad`` and ``hess`` supply *chart* partial derivatives
    (``d_i u`` and ``d_i d_j u``); whichever is missing is obtained by
    central differences with step ``step`` (one Richardson level when
    ``richardson`` is set). All callables act on stacks of points.
    """

    dim: int
    space: Space
    value: PointFn
    grad: Optional[PointFn] = None
    hess: Optional[PointFn] = None
    step: float = DEFAULT_STEP
    richardson: bool = True
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not 0.0 < self.step <= 1e-2:
            raise ValueError(f"finite-difference step must lie in (0, 1e-2], got {self.step}")
        object.__setattr__(self, "space", Space.parse(self.space))

    @property
    def exact(self) -> bool:
        return self.grad is not None and self.hess is not None

    def with_step(self, step: float, richardson: bool = True) -> "ScalarField":
        return ScalarField(self.dim, self.space, self.value, self.grad, self.hess,
                           step, richardson, self.name)

    def finite_difference(self, step: float = DEFAULT_STEP, richardson: bool = True) -> "ScalarField":
        """Same field with the exact suppliers dropped."""
        return ScalarField(self.dim, self.space, self.value, None, None, step, richardson,
                           self.name + " (fd)")

    def __call__(self, x) -> Array:
        return self.value(check_chart(x, self.space))

    def chart_gradient(self, x) -> Array:
        x = check_chart(x, self.space)
        if self.grad is not None:
            return self.grad(x)
        return partials(self.value, x, _safe_step(x, self.step, self.space), self.richardson)

    def chart_hessian(self, x) -> Array:
        x = check_chart(x, self.space)
        if self.hess is not None:
            return self.hess(x)
        h = _safe_step(x, self.step, self.space)
        if self.grad is not None:
            H = partials(self.grad, x, h, self.richardson)
            return 0.5 * (H + np.swapaxes(H, -1, -2))
        return second_partials(self.value, x, h, self.richardson)

    def _check_compatible(self, other: "ScalarField") -> None:
        if self.dim != other.dim or self.space is not other.space:
            raise ValueError("fields live on different spaces")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            c = float(other)
            return ScalarField(self.dim, self.space, lambda x: self.value(x) + c,
                               self.grad, self.hess, self.step, self.richardson, self.name)
        self._check_compatible(other)
        return ScalarField(self.dim, self.space, _add(self.value, other.value),
                           _add(self.grad, other.grad), _add(self.hess, other.hess),
                           min(self.step, other.step), self.richardson and other.richardson,
                           f"{self.name} + {other.name}")

    __radd__ = __add__

    def __mul__(self, c):
        if not isinstance(c, (int, float)):
            return NotImplemented
        c = float(c)
        return ScalarField(self.dim, self.space, _scale(c, self.value), _scale(c, self.grad),
                           _scale(c, self.hess), self.step, self.richardson,
                           f"{c:g}*({self.name})")

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self


def v_field(space, n: int) -> ScalarField:
    """The static potential ``cosh r`` (hyperbolic) or ``|x|^2 / 2`` (Euclidean).

    In both cases the frame Hessian is a multiple of the identity: ``V I`` in
    H^n and ``I`` in R^n, and the gradient of the Euclidean field is the
    position vector.
    """
    space = Space.parse(space)
    if space is Space.EUCLIDEAN:
        return ScalarField(
            n, space,
            value=lambda x: 0.5 * np.sum(x * x, axis=-1),
            grad=lambda x: np.array(x, dtype=float),
            hess=lambda x: np.broadcast_to(np.eye(x.shape[-1]), x.shape + (x.shape[-1],)).copy(),
            name="|x|^2/2",
        )

    def value(x):
        q = np.sum(x * x, axis=-1)
        return (1.0 + q) / (1.0 - q)

    def grad(x):
        q = np.sum(x * x, axis=-1)[..., None]
        return 4.0 * x / (1.0 - q) ** 2

    def hess(x):
        q = np.sum(x * x, axis=-1)[..., None, None]
        eye = np.eye(x.shape[-1])
        return 4.0 * eye / (1.0 - q) ** 2 + 16.0 * x[..., :, None] * x[..., None, :] / (1.0 - q) ** 3

    return ScalarField(n, space, value, grad, hess, name="cosh r")


# ------------------------------------------------------------------- jets


@dataclass(frozen=True)
class FrameJet:
    """Value, gradient and covariant Hessian in the orthonormal frame."""

    point: Array
    value: Array
    grad: Array
    hess: Array
    grad_norm: Array


def covariant_jet(u: ScalarField, x) -> FrameJet:
    x = check_chart(x, u.space)
    val = u(x)
    du = u.chart_gradient(x)
    d2u = u.chart_hessian(x)
    lam, dphi = _factor_and_dphi(x, u.space)
    if u.space is Space.HYPERBOLIC:
        outer = du[..., :, None] * dphi[..., None, :]
        cross = np.sum(du * dphi, axis=-1)[..., None, None]
        d2u = d2u - outer - np.swapaxes(outer, -1, -2) + cross * np.eye(x.shape[-1])
        du = du / lam[..., None]
        d2u = d2u / (lam**2)[..., None, None]
    return FrameJet(x, val, du, d2u, np.linalg.norm(du, axis=-1))


def jet_operator(jet: FrameJet, space: Space) -> Array:
    """``D^2u`` in R^n, ``D^2u - u I`` in H^n."""
    if Space.parse(space) is Space.EUCLIDEAN:
        return jet.hess
    n = jet.hess.shape[-1]
    return jet.hess - np.asarray(jet.value)[..., None, None] * np.eye(n)


def operator_matrix(u: ScalarField, x) -> Array:
    return jet_operator(covariant_jet(u, x), u.space)


def level_set_curvature(u: ScalarField, x, k: int) -> Array:
    """``H_{k-1}`` of the level set of ``u`` through ``x``.

    ``sigma_k^{ij}(D^2u) u_i u_j / |Du|^{k+1}``, using the covariant Hessian
    (not ``D^2u - uI``) in both spaces.
    """
    jet = covariant_jet(u, x)
    if np.any(jet.grad_norm < CRITICAL_GRAD):
        raise ValueError(
            f"|Du| = {float(np.min(jet.grad_norm)):.3e} below {CRITICAL_GRAD:g}: critical point"
        )
    G = symfun.sigma_gradient(jet.hess, k)
    num = np.einsum("...i,...ij,...j->...", jet.grad, G, jet.grad)
    out = num / jet.grad_norm ** (k + 1)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------- boundaries


class BoundaryShape(NamedTuple):
    point: Array
    normal: Array
    curvatures: Array
    density: Array


def boundary_shape(domain, *param) -> BoundaryShape:
    """Outward normal, principal curvatures and measure density of ``d(domain)``.

    ``domain.chart_boundary(*param)`` provides the Euclidean geometry of the
    chart image (point, unit normal, principal curvatures, area density with
    respect to the angular measure). The hyperbolic values follow from the
    conformal change ``kappa_g = lam^{-1} (kappa_e + d_nu log lam)`` and
    ``dsigma_g = lam^{n-1} dsigma_e``; frame normal components equal the
    Euclidean unit normal.
    """
    point, normal, kappa, density = domain.chart_boundary(*param)
    space = Space.parse(domain.space)
    if space is Space.HYPERBOLIC:
        lam, _ = _factor_and_dphi(point, space)
        dnu = lam * np.sum(point * normal, axis=-1)
        kappa = (kappa + dnu[..., None]) / lam[..., None]
        density = density * lam ** (point.shape[-1] - 1)
    return BoundaryShape(point, normal, kappa, density)


# ------------------------------------------------- third-order quantities


def frame_partials(F: PointFn, x, space: Space, h: float = DEFAULT_STEP,
                   richardson: bool = True) -> Array:
    """Raw chart partials of a frame-component field (last axis = direction)."""
    x = check_chart(x, space)
    return partials(F, x, _safe_step(x, h, space), richardson)


def vector_divergence(X: PointFn, x, space, h: float = DEFAULT_STEP,
                      richardson: bool = True) -> Array:
    """Divergence of a vector field given by its frame components."""
    space = Space.parse(space)
    x = check_chart(x, space)
    n = x.shape[-1]
    dX = frame_partials(X, x, space, h, richardson)
    lam, dphi = _factor_and_dphi(x, space)
    return (np.trace(dX, axis1=-2, axis2=-1) + (n - 1) * np.sum(dphi * X(x), axis=-1)) / lam


def tensor_divergence(T: PointFn, x, space, h: float = DEFAULT_STEP,
                      richardson: bool = True) -> Array:
    """``D_i T_{il}`` for a symmetric 2-tensor field given in frame components."""
    space = Space.parse(space)
    x = check_chart(x, space)
    n = x.shape[-1]
    dT = frame_partials(T, x, space, h, richardson)  # (..., i, l, j)
    lam, dphi = _factor_and_dphi(x, space)
    T0 = T(x)
    Tphi = np.einsum("...ij,...j->...i", T0, dphi)
    tr = np.trace(T0, axis1=-2, axis2=-1)
    div = np.einsum("...ili->...l", dT) + n * Tphi - tr[..., None] * dphi
    return div / lam[..., None]


def tensor_covariant_derivative(T: PointFn, x, space, h: float = DEFAULT_STEP,
                                richardson: bool = True) -> Array:
    """``(nabla T)_{il;j}`` of a symmetric 2-tensor, shape ``(..., n, n, n)``."""
    space = Space.parse(space)
    x = check_chart(x, space)
    n = x.shape[-1]
    dT = frame_partials(T, x, space, h, richardson)
    lam, dphi = _factor_and_dphi(x, space)
    if space is Space.EUCLIDEAN:
        return dT
    T0 = T(x)
    Tphi = np.einsum("...ij,...j->...i", T0, dphi)
    eye = np.eye(n)
    corr = (
        -np.einsum("...i,...jl->...ilj", dphi, T0)
        - np.einsum("...l,...ij->...ilj", dphi, T0)
        + np.einsum("ij,...l->...ilj", eye, Tphi)
        + np.einsum("jl,...i->...ilj", eye, Tphi)
    )
    return (dT + corr) / lam[..., None, None, None]


def third_derivatives(u: ScalarField, x, h: float = DEFAULT_STEP,
                      richardson: bool = True) -> Array:
    """``u_{ilj} = D_j (D^2 u)_{il}`` by differencing the frame Hessian."""
    return tensor_covariant_derivative(lambda y: covariant_jet(u, y).hess, x, u.space, h,
                                       richardson)


def divergence_free_residual(u: ScalarField, x, k: int, h: float = DEFAULT_STEP,
                             richardson: bool = True) -> Array:
    """Covariant divergence of ``sigma_k^{ij}(W)``, which vanishes for C^3 fields."""
    def T(y):
        return symfun.sigma_gradient(operator_matrix(u, y), k)

    return tensor_divergence(T, x, u.space, h, richardson)


def exchange_commutator(W, H, k: int) -> Array:
    """``max_{j,l} |(G H)_{jl} - (H G)_{jl}|`` with ``G = sigma_k^{ij}(W)``.

    Vanishes whenever ``W - H`` is a multiple of the identity, since ``G``
    is then a polynomial in ``H``.
    """
    G = symfun.sigma_gradient(W, k)
    H = np.asarray(H, dtype=float)
    C = G @ H - H @ G
    return np.max(np.abs(C), axis=(-2, -1))


def index_exchange_residual(u: ScalarField, x, k: int) -> Array:
    jet = covariant_jet(u, x)
    out = exchange_commutator(jet_operator(jet, u.space), jet.hess, k)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------ closed-form fields


def monomial_field(space, alpha: tuple[int, ...]) -> ScalarField:
    """``prod_i x_i^{alpha_i}`` in chart coordinates, with exact derivatives."""
    space = Space.parse(space)
    alpha = tuple(int(a) for a in alpha)
    n = len(alpha)

    def power(x, i, p):
        return x[..., i] ** p if p > 0 else np.ones(x.shape[:-1])

    def deriv(x, counts):
        out = np.ones(x.shape[:-1])
        for i in range(n):
            a, c = alpha[i], counts[i]
            if c > a:
                return np.zeros(x.shape[:-1])
            out = out * (math.perm(a, c) * power(x, i, a - c))
        return out

    def value(x):
        return deriv(x, (0,) * n)

    def grad(x):
        return np.stack([deriv(x, tuple(int(i == j) for j in range(n))) for i in range(n)], -1)

    def hess(x):
        H = np.empty(x.shape[:-1] + (n, n))
        for i in range(n):
            for j in range(i, n):
                c = [0] * n
                c[i] += 1
                c[j] += 1
                H[..., i, j] = H[..., j, i] = deriv(x, tuple(c))
        return H

    label = "*".join(f"x{i + 1}^{a}" for i, a in enumerate(alpha) if a) or "1"
    return ScalarField(n, space, value, grad, hess, name=label)


def plane_wave_field(space, c) -> ScalarField:
    """``sin(c . x)`` in chart coordinates, with exact derivatives."""
    c = np.asarray(c, dtype=float)
    return ScalarField(
        len(c), Space.parse(space),
        value=lambda x: np.sin(x @ c),
        grad=lambda x: np.cos(x @ c)[..., None] * c,
        hess=lambda x: -np.sin(x @ c)[..., None, None] * np.outer(c, c),
        name=f"sin({np.round(c, 3).tolist()}.x)",
    )
