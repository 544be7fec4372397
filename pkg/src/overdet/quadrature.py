"""Star-shaped domains and tensor-product quadrature on them.

A domain is described by its geodesic radius along each direction from the
chart origin. Volume integrals are taken in geodesic polar coordinates,

    int_Omega f = int_{S^{n-1}} int_0^{rho(w)} f(r, w) h(r)^{n-1} dr dw,

with ``h(r) = r`` (Euclidean) or ``sinh r`` (hyperbolic): Gauss-Legendre in
the scaled radius ``t = r / rho(w)`` and, for the directions, the periodic
trapezoid rule in 2-D or Gauss-Legendre(cos theta) x trapezoid(phi) in 3-D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .geometry import Space, boundary_shape, chart_radius

DEFAULT_RESOLUTION = {2: (64, 256), 3: (48, 96, 192)}
MIN_RESOLUTION = 8
CHUNK = 1 << 15


class ChartBoundary(NamedTuple):
    point: np.ndarray
    normal: np.ndarray
    curvatures: np.ndarray
    density: np.ndarray


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class Ball:
    """Geodesic ball of the given radius."""

    radius: float

    dims = (2, 3)
    kind = "ball"

    def radius_at(self, omega: np.ndarray) -> np.ndarray:
        return np.full(omega.shape[:-1], float(self.radius))

    def polar(self, theta):
        theta = np.asarray(theta, dtype=float)
        z = np.zeros_like(theta)
        return z + self.radius, z, z

    def implicit(self, x: np.ndarray):
        n = x.shape[-1]
        return x, np.broadcast_to(np.eye(n), x.shape + (n,))


@dataclass(frozen=True)
class FourierProfile:
    """``rho(theta) = radius * (1 + sum_m a_m cos(m theta) + b_m sin(m theta))`` (2-D only)."""

    radius: float
    coefficients: tuple[tuple[int, float, float], ...] = ()

    dims = (2,)
    kind = "fourier"

    def polar(self, theta):
        theta = np.asarray(theta, dtype=float)
        r, dr, d2r = np.ones_like(theta), np.zeros_like(theta), np.zeros_like(theta)
        for m, a, b in self.coefficients:
            c, s = np.cos(m * theta), np.sin(m * theta)
            r = r + a * c + b * s
            dr = dr + m * (b * c - a * s)
            d2r = d2r - m * m * (a * c + b * s)
        return self.radius * r, self.radius * dr, self.radius * d2r

    def radius_at(self, omega: np.ndarray) -> np.ndarray:
        return self.polar(np.arctan2(omega[..., 1], omega[..., 0]))[0]


@dataclass(frozen=True)
class Ellipsoid:
    """Euclidean ellipse / ellipsoid with the given semi-axes."""

    axes: tuple[float, ...]

    dims = (2, 3)
    kind = "ellipsoid"

    def radius_at(self, omega: np.ndarray) -> np.ndarray:
        a = np.asarray(self.axes)
        return 1.0 / np.sqrt(np.sum((omega / a) ** 2, axis=-1))

    def polar(self, theta):
        a, b = self.axes
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        D = (b * c) ** 2 + (a * s) ** 2
        dD = (a * a - b * b) * np.sin(2 * theta)
        d2D = 2.0 * (a * a - b * b) * np.cos(2 * theta)
        r = a * b * D**-0.5
        dr = -0.5 * a * b * D**-1.5 * dD
        d2r = a * b * (0.75 * D**-2.5 * dD**2 - 0.5 * D**-1.5 * d2D)
        return r, dr, d2r

    def implicit(self, x: np.ndarray):
        inv = 1.0 / np.asarray(self.axes) ** 2
        return x * inv, np.broadcast_to(np.diag(inv), x.shape + (x.shape[-1],))


# ------------------------------------------------------------------ domain


def _directions_3d(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class Domain:
    """Star-shaped region about the chart origin in R^n or H^n (n = 2, 3)."""

    dim: int
    space: Space
    profile: Ball | FourierProfile | Ellipsoid

    def __post_init__(self):
        object.__setattr__(self, "space", Space.parse(self.space))
        if self.dim not in (2, 3):
            raise ValueError(f"domains are supported in dimension 2 or 3, not {self.dim}")
        if self.dim not in self.profile.dims:
            raise ValueError(f"{self.profile.kind} profile is not available in dimension {self.dim}")
        if isinstance(self.profile, Ellipsoid):
            if len(self.profile.axes) != self.dim:
                raise ValueError("ellipsoid needs one semi-axis per dimension")
            if self.space is Space.HYPERBOLIC:
                raise ValueError("ellipsoid profiles are Euclidean only")
        if self.dim == 3 and self.space is Space.HYPERBOLIC and not isinstance(self.profile, Ball):
            raise ValueError("3-D hyperbolic domains must be geodesic balls")
        rho = self._probe_radii()
        if not np.all(np.isfinite(rho)) or np.min(rho) <= 0.0:
            raise ValueError(f"profile radius must stay positive (min = {np.min(rho):.6g})")
        if self.space is Space.HYPERBOLIC and np.tanh(0.5 * np.max(rho)) >= 1.0 - 1e-9:
            raise ValueError("hyperbolic profile leaves the Poincare chart")

    def _probe_radii(self) -> np.ndarray:
        if self.dim == 2:
            return self.profile.polar(np.linspace(0.0, 2 * np.pi, 1024, endpoint=False))[0]
        g = np.linspace(0.0, np.pi, 64)
        th, ph = np.meshgrid(g, 2 * g)
        return self.profile.radius_at(_directions_3d(th, ph))

    def radius_at(self, omega) -> np.ndarray:
        """Geodesic radius along unit directions ``omega``."""
        return self.profile.radius_at(np.asarray(omega, dtype=float))

    def chart_boundary(self, *param) -> ChartBoundary:
        """Euclidean geometry of the boundary's chart image.

        ``param`` is ``theta`` in 2-D and ``(theta, phi)`` in 3-D; the density
        is with respect to ``dtheta`` or the sphere's area element.
        """
        if self.dim == 2:
            return self._chart_boundary_2d(*param)
        return self._chart_boundary_3d(*param)

    def _chart_boundary_2d(self, theta) -> ChartBoundary:
        theta = np.asarray(theta, dtype=float)
        rho, d1, d2 = self.profile.polar(theta)
        if np.any(rho <= 0):
            raise ValueError("degenerate profile (rho <= 0)")
        if self.space is Space.HYPERBOLIC:
            s = np.tanh(0.5 * rho)
            ds = 0.5 * (1.0 - s * s) * d1
            d2s = 0.5 * (1.0 - s * s) * d2 - s * ds * d1
        else:
            s, ds, d2s = rho, d1, d2
        c, sn = np.cos(theta), np.sin(theta)
        point = np.stack([s * c, s * sn], axis=-1)
        tx, ty = ds * c - s * sn, ds * sn + s * c
        speed = np.hypot(tx, ty)
        normal = np.stack([ty, -tx], axis=-1) / speed[..., None]
        kappa = (s * s + 2.0 * ds * ds - s * d2s) / speed**3
        return ChartBoundary(point, normal, kappa[..., None], speed)

    def _chart_boundary_3d(self, theta, phi) -> ChartBoundary:
        omega = _directions_3d(np.asarray(theta, float), np.asarray(phi, float))
        s = chart_radius(self.radius_at(omega), self.space)
        point = s[..., None] * omega
        gradF, hessF = self.profile.implicit(point)
        gnorm = np.linalg.norm(gradF, axis=-1)
        normal = gradF / gnorm[..., None]
        # orthonormal tangent frame: Gram-Schmidt from the least aligned axis
        axis = np.where(np.abs(normal[..., 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]),
                        np.array([1.0, 0.0, 0.0]))
        t1 = axis - np.sum(axis * normal, axis=-1, keepdims=True) * normal
        t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
        t2 = np.cross(normal, t1)
        Tb = np.stack([t1, t2], axis=-1)  # (..., 3, 2)
        B = np.swapaxes(Tb, -1, -2) @ hessF @ Tb / gnorm[..., None, None]
        kappa = np.linalg.eigvalsh(0.5 * (B + np.swapaxes(B, -1, -2)))
        density = s**2 / np.sum(omega * normal, axis=-1)
        return ChartBoundary(point, normal, kappa, density)

    def describe(self) -> dict:
        prof = self.profile
        d = {"space": self.space.value, "dim": self.dim, "profile": prof.kind}
        if isinstance(prof, Ball):
            d["R"] = prof.radius
        elif isinstance(prof, FourierProfile):
            d["R"] = prof.radius
            d["coefficients"] = [list(c) for c in prof.coefficients]
        else:
            d["axes"] = list(prof.axes)
        return d


# -------------------------------------------------------------------- mesh


@dataclass(frozen=True)
class QuadMesh:
    space: Space
    dim: int
    volume_points: np.ndarray
    volume_weights: np.ndarray
    boundary_points: np.ndarray
    boundary_weights: np.ndarray
    boundary_normals: np.ndarray
    boundary_curvatures: np.ndarray
    resolution: tuple[int, ...]
    domain: Domain = field(repr=False, compare=False, default=None)


def _angular_rule(dim: int, resolution: Sequence[int]):
    """Directions and weights of the angular rule, plus its parameters."""
    if dim == 2:
        nt = resolution[1]
        theta = 2.0 * np.pi * np.arange(nt) / nt
        omega = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return omega, np.full(nt, 2.0 * np.pi / nt), (theta,)
    nt, nphi = resolution[1], resolution[2]
    mu, wmu = np.polynomial.legendre.leggauss(nt)
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    TH, PH = np.meshgrid(np.arccos(mu), phi, indexing="ij")
    W = np.repeat(wmu[:, None], nphi, axis=1) * (2.0 * np.pi / nphi)
    return _directions_3d(TH, PH).reshape(-1, 3), W.ravel(), (TH.ravel(), PH.ravel())


def build_mesh(domain: Domain, resolution: Sequence[int] | None = None) -> QuadMesh:
    """Volume and boundary quadrature for ``domain``.

    ``resolution`` is ``(N_r, N_theta)`` in 2-D and ``(N_r, N_theta, N_phi)``
    in 3-D; defaults are in :data:`DEFAULT_RESOLUTION`.
    """
    dim = domain.dim
    res = tuple(int(v) for v in (resolution or DEFAULT_RESOLUTION[dim]))
    if len(res) != dim:
        raise ValueError(f"resolution needs {dim} entries, got {res}")
    if min(res) < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION} per axis, got {res}")

    omega, wang, param = _angular_rule(dim, res)
    rho = domain.radius_at(omega)

    t, wt = np.polynomial.legendre.leggauss(res[0])
    t, wt = 0.5 * (t + 1.0), 0.5 * wt
    r = rho[:, None] * t[None, :]
    h = r if domain.space is Space.EUCLIDEAN else np.sinh(r)
    vol_w = wang[:, None] * rho[:, None] * wt[None, :] * h ** (dim - 1)
    vol_x = chart_radius(r, domain.space)[..., None] * omega[:, None, :]

    shape = boundary_shape(domain, *param)
    bnd_w = wang * shape.density
    if np.any(vol_w <= 0) or np.any(bnd_w <= 0):
        raise ValueError("non-positive quadrature weight; profile is not star-shaped enough")

    return QuadMesh(
        space=domain.space,
        dim=dim,
        volume_points=vol_x.reshape(-1, dim),
        volume_weights=vol_w.ravel(),
        boundary_points=shape.point,
        boundary_weights=bnd_w,
        boundary_normals=shape.normal,
        boundary_curvatures=shape.curvatures,
        resolution=res,
        domain=domain,
    )


# ------------------------------------------------------------- integration


def _check_finite(values: np.ndarray, points: np.ndarray, label: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad.reshape(len(points), -1).any(axis=1))[0])
        raise ValueError(f"non-finite {label} integrand at node {i}, x = {points[i].tolist()}")


def weighted_sums(points: np.ndarray, weights: np.ndarray,
                  fn: Callable[[np.ndarray], dict], label: str = "volume",
                  chunk: int = CHUNK) -> dict:
    """Evaluate ``fn`` (returning a dict of integrand arrays) chunk by chunk.

    Each sum is accumulated with ``math.fsum`` so the result does not depend
    on the chunking or evaluation order.
    """
    parts: dict[str, list[float]] = {}
    for lo in range(0, len(weights), chunk):
        x = points[lo:lo + chunk]
        w = weights[lo:lo + chunk]
        for key, val in fn(x).items():
            val = np.broadcast_to(np.asarray(val, dtype=float), w.shape)
            _check_finite(val, x, f"{label} '{key}'")
            parts.setdefault(key, []).extend((w * val).tolist())
    return {key: math.fsum(v) for key, v in parts.items()}


def _integrate(f, points, weights, label) -> float:
    if callable(f):
        return weighted_sums(points, weights, lambda x: {"f": f(x)}, label)["f"]
    vals = np.broadcast_to(np.asarray(f, dtype=float), weights.shape)
    _check_finite(vals, points, label)
    return math.fsum((weights * vals).tolist())


def integrate_volume(f, mesh: QuadMesh) -> float:
    """``sum_i w_i f(x_i)`` over volume nodes; ``f`` is a callable or node values."""
    return _integrate(f, mesh.volume_points, mesh.volume_weights, "volume")


def integrate_boundary(f, mesh: QuadMesh) -> float:
    """``sum_b w_b f(x_b)`` over boundary nodes; ``f`` is a callable or node values."""
    return _integrate(f, mesh.boundary_points, mesh.boundary_weights, "boundary")
