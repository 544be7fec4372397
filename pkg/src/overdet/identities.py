"""Integral identities of the overdetermined k-Hessian problems, checked on meshes.

Both spaces share one notation. ``V`` is the static potential of
:func:`overdet.geometry.v_field` (``cosh r`` in H^n, ``|x|^2/2`` in R^n), so
``D^2 V = w I`` with weight ``w = V`` resp. ``w = 1``, and ``DV`` is the
position vector in R^n. ``W`` is ``D^2u - uI`` in H^n and ``D^2u`` in R^n,
``G = sigma_k^{ij}(W)``.

Every check returns an :class:`IdentityReport`. Preconditions (zero boundary
values, Neumann datum, the equation itself) are evaluated first and reported
with status ``"precondition-failed"`` instead of as identity failures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import comb
from types import SimpleNamespace

import numpy as np

from . import symfun
from .geometry import (
    ScalarField,
    Space,
    covariant_jet,
    divergence_free_residual,
    jet_operator,
    level_set_curvature,
    monomial_field,
    operator_matrix,
    plane_wave_field,
    tensor_covariant_derivative,
    v_field,
)
from .quadrature import CHUNK, QuadMesh, weighted_sums
from .radial import RadialSolution

PASS, FAIL, PRECONDITION = "pass", "fail", "precondition-failed"

TOL_2D = 1e-8
TOL_3D = 1e-6
TOL_THIRD_ORDER = 1e-5
BOUNDARY_ZERO_TOL = 1e-9
NEUMANN_TOL = 1e-8
EQUATION_TOL = 1e-8
THIRD_ORDER_STEP = 1e-3


def default_tolerance(dim: int, third_order: bool = False) -> float:
    if third_order:
        return TOL_THIRD_ORDER
    return TOL_2D if dim <= 2 else TOL_3D


def relative_residual(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


@dataclass(frozen=True)
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    residual: float
    tolerance: float
    status: str
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def record(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "residual": self.residual,
                "tolerance": self.tolerance, "pass": self.passed, "status": self.status,
                "params": self.params, "extras": self.extras}


def make_report(name, lhs, rhs, tolerance, params, *, residual=None, checks=None,
                preconditions=None, extras=None) -> IdentityReport:
    """Assemble a report.

    ``checks`` maps sub-check names to ``(value, tolerance)``; all must hold
    alongside the main residual. ``preconditions`` maps names to
    ``(value, tolerance)`` as well, and any failure there overrides the status.
    """
    lhs, rhs = float(lhs), float(rhs)
    res = relative_residual(lhs, rhs) if residual is None else float(residual)
    extras = dict(extras or {})
    ok = res <= tolerance
    for key, (val, tol) in (checks or {}).items():
        extras[key] = float(val)
        ok = ok and val <= tol
    status = PASS if ok else FAIL
    failed = [key for key, (val, tol) in (preconditions or {}).items() if not val <= tol]
    if preconditions:
        extras["preconditions"] = {k: float(v) for k, (v, _) in preconditions.items()}
    if failed:
        status = PRECONDITION
        extras["failed_preconditions"] = failed
    return IdentityReport(name, lhs, rhs, res, float(tolerance), status, dict(params), extras)


# ---------------------------------------------------------------- helpers


def _field(u) -> ScalarField:
    return u.field() if isinstance(u, RadialSolution) else u


def _params(u, k, mesh: QuadMesh, **more) -> dict:
    p = {"k": k, "resolution": list(mesh.resolution)}
    if mesh.domain is not None:
        p["domain"] = mesh.domain.describe()
    if isinstance(u, RadialSolution):
        p["solution"] = u.describe()
    else:
        p["field"] = u.name
    p.update(more)
    return p


def _check_mesh(u: ScalarField, mesh: QuadMesh) -> None:
    if u.space is not mesh.space or u.dim != mesh.dim:
        raise ValueError(
            f"field ({u.space.value}, n={u.dim}) does not match mesh "
            f"({mesh.space.value}, n={mesh.dim})"
        )


def _terms(u: ScalarField, x: np.ndarray, k: int) -> SimpleNamespace:
    """Everything the identities need at a batch of nodes."""
    jet = covariant_jet(u, x)
    W = jet_operator(jet, u.space)
    sig, G, Gprev = symfun.sigma_and_gradient(W, k)
    vjet = covariant_jet(v_field(u.space, u.dim), x)
    hyper = u.space is Space.HYPERBOLIC
    weight = vjet.value if hyper else np.ones(len(x))
    return SimpleNamespace(
        u=jet.value, du=jet.grad, hess=jet.hess, grad_norm=jet.grad_norm, W=W,
        sig=sig, G=G, Gprev=Gprev, vgrad=vjet.grad, weight=weight, hyper=hyper,
    )


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _quad(a, M, b):
    return np.einsum("...i,...ij,...j->...", a, M, b)


def _boundary_terms(u: ScalarField, mesh: QuadMesh, k: int) -> SimpleNamespace:
    t = _terms(u, mesh.boundary_points, k)
    t.gamma = mesh.boundary_normals
    t.v_gamma = _dot(t.vgrad, t.gamma)
    return t


def _solution_preconditions(u: ScalarField, mesh: QuadMesh, k: int, c0=None,
                            neumann: bool = False) -> dict:
    """sup |u| on the boundary, the equation residual and optionally | |Du| - c0 |."""
    n = u.dim
    b = covariant_jet(u, mesh.boundary_points)
    checks = {"boundary_zero": (float(np.max(np.abs(b.value))), BOUNDARY_ZERO_TOL)}

    dev = 0.0
    for lo in range(0, len(mesh.volume_points), CHUNK):
        W = operator_matrix(u, mesh.volume_points[lo:lo + CHUNK])
        dev = max(dev, float(np.max(np.abs(symfun.sigma_k(W, k) - comb(n, k)))))
    checks["equation"] = (dev / comb(n, k), EQUATION_TOL)
    if neumann:
        if c0 is None:
            raise ValueError("the Neumann datum c0 is required")
        checks["neumann"] = (float(np.max(np.abs(b.grad_norm - c0))), NEUMANN_TOL)
    return checks


def _c0(u, c0):
    if c0 is not None:
        return float(c0)
    if isinstance(u, RadialSolution):
        return u.c0
    return None


# ------------------------------------------------------------- Minkowski


def _minkowski(mesh: QuadMesh, k: int, name: str, tol) -> IdentityReport:
    n = mesh.dim
    if not 1 <= k <= n - 1:
        raise ValueError(f"Minkowski formulas need 1 <= k <= n-1, got k = {k}")
    H = symfun.esym(mesh.boundary_curvatures, k)
    V = v_field(mesh.space, n)
    vjet = covariant_jet(V, mesh.boundary_points)
    v_gamma = _dot(vjet.grad, mesh.boundary_normals)
    weight = vjet.value if mesh.space is Space.HYPERBOLIC else 1.0
    w = mesh.boundary_weights
    lhs = math.fsum((w * H[:, k] / comb(n - 1, k) * v_gamma).tolist())
    rhs = math.fsum((w * H[:, k - 1] / comb(n - 1, k - 1) * weight).tolist())
    tol = default_tolerance(n) if tol is None else tol
    p = {"k": k, "resolution": list(mesh.resolution)}
    if mesh.domain is not None:
        p["domain"] = mesh.domain.describe()
    return make_report(name, lhs, rhs, tol, p)


def minkowski_euclidean(mesh: QuadMesh, k: int, tol: float | None = None) -> IdentityReport:
    """``int H_k/C(n-1,k) x.gamma = int H_{k-1}/C(n-1,k-1)`` over the boundary."""
    if mesh.space is not Space.EUCLIDEAN:
        raise ValueError("hyperbolic mesh: use minkowski_hyperbolic")
    return _minkowski(mesh, k, "minkowski-euclidean", tol)


def minkowski_hyperbolic(mesh: QuadMesh, k: int, tol: float | None = None) -> IdentityReport:
    """``int H_k/C(n-1,k) V_gamma = int H_{k-1}/C(n-1,k-1) V`` over the boundary."""
    if mesh.space is not Space.HYPERBOLIC:
        raise ValueError("Euclidean mesh: use minkowski_euclidean")
    return _minkowski(mesh, k, "minkowski-hyperbolic", tol)


# -------------------------------------------------------------- Pohozaev


def _pohozaev(sol, k: int, mesh: QuadMesh, space: Space, tol) -> IdentityReport:
    u = _field(sol)
    _check_mesh(u, mesh)
    if u.space is not space:
        raise ValueError(f"expected a {space.value} solution")
    n = u.dim
    pre = _solution_preconditions(u, mesh, k)
    b = _boundary_terms(u, mesh, k)
    lhs = 0.5 * math.fsum((mesh.boundary_weights * _quad(b.gamma, b.G, b.vgrad)
                           * b.grad_norm**2).tolist())

    def integrands(x):
        t = _terms(u, x, k)
        grad2 = t.grad_norm**2 - (t.u**2 if t.hyper else 0.0)
        return {"u": t.u * t.weight, "s": t.sig[:, k - 1] * grad2 * t.weight}

    I = weighted_sums(mesh.volume_points, mesh.volume_weights, integrands)
    rhs = -k * comb(n, k) * I["u"] + 0.5 * (n - k + 1) * I["s"]
    tol = default_tolerance(n) if tol is None else tol
    name = f"pohozaev-{space.value}"
    return make_report(name, lhs, rhs, tol, _params(sol, k, mesh), preconditions=pre,
                       extras={"int_u_weight": I["u"], "int_sigma_grad": I["s"]})


def pohozaev_euclidean(sol, k: int, mesh: QuadMesh, tol: float | None = None) -> IdentityReport:
    """``1/2 int_bdry G(x, gamma)|Du|^2 = -k C(n,k) int u + (n-k+1)/2 int sigma_{k-1} |Du|^2``."""
    return _pohozaev(sol, k, mesh, Space.EUCLIDEAN, tol)


def pohozaev_hyperbolic(sol, k: int, mesh: QuadMesh, tol: float | None = None) -> IdentityReport:
    """The V-weighted identity in H^n, with the extra ``-u^2`` term in the sigma_{k-1} integral."""
    return _pohozaev(sol, k, mesh, Space.HYPERBOLIC, tol)


# ------------------------------------------------------ boundary lemmas


def boundary_reduction(sol, k: int, mesh: QuadMesh, c0: float | None = None,
                       tol: float | None = None) -> IdentityReport:
    """Pointwise ``G(DV, gamma) |Du|^2 = G(Du, Du) V_gamma`` on the boundary.

    Reports the largest normalised pointwise difference, with ``lhs``/``rhs``
    taken at that node.
    """
    u = _field(sol)
    _check_mesh(u, mesh)
    c0 = _c0(sol, c0)
    b = _boundary_terms(u, mesh, k)
    pre = {"boundary_zero": (float(np.max(np.abs(b.u))), BOUNDARY_ZERO_TOL)}
    if c0 is None:
        raise ValueError("the Neumann datum c0 is required")
    pre["neumann"] = (float(np.max(np.abs(b.grad_norm - c0))), NEUMANN_TOL)
    lhs = _quad(b.gamma, b.G, b.vgrad) * b.grad_norm**2
    rhs = _quad(b.du, b.G, b.du) * b.v_gamma
    res = np.abs(lhs - rhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
    i = int(np.argmax(res))
    tol = default_tolerance(u.dim) if tol is None else tol
    return make_report(f"boundary-reduction-{u.space.value}", lhs[i], rhs[i], tol,
                       _params(sol, k, mesh), residual=res[i], preconditions=pre,
                       extras={"worst_node": mesh.boundary_points[i].tolist()})


def boundary_to_volume(sol, k: int, mesh: QuadMesh, c0: float | None = None,
                       tol: float | None = None) -> IdentityReport:
    """``int_bdry G(Du, Du) V_gamma = (n-k+1) c0^2 int sigma_{k-1}(W) w``.

    For ``k >= 2`` the Minkowski-reduced boundary integral
    ``(n-k+1)/(k-1) int_bdry H_{k-2} |Du|^{k+1} w`` (level-set curvature of u)
    is computed as well and must agree with both sides.
    """
    u = _field(sol)
    _check_mesh(u, mesh)
    c0 = _c0(sol, c0)
    if c0 is None:
        raise ValueError("the Neumann datum c0 is required")
    n = u.dim
    pre = _solution_preconditions(u, mesh, k, c0, neumann=True)
    b = _boundary_terms(u, mesh, k)
    wb = mesh.boundary_weights
    lhs = math.fsum((wb * _quad(b.du, b.G, b.du) * b.v_gamma).tolist())
    def integrands(x):
        t = _terms(u, x, k)
        return {"s": t.sig[:, k - 1] * t.weight}

    I = weighted_sums(mesh.volume_points, mesh.volume_weights, integrands)
    rhs = (n - k + 1) * c0**2 * I["s"]
    tol = default_tolerance(n) if tol is None else tol
    checks, extras = {}, {"path": "direct" if k == 1 else "minkowski"}
    if k >= 2:
        Hk2 = level_set_curvature(u, mesh.boundary_points, k - 1)
        mid = (n - k + 1) / (k - 1) * math.fsum(
            (wb * Hk2 * b.grad_norm ** (k + 1) * b.weight).tolist())
        extras["minkowski_reduced"] = mid
        checks["minkowski_residual"] = (relative_residual(lhs, mid), tol)
    return make_report(f"boundary-to-volume-{u.space.value}", lhs, rhs, tol,
                       _params(sol, k, mesh), checks=checks, preconditions=pre, extras=extras)


# -------------------------------------------------------- equality case


def _p_values(t) -> np.ndarray:
    return t.grad_norm**2 - 2.0 * t.u - (t.u**2 if t.hyper else 0.0)


def equality_chain(sol, k: int, mesh: QuadMesh, c0: float | None = None,
                   tol: float | None = None) -> IdentityReport:
    """The closing argument of the symmetry proof, evaluated on a solution.

    * ``lhs = k C(n,k) int u w`` and ``rhs = (n-k+1) int sigma_{k-1}(W) u w``
      (the integral inequality ``lhs <= rhs``, with equality for balls);
    * ``assembled_residual``: ``lhs`` against
      ``(n-k+1)/2 int sigma_{k-1}(W) (|Du|^2 - [u^2] - c0^2) w``, an identity
      for every solution;
    * ``p_excess = max(P - c0^2)`` must be <= tol (maximum principle) and
      ``p_spread = max |P - c0^2|`` records the equality case;
    * ``sigma_prev_deviation = max |sigma_{k-1}(W) - C(n,k-1)|``.
    """
    u = _field(sol)
    _check_mesh(u, mesh)
    c0 = _c0(sol, c0)
    if c0 is None:
        raise ValueError("the Neumann datum c0 is required")
    n = u.dim
    pre = _solution_preconditions(u, mesh, k, c0, neumann=True)
    stats = {"p_max": -np.inf, "p_min": np.inf, "sig_dev": 0.0}

    def integrands(x):
        t = _terms(u, x, k)
        P = _p_values(t)
        stats["p_max"] = max(stats["p_max"], float(np.max(P)))
        stats["p_min"] = min(stats["p_min"], float(np.min(P)))
        stats["sig_dev"] = max(stats["sig_dev"],
                               float(np.max(np.abs(t.sig[:, k - 1] - comb(n, k - 1)))))
        s = t.sig[:, k - 1]
        grad2 = t.grad_norm**2 - (t.u**2 if t.hyper else 0.0)
        return {"u": t.u * t.weight, "su": s * t.u * t.weight,
                "assembled": s * (grad2 - c0**2) * t.weight}

    I = weighted_sums(mesh.volume_points, mesh.volume_weights, integrands)
    lhs = k * comb(n, k) * I["u"]
    rhs = (n - k + 1) * I["su"]
    assembled = 0.5 * (n - k + 1) * I["assembled"]
    tol = default_tolerance(n) if tol is None else tol
    checks = {
        "assembled_residual": (relative_residual(lhs, assembled), tol),
        "p_excess": (max(stats["p_max"] - c0**2, 0.0), tol),
        "p_spread": (max(stats["p_max"] - c0**2, c0**2 - stats["p_min"]), tol),
        "sigma_prev_deviation": (stats["sig_dev"], EQUATION_TOL),
        "inequality_gap": (max(lhs - rhs, 0.0), tol * (1 + abs(lhs) + abs(rhs))),
    }
    return make_report(f"equality-chain-{u.space.value}", lhs, rhs, tol, _params(sol, k, mesh),
                       checks=checks, preconditions=pre)


# ------------------------------------------------------- calculus steps


def _third(u: ScalarField, x: np.ndarray, h: float) -> np.ndarray:
    return tensor_covariant_derivative(lambda y: covariant_jet(u, y).hess, x, u.space, h)


def calculus_steps(u: ScalarField, k: int, mesh: QuadMesh, tol: float | None = None,
                   step: float = THIRD_ORDER_STEP) -> list[IdentityReport]:
    """Integration-by-parts steps that hold for every smooth ``u``.

    Integrated steps compare ``int lhs_expr`` with ``int_bdry flux.gamma +
    int remainder``:

    * ``calculus-gradient-flux``: ``G(D|Du|^2, DV)`` against the flux
      ``|Du|^2 G DV`` and ``-(n-k+1) sigma_{k-1} |Du|^2 w``;
    * ``calculus-square-flux``: the same with ``u^2`` in place of ``|Du|^2``;
    * ``calculus-multiplier``: ``u w tr(G D^2u)`` against the flux
      ``u G D^2u DV`` and the third-order remainder
      ``-G_ij u_{ilj} u V_l - G_ij u_{il} u_j V_l``;
    * ``calculus-divergence``: ``k sigma_k(W) w`` against the flux
      ``G Du w`` (minus ``u G DV`` in H^n).

    Pointwise steps report the largest normalised deviation over volume nodes:

    * ``calculus-index-exchange``: ``G(Du, D^2u DV) = G(D^2u Du, DV)``;
    * ``calculus-ricci``: ``u_{ilj} - u_{ijl} = -u_l delta_ij + u_j delta_il``
      (the right side vanishes in R^n);
    * ``calculus-divergence-free``: ``|div G|``.
    """
    _check_mesh(u, mesh)
    n = u.dim
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k = {k}")
    hyper = u.space is Space.HYPERBOLIC
    params = _params(u, k, mesh)
    tol_int = default_tolerance(n) if tol is None else tol
    tol_third = TOL_THIRD_ORDER if tol is None else tol
    reports = []

    b = _boundary_terms(u, mesh, k)
    wb = mesh.boundary_weights
    Gg = np.einsum("...ij,...j->...i", b.G, b.gamma)
    flux = {
        "gradient": math.fsum((wb * b.grad_norm**2 * _dot(Gg, b.vgrad)).tolist()),
        "square": math.fsum((wb * b.u**2 * _dot(Gg, b.vgrad)).tolist()),
        "multiplier": math.fsum((wb * b.u * _quad(b.gamma, b.G @ b.hess, b.vgrad)).tolist()),
        "divergence": math.fsum((wb * (_dot(Gg, b.du) * b.weight
                                       - (b.u * _dot(Gg, b.vgrad) if hyper else 0.0))).tolist()),
    }
    worst = {"exchange": 0.0, "ricci": 0.0, "divfree": 0.0}

    def integrands(x):
        t = _terms(u, x, k)
        HDu = np.einsum("...ij,...j->...i", t.hess, t.du)
        HV = np.einsum("...ij,...j->...i", t.hess, t.vgrad)
        U3 = _third(u, x, step)  # (..., i, l, j) = u_{ilj}
        third = np.einsum("...ij,...ilj,...l->...", t.G, U3, t.vgrad)
        ex_l = _quad(t.du, t.G, HV)
        ex_r = _quad(HDu, t.G, t.vgrad)
        worst["exchange"] = max(worst["exchange"], float(np.max(
            np.abs(ex_l - ex_r) / (1 + np.abs(ex_l) + np.abs(ex_r)))))
        eye = np.eye(n)
        comm = U3 - np.swapaxes(U3, -1, -2)
        if hyper:
            comm = comm + np.einsum("...l,ij->...ilj", t.du, eye) - np.einsum("...j,il->...ilj", t.du, eye)
        worst["ricci"] = max(worst["ricci"], float(np.max(np.abs(comm))))
        div = divergence_free_residual(u, x, k, h=step)
        worst["divfree"] = max(worst["divfree"], float(np.max(np.abs(div))))
        trGH = np.sum(t.G * t.hess, axis=(-2, -1))
        return {
            "grad_lhs": 2.0 * _quad(HDu, t.G, t.vgrad),
            "grad_rem": t.sig[:, k - 1] * t.grad_norm**2 * t.weight,
            "sq_lhs": 2.0 * t.u * _quad(t.du, t.G, t.vgrad),
            "sq_rem": t.sig[:, k - 1] * t.u**2 * t.weight,
            "mult_lhs": t.u * t.weight * trGH,
            "mult_rem": -t.u * third - _quad(t.du, t.G, HV),
            "div_lhs": k * t.sig[:, k] * t.weight,
        }

    I = weighted_sums(mesh.volume_points, mesh.volume_weights, integrands)
    c = n - k + 1
    steps = [
        ("calculus-gradient-flux", I["grad_lhs"], flux["gradient"] - c * I["grad_rem"], tol_int),
        ("calculus-square-flux", I["sq_lhs"], flux["square"] - c * I["sq_rem"], tol_int),
        ("calculus-multiplier", I["mult_lhs"], flux["multiplier"] + I["mult_rem"], tol_third),
        ("calculus-divergence", I["div_lhs"], flux["divergence"], tol_int),
    ]
    for name, lhs, rhs, tl in steps:
        reports.append(make_report(name, lhs, rhs, tl, params))
    for name, key, tl in [("calculus-index-exchange", "exchange", tol_int),
                          ("calculus-ricci", "ricci", tol_third),
                          ("calculus-divergence-free", "divfree", tol_third)]:
        reports.append(make_report(name, worst[key], 0.0, tl, params, residual=worst[key]))
    return reports


# ------------------------------------------------------ smooth test fields


def basis_fields(space, n: int) -> list[ScalarField]:
    """Fixed smooth basis for randomised non-solution fields.

    Chart monomials of degree 1..3 plus two plane waves.
    """
    space = Space.parse(space)
    out = []
    for deg in (1, 2, 3):
        for alpha in _exponents(n, deg):
            out.append(monomial_field(space, alpha))
    out.append(plane_wave_field(space, np.linspace(1.0, 0.5, n)))
    out.append(plane_wave_field(space, np.linspace(-0.7, 1.3, n)))
    return out


def _exponents(n: int, deg: int):
    if n == 1:
        yield (deg,)
        return
    for a in range(deg, -1, -1):
        for rest in _exponents(n - 1, deg - a):
            yield (a,) + rest


def random_smooth_field(rng: np.random.Generator, space, n: int,
                        amplitude: float = 0.1) -> ScalarField:
    """``V + sum c_i b_i`` with ``c_i`` uniform in ``[-amplitude, amplitude]``."""
    space = Space.parse(space)
    u = v_field(space, n)
    for b in basis_fields(space, n):
        u = u + float(rng.uniform(-amplitude, amplitude)) * b
    return ScalarField(n, space, u.value, u.grad, u.hess, name="random-smooth")
