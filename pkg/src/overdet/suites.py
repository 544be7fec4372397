"""Verification suites run by the command-line driver.

Each suite maps its config block to a list of :class:`IdentityReport`
records. Property checks over random samples are summarised as one record
per property: ``lhs`` is the worst observed value, ``rhs`` its target and
``extras`` carries the offending sample so a failure can be reproduced.
"""

from __future__ import annotations

import math
from math import comb
from typing import Callable

import numpy as np

from . import identities as idn
from . import symfun
from .config import SUITES, DomainSpec, RunConfig, SolutionCase
from .geometry import (
    Space,
    chart_radius,
    covariant_jet,
    geodesic_radius,
    operator_matrix,
    plane_wave_field,
    sample_ball,
    tensor_covariant_derivative,
    v_field,
)
from .identities import IdentityReport, make_report
from .quadrature import Ball, Domain, build_mesh
from .radial import exact_solution, p_function, shoot_radial

THIRD_ORDER_STEP = 1e-3


def suite_rng(seed: int, suite: str, *extra: int) -> np.random.Generator:
    """Independent, reproducible stream per suite (and optional sub-index)."""
    return np.random.default_rng([seed, SUITES.index(suite), *extra])


def _worst(name: str, values, samples, tol: float, params: dict, target: float = 0.0,
           what: str = "sample") -> IdentityReport:
    """Summarise per-sample residuals by their maximum."""
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    extras = {"samples": int(values.size), f"worst_{what}": _plain(samples[i])}
    return make_report(name, values[i], target, tol, params, residual=values[i], extras=extras)


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_plain(o) for o in obj]
    return obj


# ------------------------------------------------------------------ symfun


def _fd_direction(A: np.ndarray, E: np.ndarray, k: int, h: float = 1e-4) -> float:
    """Richardson-extrapolated derivative of sigma_k along the symmetric direction E."""
    def d(step):
        return (symfun.sigma_k(A + step * E, k) - symfun.sigma_k(A - step * E, k)) / (2 * step)
    return (4.0 * d(h / 2) - d(h)) / 3.0


def run_symfun(cfg: RunConfig) -> list[IdentityReport]:
    sc = cfg.symfun
    rng = suite_rng(cfg.seed, "symfun")
    res = {key: [] for key in ("oracle", "gradient", "pairing", "trace", "square")}
    where = []
    for _ in range(sc.samples):
        n = int(rng.integers(1, sc.max_dim + 1))
        A = symfun.random_symmetric(rng, n, scale=float(rng.uniform(0.2, 2.0)))
        norm = symfun.spectral_norm(A)
        E = symfun.random_symmetric(rng, n)
        E /= max(symfun.spectral_norm(E), 1e-300)
        for k in range(1, n + 1):
            where.append({"n": n, "k": k, "matrix": A.tolist()})
            scale = 1.0 + comb(n, k) * norm**k
            res["oracle"].append(abs(symfun.sigma_k(A, k) - symfun.principal_minor_sum(A, k)) / scale)
            G = symfun.sigma_gradient(A, k)
            exact = float(np.sum(G * E))
            res["gradient"].append(abs(_fd_direction(A, E, k) - exact) / (1.0 + abs(exact)))
            t = symfun.trace_identities(A, k)
            res["pairing"].append(t.pairing / (1.0 + norm**k))
            res["trace"].append(t.trace / (1.0 + norm ** (k - 1)))
            res["square"].append(t.square / (1.0 + norm ** (k + 1)))
    params = {"samples": sc.samples, "max_dim": sc.max_dim, "seed": cfg.seed}
    out = [
        _worst("symfun-minor-oracle", res["oracle"], where, sc.oracle_tol, params, what="matrix"),
        _worst("symfun-gradient-fd", res["gradient"], where, sc.gradient_tol, params, what="matrix"),
        _worst("symfun-trace-pairing", res["pairing"], where, sc.trace_tol, params, what="matrix"),
        _worst("symfun-trace-diagonal", res["trace"], where, sc.trace_tol, params, what="matrix"),
        _worst("symfun-trace-square", res["square"], where, sc.trace_tol, params, what="matrix"),
    ]

    # Classical inequalities: negative slack is a violation.
    viol = {"newton": [], "maclaurin": [], "quotient": []}
    samples, equal = [], []
    for _ in range(sc.samples):
        n = int(rng.integers(2, sc.max_dim + 1))
        k = int(rng.integers(1, n + 1))
        A = symfun.random_cone_matrix(rng, n, k)
        s = symfun.classical_inequalities(A, k)
        viol["newton"].append(max(-s.newton, 0.0) / symfun.scaled_tolerance(A, 1.0, 2 * k))
        viol["maclaurin"].append(max(-s.maclaurin, 0.0) / symfun.scaled_tolerance(A, 1.0, 1))
        viol["quotient"].append(max(-s.quotient, 0.0) / symfun.scaled_tolerance(A, 1.0, 1))
        samples.append({"n": n, "k": k, "matrix": A.tolist()})
        c = float(rng.uniform(0.1, 3.0))
        B = symfun.with_eigenvalues(rng, np.full(n, c))
        e = symfun.classical_inequalities(B, k)
        equal.append(max(abs(e.newton) / symfun.scaled_tolerance(B, 1.0, 2 * k),
                         abs(e.maclaurin) / (1 + c), abs(e.quotient) / (1 + c)))
    for key in viol:
        out.append(_worst(f"symfun-{key}-inequality", viol[key], samples, sc.slack_tol, params,
                          what="matrix"))
    eq_samples = [{"n": s["n"], "k": s["k"]} for s in samples]
    out.append(_worst("symfun-equality-case", equal, eq_samples, sc.slack_tol, params))
    return out


# ---------------------------------------------------------------- geometry


def run_geometry(cfg: RunConfig) -> list[IdentityReport]:
    gc = cfg.geometry
    out = []
    for n in gc.dims:
        for space in (Space.EUCLIDEAN, Space.HYPERBOLIC):
            rng = suite_rng(cfg.seed, "geometry", n, space is Space.HYPERBOLIC)
            x = sample_ball(rng, gc.points, n, 0.9 if space is Space.HYPERBOLIC else 2.0)
            params = {"space": space.value, "n": n, "points": gc.points, "seed": cfg.seed}
            V = v_field(space, n)
            jet = covariant_jet(V, x)
            w = jet.value if space is Space.HYPERBOLIC else np.ones(len(x))
            dev = np.max(np.abs(jet.hess - w[:, None, None] * np.eye(n)), axis=(1, 2)) / (1 + np.abs(w))
            out.append(_worst(f"geometry-static-potential-{space.value}", dev, x, gc.tolerance,
                              params, what="point"))
            if space is Space.HYPERBOLIC:
                cosh = np.abs(jet.value - np.cosh(geodesic_radius(x, space))) / (1 + jet.value)
                out.append(_worst("geometry-potential-cosh", cosh, x, gc.tolerance, params,
                                  what="point"))
            u = V + 0.3 * plane_wave_field(space, np.linspace(1.0, -0.5, n))
            fd = covariant_jet(u.finite_difference(), x)
            ex = covariant_jet(u, x)
            dev = np.max(np.abs(fd.hess - ex.hess), axis=(1, 2)) / (1 + np.max(np.abs(ex.hess), axis=(1, 2)))
            out.append(_worst(f"geometry-hessian-fd-{space.value}", dev, x, gc.fd_tolerance,
                              params, what="point"))
            # Ricci identity for the third covariant derivatives
            x3 = x[: min(len(x), 50)]
            U3 = tensor_covariant_derivative(lambda y: covariant_jet(u, y).hess, x3, space,
                                             THIRD_ORDER_STEP)
            comm = U3 - np.swapaxes(U3, -1, -2)
            if space is Space.HYPERBOLIC:
                du, eye = covariant_jet(u, x3).grad, np.eye(n)
                comm = comm + np.einsum("pl,ij->pilj", du, eye) - np.einsum("pj,il->pilj", du, eye)
            dev = np.max(np.abs(comm), axis=(1, 2, 3))
            out.append(_worst(f"geometry-ricci-{space.value}", dev, x3, idn.TOL_THIRD_ORDER,
                              params, what="point"))
    return out


# ------------------------------------------------------------------ radial


def _solution(case: SolutionCase):
    return exact_solution(case.space, case.n, case.k, case.neumann)


def _interior_points(rng, sol, m: int) -> np.ndarray:
    s = float(chart_radius(sol.R, sol.space))
    return sample_ball(rng, m, sol.n, 0.98 * s)


def run_radial(cfg: RunConfig) -> list[IdentityReport]:
    rc = cfg.radial
    out = []
    for i, case in enumerate(rc.cases):
        sol = _solution(case)
        rng = suite_rng(cfg.seed, "radial", i)
        x = _interior_points(rng, sol, rc.points)
        W = operator_matrix(sol.field(), x)
        dev = np.max(np.abs(W - np.eye(sol.n)), axis=(1, 2))
        params = case.label() | {"R": sol.R}
        out.append(_worst("radial-exact-operator", dev, x, rc.tolerance, params, what="point"))
        R = np.array([sol.R])
        data = {
            "u(R)": abs(float(sol.u(R)[0])),
            "u'(R)-c0": abs(float(sol.du(R)[0]) - sol.c0),
        }
        if sol.space is Space.HYPERBOLIC:
            data["tanh(R)-c0"] = abs(math.tanh(sol.R) - sol.c0)
        worst = max(data.values())
        out.append(make_report("radial-boundary-data", worst, 0.0, rc.boundary_tol, params,
                               residual=worst, extras=data))
    for case in rc.shooting:
        for space in (Space.EUCLIDEAN, Space.HYPERBOLIC):
            R = rc.shooting_radius
            c0 = math.tanh(R) if space is Space.HYPERBOLIC else R
            shot = shoot_radial(case.n, case.k, space, R)
            exact = exact_solution(space, case.n, case.k, c0)
            r = np.linspace(0.0, R, 2001)
            du = float(np.max(np.abs(shot.u(r) - exact.u(r))))
            ddu = float(np.max(np.abs(shot.du(r) - exact.du(r))))
            params = {"space": space.value, "n": case.n, "k": case.k, "R": R}
            out.append(make_report("radial-shooting", max(du, ddu), 0.0, rc.tolerance, params,
                                   residual=max(du, ddu),
                                   extras={"sup_u": du, "sup_du": ddu, "c0_shot": shot.c0}))
    return out


# --------------------------------------------------------------- identities


def _mesh_for(case: SolutionCase, sol):
    return build_mesh(Domain(case.n, case.space, Ball(sol.R)), case.resolution)


def _ks(spec: DomainSpec) -> tuple[int, ...]:
    return spec.k or tuple(range(1, spec.dim))


def run_minkowski(cfg: RunConfig) -> list[IdentityReport]:
    mc = cfg.minkowski
    out = []
    for spec in mc.domains:
        mesh = build_mesh(spec.build(), spec.resolution)
        check = idn.minkowski_hyperbolic if spec.space is Space.HYPERBOLIC else idn.minkowski_euclidean
        for k in _ks(spec):
            out.append(check(mesh, k, mc.tolerance))
    return out


def run_pohozaev(cfg: RunConfig) -> list[IdentityReport]:
    pc = cfg.pohozaev
    out = []
    for case in pc.cases:
        sol = _solution(case)
        mesh = _mesh_for(case, sol)
        check = idn.pohozaev_hyperbolic if case.space is Space.HYPERBOLIC else idn.pohozaev_euclidean
        out.append(check(sol, case.k, mesh, pc.tolerance))
    if pc.negative_control and pc.cases:
        case = pc.cases[0]
        sol = _solution(case)
        check = idn.pohozaev_hyperbolic if case.space is Space.HYPERBOLIC else idn.pohozaev_euclidean
        inner = check(1.05 * sol.field(), case.k, _mesh_for(case, sol), pc.tolerance)
        detected = inner.status == idn.PRECONDITION
        out.append(make_report(
            "pohozaev-negative-control", inner.lhs, inner.rhs, 0.0,
            case.label() | {"scale": 1.05}, residual=0.0 if detected else 1.0,
            extras={"inner_status": inner.status, **inner.extras},
        ))
    return out


def run_boundary(cfg: RunConfig) -> list[IdentityReport]:
    bc = cfg.boundary
    out = []
    for case in bc.cases:
        sol = _solution(case)
        mesh = _mesh_for(case, sol)
        out.append(idn.boundary_reduction(sol, case.k, mesh, tol=bc.tolerance))
        out.append(idn.boundary_to_volume(sol, case.k, mesh, tol=bc.tolerance))
    return out


def run_pfunction(cfg: RunConfig) -> list[IdentityReport]:
    fc = cfg.pfunction
    out = []
    for i, case in enumerate(fc.cases):
        sol = _solution(case)
        rng = suite_rng(cfg.seed, "pfunction", i)
        x = _interior_points(rng, sol, fc.points)
        sample = p_function(sol, x)
        params = case.label() | {"R": sol.R, "points": fc.points}
        target = sol.c0**2
        out.append(_worst("pfunction-constancy", np.abs(sample.p_value - target), x,
                          fc.spread_tol, params, target=target, what="point"))
        out.append(_worst("pfunction-subsolution", np.abs(sample.hess_trace_pairing), x,
                          fc.pairing_tol, params, what="point"))
        out.append(idn.equality_chain(sol, case.k, _mesh_for(case, sol), tol=fc.tolerance))
    return out


def run_calculus(cfg: RunConfig) -> list[IdentityReport]:
    cc = cfg.calculus
    out = []
    for i in range(cc.fields):
        spec = cc.domains[i % len(cc.domains)]
        k = 1 + (i // len(cc.domains)) % spec.dim
        rng = suite_rng(cfg.seed, "calculus", i)
        u = idn.random_smooth_field(rng, spec.space, spec.dim, cc.amplitude)
        mesh = build_mesh(spec.build(), spec.resolution)
        for rep in idn.calculus_steps(u, k, mesh, tol=cc.tolerance):
            params = rep.params | {"field_index": i, "seed": cfg.seed, "amplitude": cc.amplitude}
            out.append(IdentityReport(rep.name, rep.lhs, rep.rhs, rep.residual, rep.tolerance,
                                      rep.status, params, rep.extras))
    return out


RUNNERS: dict[str, Callable[[RunConfig], list[IdentityReport]]] = {
    "symfun": run_symfun,
    "geometry": run_geometry,
    "radial": run_radial,
    "minkowski": run_minkowski,
    "pohozaev": run_pohozaev,
    "boundary": run_boundary,
    "pfunction": run_pfunction,
    "calculus": run_calculus,
}
