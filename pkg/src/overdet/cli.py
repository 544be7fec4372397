"""Command-line driver: ``overdet verify`` and ``overdet explain``.

Exit status of ``verify``:

* 0 -- every record passed;
* 1 -- at least one record failed (including failed preconditions);
* 2 -- the configuration could not be read or validated;
* 3 -- a suite raised while evaluating.

Reports are written as JSON (default) or CSV. Floats carry 17 significant
digits and records keep suite order, so identical config and seed give
byte-identical files. Wall-clock time is only included with ``--timing``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import SUITES, ConfigError, RunConfig, config_echo, load_config
from .identities import PRECONDITION, TOL_2D, TOL_3D, TOL_THIRD_ORDER
from .suites import RUNNERS

OUTPUT_ENV = "OVERDET_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "reports"

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


# ---------------------------------------------------------------- explain

_SOLUTION_PRE = ("u = 0 on the boundary (sup <= 1e-9); "
                 "sigma_k(W) = C(n,k) at every volume node (relative 1e-8)")
_NEUMANN_PRE = _SOLUTION_PRE + "; |Du| = c0 on the boundary (1e-8)"
_MESH_TOL = f"{TOL_2D:g} (dimension 2), {TOL_3D:g} (dimension 3)"

EXPLANATIONS: dict[str, dict[str, str]] = {
    "minkowski-euclidean": {
        "statement": "int_bdry H_k / C(n-1,k) <x, gamma> = int_bdry H_{k-1} / C(n-1,k-1), 1 <= k <= n-1",
        "anchor": "Minkowski integral formula for closed hypersurfaces of R^n, position-vector weight",
        "preconditions": "Euclidean star-shaped domain; principal curvatures from the boundary mesh",
        "tolerance": _MESH_TOL,
    },
    "minkowski-hyperbolic": {
        "statement": "int_bdry H_k / C(n-1,k) V_gamma = int_bdry H_{k-1} / C(n-1,k-1) V, V = cosh r",
        "anchor": "Minkowski integral formula in H^n weighted by the static potential cosh r",
        "preconditions": "hyperbolic star-shaped domain in the Poincare ball",
        "tolerance": _MESH_TOL,
    },
    "pohozaev-euclidean": {
        "statement": "1/2 int_bdry sigma_k^{ij}(D^2u) x_j gamma_i |Du|^2 = "
                     "-k C(n,k) int u + (n-k+1)/2 int sigma_{k-1}(D^2u) |Du|^2",
        "anchor": "Rellich-Pohozaev identity for sigma_k(D^2u) = C(n,k) with u = 0 on the boundary",
        "preconditions": _SOLUTION_PRE,
        "tolerance": _MESH_TOL,
    },
    "pohozaev-hyperbolic": {
        "statement": "1/2 int_bdry sigma_k^{ij}(W) V_i gamma_j |Du|^2 = -k C(n,k) int u V "
                     "+ (n-k+1)/2 int sigma_{k-1}(W) (|Du|^2 - u^2) V, W = D^2u - u g",
        "anchor": "Rellich-Pohozaev identity in H^n with multiplier V = cosh r",
        "preconditions": _SOLUTION_PRE,
        "tolerance": _MESH_TOL,
    },
    "pohozaev-negative-control": {
        "statement": "the Pohozaev check on 1.05 * (exact solution) must stop at its preconditions",
        "anchor": "guard that identities are never reported as verified on invalid input",
        "preconditions": "none",
        "tolerance": "exact (status must be precondition-failed)",
    },
    "boundary-reduction-euclidean": {
        "statement": "sigma_k^{ij} x_j gamma_i |Du|^2 = sigma_k^{ij} u_i u_j <x, gamma> pointwise on the boundary",
        "anchor": "boundary term reduction using Du = c0 gamma",
        "preconditions": "u = 0 and |Du| = c0 on the boundary",
        "tolerance": _MESH_TOL + " (max over boundary nodes)",
    },
    "boundary-reduction-hyperbolic": {
        "statement": "sigma_k^{ij} V_j gamma_i |Du|^2 = sigma_k^{ij} u_i u_j V_gamma pointwise on the boundary",
        "anchor": "hyperbolic boundary term reduction, V replacing the position vector",
        "preconditions": "u = 0 and |Du| = c0 on the boundary",
        "tolerance": _MESH_TOL + " (max over boundary nodes)",
    },
    "boundary-to-volume-euclidean": {
        "statement": "int_bdry sigma_k^{ij} u_i u_j <x, gamma> = (n-k+1) c0^2 int sigma_{k-1}(D^2u)",
        "anchor": "boundary-to-volume conversion; for k >= 2 through the Minkowski formula for the "
                  "level sets of u, for k = 1 directly",
        "preconditions": _NEUMANN_PRE,
        "tolerance": _MESH_TOL,
    },
    "boundary-to-volume-hyperbolic": {
        "statement": "int_bdry sigma_k^{ij} u_i u_j V_gamma = (n-k+1) c0^2 int sigma_{k-1}(W) V",
        "anchor": "hyperbolic boundary-to-volume conversion (Minkowski route for k >= 2)",
        "preconditions": _NEUMANN_PRE,
        "tolerance": _MESH_TOL,
    },
    "equality-chain-euclidean": {
        "statement": "P = |Du|^2 - 2u <= c0^2; k C(n,k) int u <= (n-k+1) int sigma_{k-1}(D^2u) u "
                     "with equality; sigma_{k-1}(D^2u) = C(n,k-1) pointwise",
        "anchor": "closing step of the symmetry argument (equality case of the integral inequality)",
        "preconditions": _NEUMANN_PRE,
        "tolerance": _MESH_TOL + "; pointwise sigma_{k-1} deviation 1e-8",
    },
    "equality-chain-hyperbolic": {
        "statement": "P = |Du|^2 - u^2 - 2u <= c0^2; k C(n,k) int u V <= (n-k+1) int sigma_{k-1}(W) u V "
                     "with equality; sigma_{k-1}(W) = C(n,k-1) pointwise",
        "anchor": "closing step of the hyperbolic symmetry argument",
        "preconditions": _NEUMANN_PRE,
        "tolerance": _MESH_TOL + "; pointwise sigma_{k-1} deviation 1e-8",
    },
    "calculus-gradient-flux": {
        "statement": "int sigma_k^{ij}(|Du|^2)_i V_j = int_bdry |Du|^2 sigma_k^{ij} V_j gamma_i "
                     "- (n-k+1) int sigma_{k-1} |Du|^2 w",
        "anchor": "divergence step valid for any smooth u (divergence-free sigma_k^{ij}, D^2V = w g)",
        "preconditions": "u smooth on the closed domain",
        "tolerance": _MESH_TOL,
    },
    "calculus-square-flux": {
        "statement": "as calculus-gradient-flux with u^2 in place of |Du|^2",
        "anchor": "the u^2 term of the hyperbolic Pohozaev computation",
        "preconditions": "u smooth on the closed domain",
        "tolerance": _MESH_TOL,
    },
    "calculus-multiplier": {
        "statement": "int u w sigma_k^{ij} u_ij = int_bdry u sigma_k^{ij} u_il V_l gamma_j "
                     "- int sigma_k^{ij} u_ilj u V_l - int sigma_k^{ij} u_il u_j V_l",
        "anchor": "multiplier step with third covariant derivatives",
        "preconditions": "u smooth on the closed domain",
        "tolerance": f"{TOL_THIRD_ORDER:g} (third-order finite differences)",
    },
    "calculus-divergence": {
        "statement": "int k sigma_k(W) w = int_bdry (w sigma_k^{ij} u_i - [H^n] u sigma_k^{ij} V_i) gamma_j",
        "anchor": "divergence form of sigma_k",
        "preconditions": "u smooth on the closed domain",
        "tolerance": _MESH_TOL,
    },
    "calculus-index-exchange": {
        "statement": "sigma_k^{ij} u_i u_jl V_l = sigma_k^{ij} u_il u_l V_j pointwise",
        "anchor": "sigma_k^{ij}(W) commutes with W, hence with D^2u",
        "preconditions": "u smooth",
        "tolerance": _MESH_TOL,
    },
    "calculus-ricci": {
        "statement": "u_ilj - u_ijl = -u_l delta_ij + u_j delta_il in H^n (zero in R^n)",
        "anchor": "Ricci commutation for constant curvature -1",
        "preconditions": "u smooth",
        "tolerance": f"{TOL_THIRD_ORDER:g} (third-order finite differences)",
    },
    "calculus-divergence-free": {
        "statement": "sum_i (sigma_k^{ij}(W))_i = 0, W = D^2u - [H^n] u g",
        "anchor": "divergence-free property of the linearised k-Hessian operator",
        "preconditions": "u smooth",
        "tolerance": f"{TOL_THIRD_ORDER:g} (third-order finite differences)",
    },
}


def _property(statement: str, anchor: str, tolerance: str, preconditions: str = "none") -> dict:
    return {"statement": statement, "anchor": anchor, "preconditions": preconditions,
            "tolerance": tolerance}


_SAMPLED = "random symmetric matrices, n <= max_dim"
EXPLANATIONS.update({
    "symfun-minor-oracle": _property(
        "sigma_k from eigenvalues equals the sum of k x k principal minors",
        "definition of sigma_k", "1e-10 relative to 1 + C(n,k) ||A||^k", _SAMPLED),
    "symfun-gradient-fd": _property(
        "sum_ij sigma_k^{ij} E_ij equals the finite-difference derivative of sigma_k along E",
        "recursion sigma_k^{ij} = sigma_{k-1} delta_ij - sigma_{k-1}^{il} a_jl", "1e-6 relative", _SAMPLED),
    "symfun-trace-pairing": _property(
        "sigma_k^{ij} a_ij = k sigma_k", "Euler relation for the degree-k polynomial sigma_k",
        "1e-9 relative to 1 + ||A||^k", _SAMPLED),
    "symfun-trace-diagonal": _property(
        "sum_i sigma_k^{ii} = (n-k+1) sigma_{k-1}", "trace of the derivative matrix",
        "1e-9 relative to 1 + ||A||^(k-1)", _SAMPLED),
    "symfun-trace-square": _property(
        "sigma_k^{ij} (A^2)_ij = sigma_1 sigma_k - (k+1) sigma_{k+1}", "contraction with A^2",
        "1e-9 relative to 1 + ||A||^(k+1)", _SAMPLED),
    "symfun-newton-inequality": _property(
        "k(n-k) sigma_k^2 >= (n-k+1)(k+1) sigma_{k-1} sigma_{k+1}", "Newton inequality",
        "violation <= 1e-9 (scaled)", "matrices in the Garding cone Gamma_k"),
    "symfun-maclaurin-inequality": _property(
        "(sigma_l / C(n,l))^(1/l) >= (sigma_k / C(n,k))^(1/k) for l < k", "MacLaurin inequality",
        "violation <= 1e-9 (scaled)", "matrices in Gamma_k"),
    "symfun-quotient-inequality": _property(
        "q_l >= q_k for l < k, q_j = (sigma_j/C(n,j)) / (sigma_{j-1}/C(n,j-1))",
        "Newton-MacLaurin quotient inequality", "violation <= 1e-9 (scaled)", "matrices in Gamma_k"),
    "symfun-equality-case": _property(
        "all three slacks vanish for multiples of the identity", "equality case of the inequalities",
        "1e-9 (scaled)", "matrices c * I in a random basis"),
    "geometry-static-potential-euclidean": _property(
        "D^2(|x|^2/2) = I", "Euclidean static potential", "1e-10"),
    "geometry-static-potential-hyperbolic": _property(
        "D^2 V = V g for V = cosh r", "static potential of H^n", "1e-10 relative to 1 + V"),
    "geometry-potential-cosh": _property(
        "(1 + |x|^2) / (1 - |x|^2) = cosh(2 artanh |x|)", "geodesic distance in the Poincare ball",
        "1e-10"),
    "geometry-hessian-fd-euclidean": _property(
        "analytic covariant Hessian equals the finite-difference one", "finite-difference cross-check",
        "1e-6 relative"),
    "geometry-hessian-fd-hyperbolic": _property(
        "analytic covariant Hessian equals the finite-difference one (Christoffel terms included)",
        "finite-difference cross-check", "1e-6 relative"),
    "geometry-ricci-euclidean": _property(
        "third covariant derivatives commute in R^n", "flat Ricci identity",
        f"{TOL_THIRD_ORDER:g}"),
    "geometry-ricci-hyperbolic": _property(
        "u_ilj - u_ijl = -u_l delta_ij + u_j delta_il", "Ricci identity, sectional curvature -1",
        f"{TOL_THIRD_ORDER:g}"),
    "radial-exact-operator": _property(
        "W = D^2u - [H^n] u g equals the identity for the exact radial solutions",
        "u = (r^2 - c0^2)/2 in R^n, u = cosh r / cosh R - 1 in H^n", "1e-8 at interior points"),
    "radial-boundary-data": _property(
        "u(R) = 0, u'(R) = c0 and, in H^n, tanh R = c0", "overdetermined boundary data", "1e-12"),
    "radial-shooting": _property(
        "shooting solution of the radial ODE matches the closed form in sup norm (u and u')",
        "radial reduction sigma_k = C(n-1,k) t^k + C(n-1,k-1) a t^(k-1)", "1e-8"),
    "pfunction-constancy": _property(
        "P = |Du|^2 - 2u (R^n) or |Du|^2 - u^2 - 2u (H^n) equals c0^2 at interior points",
        "P-function of the overdetermined problem", "spread 1e-9", "exact solutions"),
    "pfunction-subsolution": _property(
        "sigma_k^{ij}(W) P_ij = 0 for the exact solutions", "elliptic inequality for P",
        f"{TOL_THIRD_ORDER:g} (finite-difference Hessian of P)", "exact solutions"),
})


def explain(name: str) -> str:
    """Human-readable description of an identity record."""
    if name not in EXPLANATIONS:
        raise KeyError(name)
    e = EXPLANATIONS[name]
    return "\n".join([
        name,
        f"  statement:     {e['statement']}",
        f"  anchor:        {e['anchor']}",
        f"  preconditions: {e['preconditions']}",
        f"  tolerance:     {e['tolerance']}",
    ])


# --------------------------------------------------------- serialisation


def _json_scalar(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            return "null"
        text = format(x, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    return json.dumps(str(x), ensure_ascii=False)


def to_json(obj, indent: int = 2, level: int = 0) -> str:
    """Deterministic JSON with 17 significant digits; non-finite floats become ``null``."""
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if hasattr(obj, "item") and callable(obj.item) and getattr(obj, "ndim", 1) == 0:
        obj = obj.item()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(to_json(v, indent, level + 1) for v in obj) + "]"
        items = [inner + to_json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _json_scalar(obj)


CSV_COLUMNS = ("suite", "name", "lhs", "rhs", "residual", "tolerance", "pass", "status",
               "params", "extras")


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report["records"]:
        row = []
        for col in CSV_COLUMNS:
            val = rec[col]
            if isinstance(val, (dict, list)):
                row.append(to_json(val, indent=0).replace("\n", ""))
            else:
                row.append(_json_scalar(val) if not isinstance(val, str) else val)
        writer.writerow(row)
    return buf.getvalue()


# ------------------------------------------------------------------ run


class SuiteFailure(RuntimeError):
    def __init__(self, suite: str, exc: BaseException):
        self.suite = suite
        super().__init__(f"suite '{suite}' raised {type(exc).__name__}: {exc}")


def run(cfg: RunConfig, suites=None, timing: bool = False) -> dict:
    """Execute the selected suites and assemble the run report."""
    selected = tuple(suites) if suites else cfg.suites
    start = time.perf_counter()
    records = []
    for suite in selected:
        try:
            reports = RUNNERS[suite](cfg)
        except Exception as exc:  # reported with the suite name, exit status 3
            raise SuiteFailure(suite, exc) from exc
        for rep in reports:
            records.append({"suite": suite, **rep.record()})
    counts = {
        "records": len(records),
        "passed": sum(r["pass"] for r in records),
        "failed": sum(r["status"] == "fail" for r in records),
        "precondition_failed": sum(r["status"] == PRECONDITION for r in records),
    }
    report = {
        "toolkit": "overdet",
        "version": __version__,
        "seed": cfg.seed,
        "suites": list(selected),
        "config": config_echo(cfg),
        "summary": counts,
        "pass": counts["passed"] == counts["records"],
        "records": records,
    }
    if timing:
        report["wall_time_s"] = time.perf_counter() - start
    return report


def output_path(cli_out, cfg: RunConfig, fmt: str) -> Path:
    if cli_out:
        return Path(cli_out)
    if cfg.output:
        return Path(cfg.output)
    base = Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT_DIR))
    return base / f"report.{fmt}"


def write_report(report: dict, path: Path, fmt: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = to_json(report) + "\n" if fmt == "json" else to_csv(report)
    path.write_text(text)


def _summary_lines(report: dict) -> list[str]:
    s = report["summary"]
    lines = [f"{s['passed']}/{s['records']} records passed "
             f"({s['failed']} failed, {s['precondition_failed']} precondition failures)"]
    for rec in report["records"]:
        if not rec["pass"]:
            worst = {k: v for k, v in rec["extras"].items() if k.startswith("worst_")
                     or k in ("failed_preconditions",)}
            lines.append(f"FAIL [{rec['suite']}] {rec['name']} status={rec['status']} "
                         f"residual={rec['residual']:.3e} tol={rec['tolerance']:.1e} "
                         f"params={to_json(rec['params'], 0).replace(chr(10), '')}"
                         + (f" at={to_json(worst, 0).replace(chr(10), '')}" if worst else ""))
    return lines


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overdet",
        description="Numerical verification of integral identities for overdetermined "
                    "k-Hessian problems in R^n and H^n.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run verification suites and write a report")
    v.add_argument("--config", required=True, help="YAML run configuration")
    v.add_argument("--suite", action="append", choices=SUITES, default=None,
                   help="restrict to this suite (repeatable); default: the config's list")
    v.add_argument("--out", help=f"report path (default: config 'output', else ${OUTPUT_ENV}/report.<fmt>)")
    v.add_argument("--format", choices=("json", "csv"), help="report format (default: config 'format')")
    v.add_argument("--seed", type=int, help="override the config seed")
    v.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identity)")
    v.add_argument("--quiet", action="store_true", help="only print failures")
    e = sub.add_parser("explain", help="describe an identity record")
    e.add_argument("identity", help="identity name, e.g. pohozaev-hyperbolic")
    return parser


def _cmd_verify(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.model_copy(update={"seed": args.seed})
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fmt = args.format or cfg.format
    try:
        report = run(cfg, args.suite, timing=args.timing)
    except SuiteFailure as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    path = output_path(args.out, cfg, fmt)
    try:
        write_report(report, path, fmt)
    except OSError as exc:
        print(f"runtime error: cannot write report to {path}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    lines = _summary_lines(report)
    if args.quiet:
        lines = lines[1:]
    for line in lines:
        print(line)
    if not args.quiet:
        print(f"report written to {path}")
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def _cmd_explain(args) -> int:
    try:
        print(explain(args.identity))
    except KeyError:
        print(f"unknown identity '{args.identity}'. Valid names:", file=sys.stderr)
        for name in EXPLANATIONS:
            print(f"  {name}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_PASS


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _cmd_verify(args)
    return _cmd_explain(args)


if __name__ == "__main__":
    sys.exit(main())
