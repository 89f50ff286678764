"""Command-line front end: oracle curves, layer classification, region maps and benchmarks.

Exit status is 0 on success, 2 for bad input (spec, plan, flags, files) and
3 when a numerical routine fails.  Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError, SpecError
from .linearize import random_field, residual_identity_check
from .oracles import (
    classify_layer,
    exact_solution,
    has_oracle,
    oracle_p1_derivatives,
    oracle_p3_left_derivative,
    oracle_p3_right_derivative,
)
from .problem import Kind, LayerClass, ProblemSpec, ScalarParams, Status, spec_from_dict, spec_to_dict, uniform_mesh
from .solvers import pipeline_mesh, solve_direct_newton, solve_pipeline
from .stable import LogReal

SOLVERS = ("direct-newton", "pipeline-uniform", "pipeline-shishkin", "oracle")
BENCH_HEADER = ("solver", "eps", "N", "max_error", "iterations", "status", "wall_ms")


class InputError(SpecError):
    """Unreadable file, malformed JSON or an invalid plan."""


def _fmt(v) -> str:
    """Locale-independent shortest round-trip rendering; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, header, out: Optional[str]) -> None:
    text = ",".join(header) + "\n" + "".join(",".join(_fmt(c) for c in r) + "\n" for r in rows)
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc.strerror}") from None


def load_json(path: str):
    """Read a JSON file, turning decode failures into messages with line and column."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_spec(path: str) -> ProblemSpec:
    return spec_from_dict(load_json(path))


def _with_eps(spec: ProblemSpec, eps: float) -> ProblemSpec:
    doc = spec_to_dict(spec)
    doc["eps"] = float(eps)
    return spec_from_dict(doc)


# --- exact ---------------------------------------------------------------------


def exact_rows(spec: ProblemSpec, n: int, zmax: Optional[float] = None):
    """``(x, y)`` pairs on ``n + 1`` equispaced points; P4 samples ``z`` in ``[0, zmax]``."""
    if n < 1:
        raise InputError("--n must be at least 1")
    if not has_oracle(spec):
        raise InputError(f"no exact solution is available for this {spec.kind.value} spec")
    if spec.kind == Kind.P4:
        top = 20.0 * math.sqrt(spec.eps) if zmax is None else float(zmax)
        if not top > 0:
            raise InputError("--zmax must be positive")
        xs = np.array([top * i / n for i in range(n + 1)])
    else:
        xs = uniform_mesh(n).nodes
    ys = exact_solution(spec, xs)
    return [(float(x), float(y)) for x, y in zip(xs, ys)]


# --- classify ------------------------------------------------------------------


def render_logreal(v: LogReal) -> str:
    if v.is_zero:
        return "0"
    return ("-" if v.sign < 0 else "") + f"e^{{{v.logmag!r}}}"


def _logmag(v: LogReal):
    return "zero" if v.is_zero else v.logmag


def classify_spec(spec: ProblemSpec) -> dict:
    """Layer class and boundary slopes in log scale.

    P1 uses the sign rule on the boundary data.  P3 (constant ``q``) has no
    such rule; the layer is put at the boundary with the steeper slope.
    """
    s = spec.params
    if spec.kind == Kind.P1:
        cls = classify_layer(s)
        left, right = oracle_p1_derivatives(s)
    elif spec.kind == Kind.P3:
        if spec.constant_coeff("q") is None:
            raise InputError("classify needs a constant q for P3")
        left = oracle_p3_left_derivative(spec)
        right = oracle_p3_right_derivative(spec)
        if s.alpha == s.beta:
            cls = LayerClass.DEGENERATE_CONSTANT
        else:
            cls = LayerClass.LEFT if left.logmag >= right.logmag else LayerClass.RIGHT
    else:
        raise InputError(f"classify supports P1 and P3, not {spec.kind.value}")
    return {
        "class": cls.value,
        "left_derivative_logmag": _logmag(left),
        "right_derivative_logmag": _logmag(right),
        "left_derivative_sign": left.sign,
        "right_derivative_sign": right.sign,
        "left_derivative": render_logreal(left),
        "right_derivative": render_logreal(right),
    }


# --- regionmap -----------------------------------------------------------------


def _range(text: str, flag: str):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"{flag} expects 'lo,hi'") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise InputError(f"{flag} must be a non-empty finite range")
    return lo, hi


def regionmap_rows(p: float, q: float, alpha_range, beta_range, resolution: int):
    """Class tag for every ``(alpha, beta)`` sample of a ``resolution x resolution`` grid."""
    if resolution < 2:
        raise InputError("--resolution must be at least 2")
    if not (p > 0 and q > 0):
        raise InputError("regionmap needs p > 0 and q > 0")
    alphas = np.linspace(*alpha_range, resolution)
    betas = np.linspace(*beta_range, resolution)
    rows = []
    for a in alphas:
        for b in betas:
            cls = classify_layer(ScalarParams(eps=1.0, p=p, q=q, alpha=float(a), beta=float(b)))
            rows.append((float(a), float(b), cls.value))
    return rows


# --- bench ---------------------------------------------------------------------


@dataclass(frozen=True)
class BenchPlan:
    spec: ProblemSpec
    eps_list: tuple
    n_list: tuple
    solvers: tuple
    output_path: str


_PLAN_FIELDS = {"spec", "eps_list", "n_list", "solvers", "output_path"}


def plan_from_dict(doc) -> BenchPlan:
    if not isinstance(doc, dict):
        raise InputError("bench plan must be a JSON object")
    unknown = set(doc) - _PLAN_FIELDS
    missing = _PLAN_FIELDS - set(doc)
    if unknown:
        raise InputError(f"unknown plan field(s): {', '.join(sorted(unknown))}")
    if missing:
        raise InputError(f"missing plan field(s): {', '.join(sorted(missing))}")
    spec = spec_from_dict(doc["spec"])
    eps_list, n_list, solvers = doc["eps_list"], doc["n_list"], doc["solvers"]
    for name, lst in (("eps_list", eps_list), ("n_list", n_list), ("solvers", solvers)):
        if not isinstance(lst, list) or not lst:
            raise InputError(f"{name} must be a non-empty list")
    for e in eps_list:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0 or not math.isfinite(e):
            raise InputError(f"eps_list entry {e!r} is not a positive number")
    for n in n_list:
        if isinstance(n, bool) or not isinstance(n, int) or n < 2:
            raise InputError(f"n_list entry {n!r} is not an integer >= 2")
    for s in solvers:
        if s not in SOLVERS:
            raise InputError(f"unknown solver {s!r} (choose from {', '.join(SOLVERS)})")
    if "direct-newton" in solvers or any(s.startswith("pipeline") for s in solvers):
        if spec.kind not in (Kind.P1, Kind.P2, Kind.P3):
            raise InputError(f"solvers need a P1, P2 or P3 spec, not {spec.kind.value}")
    if not isinstance(doc["output_path"], str) or not doc["output_path"]:
        raise InputError("output_path must be a non-empty string")
    return BenchPlan(spec, tuple(float(e) for e in eps_list), tuple(n_list), tuple(dict.fromkeys(solvers)), doc["output_path"])


def _run_cell(solver: str, spec: ProblemSpec, n: int):
    """One benchmark cell; failures become a status, never an exception."""
    t0 = time.perf_counter()
    try:
        if solver == "oracle":
            exact_solution(spec, uniform_mesh(n).nodes)
            err, iters, status = None, 0, Status.CONVERGED
        elif solver == "direct-newton":
            rep = solve_direct_newton(spec, uniform_mesh(n))
            err, iters, status = rep.max_error, rep.iterations, rep.status
        else:
            kind = "uniform" if solver == "pipeline-uniform" else "shishkin"
            rep = solve_pipeline(spec, pipeline_mesh(spec, n, kind))
            err, iters, status = rep.max_error, rep.iterations, rep.status
    except NumericalError:
        err, iters, status = None, 0, Status.OVERFLOWED
    except SpecError:
        err, iters, status = None, 0, Status.DIVERGED
    wall = (time.perf_counter() - t0) * 1e3
    if err is not None and not math.isfinite(err):
        err = None
    return err, iters, status, wall


def run_bench(plan: BenchPlan):
    """Rows ``(solver, eps, N, max_error, iterations, status, wall_ms)`` sorted by the first three."""
    rows = []
    for eps in plan.eps_list:
        spec = _with_eps(plan.spec, eps)
        for n in plan.n_list:
            for solver in plan.solvers:
                err, iters, status, wall = _run_cell(solver, spec, n)
                rows.append((solver, eps, n, err, iters, status.value, round(wall, 3)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


# --- residual-check ------------------------------------------------------------


def residual_check(spec: ProblemSpec, n: int, seed: int, parabolic: bool = False) -> dict:
    if spec.kind not in (Kind.P5, Kind.P6):
        raise InputError(f"residual-check needs a P5 or P6 spec, not {spec.kind.value}")
    if n < 1:
        raise InputError("--n must be at least 1")
    rng = np.random.default_rng(seed)
    field = random_field(rng, spec.dim, positive=spec.kind == Kind.P5)
    width = spec.dim + (1 if parabolic else 0)
    points = [tuple(float(v) for v in rng.uniform(0.0, 1.0, width)) for _ in range(n)]
    dev = residual_identity_check(spec, field, points, parabolic=parabolic)
    return {"kind": spec.kind.value, "samples": n, "seed": seed, "parabolic": parabolic, "max_relative_deviation": dev}


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypersingular", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="oracle solution on an equispaced grid as CSV")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out")
    p.add_argument("--eps", type=float, help="override the spec's eps")
    p.add_argument("--zmax", type=float, help="P4 only: right end of the z grid (default 20 sqrt(eps))")

    p = sub.add_parser("classify", help="layer class and log-scale boundary slopes as JSON")
    p.add_argument("--spec", required=True)
    p.add_argument("--eps", type=float, help="override the spec's eps")

    p = sub.add_parser("regionmap", help="layer class over an (alpha, beta) grid as CSV")
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--alpha-range", default="-1,3")
    p.add_argument("--beta-range", default="-1,3")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--out")

    p = sub.add_parser("bench", help="run a benchmark plan and write its CSV table")
    p.add_argument("plan", nargs="?", help="plan JSON file")
    p.add_argument("--spec", dest="plan_flag", help="plan JSON file (alternative to the positional)")
    p.add_argument("--eps", help="comma-separated eps list overriding the plan")
    p.add_argument("--out", help="output path overriding the plan")

    p = sub.add_parser("residual-check", help="check the linearizing identity on random fields")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parabolic", action="store_true")
    return ap


def _dispatch(args) -> int:
    if args.command == "exact":
        spec = load_spec(args.spec)
        if args.eps is not None:
            spec = _with_eps(spec, args.eps)
        write_csv(exact_rows(spec, args.n, args.zmax), ("x", "y"), args.out)
    elif args.command == "classify":
        spec = load_spec(args.spec)
        if args.eps is not None:
            spec = _with_eps(spec, args.eps)
        print(json.dumps(classify_spec(spec), sort_keys=True))
    elif args.command == "regionmap":
        rows = regionmap_rows(
            args.p, args.q, _range(args.alpha_range, "--alpha-range"), _range(args.beta_range, "--beta-range"), args.resolution
        )
        write_csv(rows, ("alpha", "beta", "class"), args.out)
    elif args.command == "bench":
        path = args.plan or args.plan_flag
        if not path:
            raise InputError("bench needs a plan file")
        doc = load_json(path)
        if args.eps:
            try:
                doc["eps_list"] = [float(v) for v in args.eps.split(",")]
            except (ValueError, TypeError):
                raise InputError("--eps expects a comma-separated list of numbers") from None
        if args.out:
            doc["output_path"] = args.out
        plan = plan_from_dict(doc)
        write_csv(run_bench(plan), BENCH_HEADER, plan.output_path)
    elif args.command == "residual-check":
        spec = load_spec(args.spec)
        print(json.dumps(residual_check(spec, args.n, args.seed, args.parabolic), sort_keys=True))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
