"""Finite-difference solvers: linear upwind FD, direct Newton, and a 2D line-SOR solver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import expr as ex
from .errors import (
    MaxIterationsError,
    NumericalError,
    SolverOverflow,
    SpecError,
    ZeroPivot,
)
from .linearize import LinearProblem, inverse_map, transform
from .oracles import classify_layer, exact_solution, has_oracle, oracle_p2_constant
from .problem import (
    GridFunction,
    Kind,
    LayerClass,
    LogGridFunction,
    Mesh,
    ProblemSpec,
    ScalarParams,
    SolveReport,
    Status,
    shishkin_mesh,
    uniform_mesh,
)

# largest spread of boundary log-magnitudes a double grid can carry
MAX_LOG_SPREAD = 700.0


@dataclass(frozen=True)
class Tridiag:
    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = len(self.diag)
        if len(self.rhs) != n or len(self.sub) != max(n - 1, 0) or len(self.sup) != max(n - 1, 0):
            raise ValueError("inconsistent tridiagonal dimensions")


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    relax_tol: float = 1e-10
    relax_max_sweeps: int = 1_000_000
    damping: float = 1.0
    omega: float = 1.2  # over-relaxation factor for the 2D line sweeps

    def __post_init__(self):
        if not (self.newton_tol > 0 and self.relax_tol > 0 and self.newton_max_iter > 0 and self.relax_max_sweeps > 0):
            raise ValueError("solver tolerances and limits must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 < self.omega < 2:
            raise ValueError("omega must lie in (0, 2)")


def thomas_solve(t: Tridiag) -> np.ndarray:
    """Forward elimination / back substitution without pivoting."""
    a = [float(v) for v in t.sub]
    b = [float(v) for v in t.diag]
    c = [float(v) for v in t.sup]
    d = [float(v) for v in t.rhs]
    n = len(b)
    if n == 0:
        return np.empty(0)
    cp = [0.0] * n
    dp = [0.0] * n
    if b[0] == 0.0:
        raise ZeroPivot(0)
    cp[0] = c[0] / b[0] if n > 1 else 0.0
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        m = b[i] - a[i - 1] * cp[i - 1]
        if m == 0.0:
            raise ZeroPivot(i)
        if i < n - 1:
            cp[i] = c[i] / m
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / m
    x = [0.0] * n
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def _rescale(bcs):
    """Shift ``m`` and rescaled float boundary values ``sign * exp(logmag - m)``."""
    live = [b.logmag for b in bcs if b.sign != 0]
    m = max(live) if live else 0.0
    return m, [0.0 if b.sign == 0 else b.sign * math.exp(b.logmag - m) for b in bcs]


def _upwind_rows(a2, a1, a0, hl, hr):
    """Stencil weights ``(lower, diag, upper)`` of ``a2 u'' + a1 u' + a0 u``, negated to an M-matrix."""
    D = 2.0 * a2 / (hl + hr)
    lower = D / hl
    upper = D / hr
    diag = -(lower + upper) + a0
    fwd = a1 > 0
    upper = upper + np.where(fwd, a1 / hr, 0.0)
    lower = lower + np.where(fwd, 0.0, -a1 / hl)
    diag = diag - np.where(fwd, a1 / hr, -a1 / hl)
    return -lower, -diag, -upper


def solve_linear_fd(lp: LinearProblem, mesh: Mesh) -> LogGridFunction:
    """Upwind FD solution of ``a2 u'' + a1 u' + a0 u = 0`` with Dirichlet data.

    Convection uses the one-sided difference that keeps every off-diagonal
    entry of the negated operator non-positive (an M-matrix when ``a0 <= 0``).
    The unknown is rescaled by ``exp(-m)``, ``m`` the largest boundary
    log-magnitude; the returned grid function carries ``m`` as its shift.
    """
    if lp.dim != 1:
        raise ValueError("solve_linear_fd is one-dimensional")
    x = mesh.nodes
    h = np.diff(x)
    xi = x[1:-1]
    hl, hr = h[:-1], h[1:]
    a2 = lp.coefficient(lp.a2, [xi])
    a1 = lp.coefficient(lp.a1, [xi])
    a0 = lp.coefficient(lp.a0, [xi])
    low, diag, up = _upwind_rows(a2, a1, a0, hl, hr)
    if np.any(diag <= 0):
        raise SolverOverflow("zeroth-order term destroys diagonal dominance")
    shift, (uA, uB) = _rescale([lp.bc_left, lp.bc_right])
    rhs = np.zeros_like(xi)
    rhs[0] -= low[0] * uA
    rhs[-1] -= up[-1] * uB
    inner = thomas_solve(Tridiag(low[1:], diag, up[:-1], rhs))
    if not np.all(np.isfinite(inner)):
        raise SolverOverflow("non-finite values in the linear solve")
    u = np.concatenate([[uA], inner, [uB]])
    return LogGridFunction(mesh, u, shift)


# --- direct Newton on the untransformed equation ---------------------------------


def _nonlinear_terms(spec: ProblemSpec, xi: np.ndarray):
    """Callables ``p(y)``, ``p'(y)`` and arrays ``q(x_i)``, ``r(x_i)`` for P1/P2/P3."""
    s = spec.params
    k = spec.kind
    if k == Kind.P1:
        pv = s.p
        return (lambda y: np.full_like(y, pv)), (lambda y: np.zeros_like(y)), np.full_like(xi, s.q), np.zeros_like(xi)
    if k == Kind.P2:
        pv = s.p
        q = ex.compile_expr_vec(spec.coeffs["q"], ("x",), eps=s.eps)(xi)
        r = ex.compile_expr_vec(spec.coeffs["r"], ("x",), eps=s.eps)(xi)
        return (lambda y: np.full_like(y, pv)), (lambda y: np.zeros_like(y)), np.broadcast_to(q, xi.shape), np.broadcast_to(r, xi.shape)
    if k == Kind.P3:
        pf = ex.compile_expr_vec(spec.coeffs["p"], ("y",), eps=s.eps)
        q = ex.compile_expr_vec(spec.coeffs["q"], ("x",), eps=s.eps)(xi)

        def p(y):
            return np.broadcast_to(pf(y), y.shape)

        def dp(y):
            d = 1e-6 * np.maximum(1.0, np.abs(y))
            return (p(y + d) - p(y - d)) / (2.0 * d)

        return p, dp, np.broadcast_to(q, xi.shape), np.zeros_like(xi)
    raise SpecError(f"direct Newton supports P1/P2/P3, not {k.value}")


def solve_direct_newton(spec: ProblemSpec, mesh: Mesh, cfg: Optional[SolverConfig] = None) -> SolveReport:
    """Damped Newton on the centred discretisation of the original nonlinear equation.

    Failure is reported through ``status`` rather than raised.  The step is
    halved (up to 30 times) whenever the residual max-norm does not decrease.
    """
    cfg = cfg or SolverConfig()
    s = spec.params
    eps = s.eps
    x = mesh.nodes
    h = np.diff(x)
    hl, hr = h[:-1], h[1:]
    xi = x[1:-1]
    pfun, dpfun, q, r = _nonlinear_terms(spec, xi)
    # first-derivative weights (second order on non-uniform meshes)
    wm = -hr / (hl * (hl + hr))
    w0 = (hr - hl) / (hl * hr)
    wp = hl / (hr * (hl + hr))
    c2m = 2.0 / (hl * (hl + hr))
    c20 = -2.0 / (hl * hr)
    c2p = 2.0 / (hr * (hl + hr))

    def residual(y):
        ym, y0, yp = y[:-2], y[1:-1], y[2:]
        d1 = wm * ym + w0 * y0 + wp * yp
        d2 = c2m * ym + c20 * y0 + c2p * yp
        return eps * d2 + pfun(y0) * d1 * d1 + q * d1 + r, d1

    y = s.alpha + (s.beta - s.alpha) * x
    status = Status.MAX_ITERATIONS
    iterations = 0
    with np.errstate(all="ignore"):
        F, d1 = residual(y)
        fnorm = float(np.max(np.abs(F))) if F.size else 0.0
        if not math.isfinite(fnorm):
            status = Status.OVERFLOWED
        elif fnorm == 0.0:
            status = Status.CONVERGED
        while status == Status.MAX_ITERATIONS and iterations < cfg.newton_max_iter:
            iterations += 1
            y0 = y[1:-1]
            slope = 2.0 * pfun(y0) * d1 + q
            sub = (eps * c2m + slope * wm)[1:]
            sup = (eps * c2p + slope * wp)[:-1]
            diag = eps * c20 + slope * w0 + dpfun(y0) * d1 * d1
            try:
                step = thomas_solve(Tridiag(sub, diag, sup, -F))
            except ZeroPivot:
                status = Status.DIVERGED
                break
            if not np.all(np.isfinite(step)):
                status = Status.OVERFLOWED
                break
            lam = cfg.damping
            accepted = False
            saw_finite = False
            for _ in range(31):
                trial = y.copy()
                trial[1:-1] += lam * step
                Ft, d1t = residual(trial)
                ft = float(np.max(np.abs(Ft)))
                if math.isfinite(ft):
                    saw_finite = True
                    if ft < fnorm or ft == 0.0:
                        accepted = True
                        break
                lam *= 0.5
            if not accepted:
                # a full step that no longer changes anything counts as converged
                if saw_finite and float(np.max(np.abs(step))) <= cfg.newton_tol * (1.0 + float(np.max(np.abs(y)))):
                    status = Status.CONVERGED
                else:
                    status = Status.DIVERGED if saw_finite else Status.OVERFLOWED
                break
            y, F, d1, fnorm = trial, Ft, d1t, ft
            if lam * float(np.max(np.abs(step))) <= cfg.newton_tol * (1.0 + float(np.max(np.abs(y)))):
                status = Status.CONVERGED
    sol = GridFunction(mesh, y)
    max_error = _error_vs_oracle(spec, mesh, y) if np.all(np.isfinite(y)) else None
    return SolveReport(sol, max_error, (abs(y[0] - s.alpha), abs(y[-1] - s.beta)), iterations, status)


def _error_vs_oracle(spec: ProblemSpec, mesh: Mesh, y: np.ndarray) -> Optional[float]:
    if not has_oracle(spec):
        return None
    exact = exact_solution(spec, mesh.nodes)
    return float(np.max(np.abs(np.asarray(y) - exact)))


# --- transform-then-solve pipeline -------------------------------------------------


def pipeline_mesh(spec: ProblemSpec, n: int, kind: str = "shishkin") -> Mesh:
    """Uniform or Shishkin mesh for a P1/P2/P3 spec, layer side taken from the boundary data."""
    if kind == "uniform":
        return uniform_mesh(n)
    s = spec.params
    if spec.kind == Kind.P1:
        side = LayerClass.RIGHT if classify_layer(s) == LayerClass.RIGHT else LayerClass.LEFT
        qbar = s.q
    else:
        side = LayerClass.LEFT if s.beta >= s.alpha else LayerClass.RIGHT
        qc = spec.constant_coeff("q")
        qbar = abs(qc) if qc else 1.0
    return shishkin_mesh(n, s.eps, qbar, side)


def solve_pipeline(spec: ProblemSpec, mesh: Mesh) -> SolveReport:
    """Linearize, solve the linear problem by upwind FD, map back, compare with the oracle."""
    if spec.kind not in (Kind.P1, Kind.P2, Kind.P3):
        raise SpecError(f"pipeline supports P1/P2/P3, not {spec.kind.value}")
    s = spec.params
    lp = transform(spec)
    nan = GridFunction(mesh, np.full(len(mesh), math.nan))
    if lp.style == "P2" and abs(lp.bc_left.logmag - lp.bc_right.logmag) > MAX_LOG_SPREAD:
        return SolveReport(nan, None, (math.nan, math.nan), 0, Status.OVERFLOWED)
    try:
        lin = solve_linear_fd(lp, mesh)
        sol = inverse_map(lin, lp)
    except NumericalError:
        return SolveReport(nan, None, (math.nan, math.nan), 1, Status.OVERFLOWED)
    y = sol.values
    res = (abs(y[0] - s.alpha), abs(y[-1] - s.beta))
    return SolveReport(sol, _error_vs_oracle(spec, mesh, y), res, 1, Status.CONVERGED, linear=lin)


# --- 2D ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction2D:
    """Values on the tensor grid ``x1 x x2``; ``values[i, j]`` sits at ``(x1[i], x2[j])``."""

    x1: Mesh
    x2: Mesh
    values: np.ndarray
    shift: float = 0.0


def _as_mesh(m: Union[Mesh, int]) -> Mesh:
    return m if isinstance(m, Mesh) else uniform_mesh(int(m))


def _const(c, what):
    if isinstance(c, (ex.Num, ex.Var, ex.Unary, ex.Binary)):
        raise SpecError(f"2D solver needs a constant {what}")
    return float(c)


def solve_elliptic_2d(
    lp: LinearProblem,
    x1: Union[Mesh, int],
    x2: Union[Mesh, int],
    cfg: Optional[SolverConfig] = None,
    start: str = "profile",
) -> SolveReport:
    """Line-SOR solution of ``a2 Lap u + a1 . grad u + a0 u = 0`` on the unit square.

    Dirichlet data: ``bc_left`` on ``x1 = 0``, ``bc_right`` on ``x1 = 1``; the
    faces ``x2 = 0, 1`` take the 1D upwind solution of the same operator
    restricted to ``x1``, which makes x2-independent data reproduce the 1D
    discrete solution exactly.  Integer mesh arguments mean uniform meshes
    with that many cells.  ``start`` picks the initial interior: the 1D
    profile (``"profile"``) or zeros (``"zero"``).
    """
    cfg = cfg or SolverConfig()
    if lp.dim != 2:
        raise ValueError("solve_elliptic_2d needs a dim=2 problem")
    m1, m2 = _as_mesh(x1), _as_mesh(x2)
    a2 = _const(lp.a2, "a2")
    b1, b2 = (_const(c, "a1") for c in lp.a1)
    a0 = _const(lp.a0, "a0")

    restricted = LinearProblem(a2, b1, a0, lp.bc_left, lp.bc_right, 1, lp.eps, lp.p)
    face = solve_linear_fd(restricted, m1)
    shift = face.shift
    n1, n2 = len(m1), len(m2)
    u = np.empty((n1, n2))
    u[:, 0] = face.values
    u[:, -1] = face.values
    u[0, :] = face.values[0]
    u[-1, :] = face.values[-1]
    u[1:-1, 1:-1] = face.values[1:-1, None] if start == "profile" else 0.0

    h = np.diff(m1.nodes)
    k = np.diff(m2.nodes)
    hl, hr = h[:-1], h[1:]
    kl, kr = k[:-1], k[1:]
    low1, diag1, up1 = _upwind_rows(a2, np.full(hl.shape, b1), np.zeros(hl.shape), hl, hr)
    low2, diag2, up2 = _upwind_rows(a2, np.full(kl.shape, b2), np.zeros(kl.shape), kl, kr)
    if np.any(diag1 + diag2[0] - a0 <= 0):
        raise SolverOverflow("zeroth-order term destroys diagonal dominance")
    omega = cfg.omega
    sweeps = 0
    scale = max(float(np.max(np.abs(u))), 1e-300)
    prev = math.inf
    while True:
        sweeps += 1
        change = 0.0
        for j in range(1, n2 - 1):
            diag = diag1 + diag2[j - 1] - a0
            rhs = -(low2[j - 1] * u[1:-1, j - 1] + up2[j - 1] * u[1:-1, j + 1])
            rhs = rhs.copy()
            rhs[0] -= low1[0] * u[0, j]
            rhs[-1] -= up1[-1] * u[-1, j]
            gs = thomas_solve(Tridiag(low1[1:], diag, up1[:-1], rhs))
            new = (1.0 - omega) * u[1:-1, j] + omega * gs
            change = max(change, float(np.max(np.abs(new - u[1:-1, j]))))
            u[1:-1, j] = new
        # distance to the fixed point is about change / (1 - rate) for a contracting sweep
        rate = change / prev if prev > 0 else 0.0
        prev = change
        estimate = change / (1.0 - rate) if rate < 1.0 else math.inf
        if change == 0.0 or estimate <= cfg.relax_tol * scale:
            break
        if sweeps >= cfg.relax_max_sweeps:
            raise MaxIterationsError(f"line SOR did not converge in {sweeps} sweeps")

    with np.errstate(divide="ignore"):
        w = (lp.eps / lp.p) * (np.log(u) + shift) if np.all(u > 0) else np.full_like(u, math.nan)
    sol = GridFunction2D(m1, m2, w, 0.0)
    max_error = None
    params = ScalarParams(lp.eps, lp.p, b1 / lp.eps, a0 / lp.p,
                          lp.bc_left.logmag * lp.eps / lp.p, lp.bc_right.logmag * lp.eps / lp.p)
    if np.all(np.isfinite(w)) and params.q * params.q - 4 * params.p * params.r > 0:
        exact = oracle_p2_constant(params, m1.nodes)
        max_error = float(np.max(np.abs(w - exact[:, None])))
    res = (float(np.max(np.abs(w[0, :] - params.alpha))), float(np.max(np.abs(w[-1, :] - params.beta))))
    return SolveReport(sol, max_error, res, sweeps, Status.CONVERGED, linear=GridFunction2D(m1, m2, u, shift))
