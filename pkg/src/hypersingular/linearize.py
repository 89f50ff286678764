"""Linearizing substitutions: problem rewriting, back-substitution and identity checks.

Two substitutions cover every problem in the catalogue:

* ``y = (eps/p) ln u`` turns ``eps y'' + p y'^2 + q y' + r = 0`` into
  ``eps^2 u'' + eps q u' + p r u = 0`` (and likewise in several dimensions);
* ``u = P(y)`` with ``P(y) = int_0^y exp(G(z)) dz``, ``G(z) = (1/eps) int_0^z p``,
  turns ``eps y'' + p(y) y'^2 + q y' = 0`` into ``eps u'' + q u' = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from . import expr as ex
from .errors import (
    IllegalSign,
    NonpositiveValue,
    QuadratureError,
    RootNotBracketed,
    UnsupportedDimension,
)
from .problem import GridFunction, Kind, LogGridFunction, ProblemSpec
from .stable import ZERO, LogReal, lr_add, lr_sum

Coefficient = Union[float, ex.Expr]

_GL_T, _GL_W = np.polynomial.legendre.leggauss(16)


def lr_cmp(a: LogReal, b: LogReal) -> int:
    """Sign of ``a - b``."""
    if a.sign != b.sign:
        return 1 if a.sign > b.sign else -1
    if a.sign == 0 or a.logmag == b.logmag:
        return 0
    bigger = 1 if a.logmag > b.logmag else -1
    return bigger * a.sign


class PTransform:
    """Tabulated ``P(y) = int_c^y exp(G(z)) dz`` with ``G(z) = (1/eps) int_c^z p``.

    ``c`` is the ``origin`` (default 0).  Shifting it changes ``P`` only by an
    additive constant and a positive factor, but P is accurate relative to
    its distance from ``P(c)``, so callers put ``c`` where ``G`` is smallest.
    The table spans ``[lo, hi]`` (always containing ``c``) with cells on which ``G``
    changes by at most ``max_dG``; each cell is integrated with 16-point
    Gauss-Legendre in the rescaled variable, so ``P`` never leaves log space.
    Instances are immutable after construction.
    """

    def __init__(self, p: Callable[[np.ndarray], np.ndarray], eps: float, lo: float, hi: float,
                 max_dG: float = 4.0, max_cells: int = 200_000, origin: float = 0.0):
        if eps <= 0:
            raise IllegalSign("eps must be positive")
        self.p = p
        self.eps = float(eps)
        self.origin = c = float(origin)
        lo, hi = min(lo, c), max(hi, c)
        self.lo, self.hi = float(lo), float(hi)
        right = self._march(c, hi, max_dG, max_cells)
        left = self._march(c, lo, max_dG, max_cells)
        z = [zz for zz, _ in reversed(left)] + [zz for zz, _ in right[1:]]
        G = [g for _, g in reversed(left)] + [g for _, g in right[1:]]
        self.z = np.array(z)
        self.G = np.array(G)
        self.i0 = len(left) - 1  # index of the origin node
        # P at nodes, accumulated outward from the origin so no cancellation occurs
        n = len(z)
        sign = np.zeros(n, dtype=int)
        logmag = np.full(n, -math.inf)
        acc = ZERO
        for k in range(self.i0 + 1, n):
            piece = self._piece(k - 1, self.z[k])
            acc = lr_add(acc, piece)
            sign[k], logmag[k] = acc.sign, acc.logmag
        acc = ZERO
        for k in range(self.i0 - 1, -1, -1):
            piece = self._piece(k + 1, self.z[k])
            acc = lr_add(acc, piece)
            sign[k], logmag[k] = acc.sign, acc.logmag
        self.P_sign = sign
        self.P_logmag = logmag

    # -- construction helpers --

    def _int_p(self, a: float, b: float) -> float:
        half = 0.5 * (b - a)
        return half * float(np.dot(_GL_W, self.p(a + half * (1.0 + _GL_T))))

    def _march(self, start, stop, max_dG, max_cells):
        nodes = [(start, 0.0)]
        if stop == start:
            return nodes
        length = stop - start
        h = length / 16
        z, G = start, 0.0
        while (stop - z) * math.copysign(1.0, length) > 0:
            b = z + h
            if (b - stop) * math.copysign(1.0, length) >= 0:
                b = stop
            dG = self._int_p(z, b) / self.eps
            if not math.isfinite(dG):
                raise QuadratureError(f"non-finite exponent increment on [{z!r}, {b!r}]")
            if abs(dG) > max_dG and abs(b - z) > 1e-14 * max(1.0, abs(z)):
                h *= 0.5
                continue
            z, G = b, G + dG
            nodes.append((z, G))
            if len(nodes) > max_cells:
                raise QuadratureError("P table needs too many cells; eps too small for the range")
            if abs(dG) < 0.25 * max_dG:
                h = math.copysign(min(abs(h) * 2.0, abs(length) / 16), length)
        nodes[-1] = (stop, nodes[-1][1])
        return nodes

    def _piece(self, k: int, y: float) -> LogReal:
        """Signed ``int_{z_k}^y exp(G)`` for ``y`` inside a cell adjacent to node ``k``."""
        return self._local(float(self.z[k]), float(self.G[k]), y)

    def _local(self, a: float, Ga: float, y: float) -> LogReal:
        half = 0.5 * (y - a)
        if half == 0:
            return ZERO
        zeta = a + half * (1.0 + _GL_T)
        inner_half = 0.5 * (zeta - a)
        pts = a + inner_half[:, None] * (1.0 + _GL_T[None, :])
        vals = self.p(pts.ravel()).reshape(pts.shape)
        g = inner_half * (vals @ _GL_W) / self.eps
        m = float(np.max(g))
        s = float(np.dot(_GL_W, np.exp(g - m)))
        return LogReal(1 if half > 0 else -1, Ga + m + math.log(abs(half) * s))

    def _anchor(self, y: float) -> int:
        """Node nearest to ``y`` on the side of the origin within ``y``'s cell."""
        if y < self.lo - 1e-15 * max(1.0, abs(self.lo)) or y > self.hi + 1e-15 * max(1.0, abs(self.hi)):
            raise RootNotBracketed(f"y={y!r} outside tabulated range [{self.lo!r}, {self.hi!r}]")
        if y >= self.origin:
            return max(int(np.searchsorted(self.z, y, side="right")) - 1, self.i0)
        return min(int(np.searchsorted(self.z, y, side="left")), self.i0)

    # -- public surface --

    def node_P(self, k: int) -> LogReal:
        return LogReal(int(self.P_sign[k]), float(self.P_logmag[k]))

    def logP(self, y: float) -> LogReal:
        """``P(y)`` as a signed LogReal."""
        k = self._anchor(y)
        return lr_add(self.node_P(k), self._piece(k, y))

    def G_at(self, y: float) -> float:
        k = self._anchor(y)
        return float(self.G[k]) + self._int_p(float(self.z[k]), y) / self.eps

    def dP(self, y: float) -> LogReal:
        """``P'(y) = exp(G(y))``."""
        return LogReal(1, self.G_at(y))

    def integral(self, a: float, b: float) -> LogReal:
        """Signed ``int_a^b exp(G)`` summed cell by cell (no subtraction of P values)."""
        if a == b:
            return ZERO
        flip = a > b
        lo, hi = (b, a) if flip else (a, b)
        ka = int(np.searchsorted(self.z, lo, side="left"))
        kb = int(np.searchsorted(self.z, hi, side="right")) - 1
        if ka > kb:
            total = self._local(lo, self.G_at(lo), hi)
        else:
            parts = [-self._piece(ka, lo)]
            parts += [self._piece(k, self.z[k + 1]) for k in range(ka, kb)]
            parts.append(self._piece(kb, hi))
            total = lr_sum(parts)
        return -total if flip else total

    def inverse(self, target: LogReal, tol: float = 1e-12) -> float:
        """Solve ``P(y) = target`` by bisection (``P`` is strictly increasing)."""
        n = len(self.z)
        first, last = self.node_P(0), self.node_P(n - 1)
        if lr_cmp(target, first) < 0:
            if _close(target, first):
                return float(self.z[0])
            raise RootNotBracketed(f"{target!r} below P(lo)")
        if lr_cmp(target, last) > 0:
            if _close(target, last):
                return float(self.z[-1])
            raise RootNotBracketed(f"{target!r} above P(hi)")
        lo_i, hi_i = 0, n - 1
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if lr_cmp(self.node_P(mid), target) <= 0:
                lo_i = mid
            else:
                hi_i = mid
        a, b = float(self.z[lo_i]), float(self.z[hi_i])
        anchor = hi_i if b <= self.origin else lo_i
        base = self.node_P(anchor)
        for _ in range(200):
            if b - a <= tol:
                break
            m = 0.5 * (a + b)
            if m == a or m == b:
                break
            val = lr_add(base, self._piece(anchor, m))
            if lr_cmp(val, target) <= 0:
                a = m
            else:
                b = m
        return 0.5 * (a + b)


def _close(a: LogReal, b: LogReal, rel: float = 1e-10) -> bool:
    if a.sign != b.sign:
        return a.sign == 0 or b.sign == 0
    return abs(a.logmag - b.logmag) <= rel * max(1.0, abs(b.logmag))


def p3_transform(spec: ProblemSpec, lo: Optional[float] = None, hi: Optional[float] = None,
                 origin: Optional[float] = None) -> PTransform:
    """P-table for a P3 (or P6) spec covering 0, alpha and beta.

    By default the origin is whichever of alpha, beta has the smaller ``G``,
    so ``P`` grows away from it across the whole solution range and the
    inverse never has to resolve values crowding an asymptote.
    """
    var = "y" if spec.kind == Kind.P3 else "w"
    p = ex.compile_expr_vec(spec.coeffs["p"], (var,), eps=spec.eps)
    a, b = spec.params.alpha, spec.params.beta
    lo = min(0.0, a, b) if lo is None else lo
    hi = max(0.0, a, b) if hi is None else hi
    if origin is None:
        origin = a if _int_p_sign(p, a, b) >= 0 else b
    return PTransform(p, spec.eps, lo, hi, origin=origin)


def _int_p_sign(p, a: float, b: float, pieces: int = 64) -> float:
    """Sign of ``int_a^b p`` (composite 16-point Gauss-Legendre)."""
    if a == b:
        return 0.0
    edges = np.linspace(a, b, pieces + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    pts = edges[:-1, None] + half[:, None] * (1.0 + _GL_T[None, :])
    total = float(np.sum(half * (p(pts.ravel()).reshape(pts.shape) @ _GL_W)))
    return math.copysign(1.0, total) if total != 0 else 0.0


@dataclass(frozen=True)
class LinearProblem:
    """``a2 u'' + a1 u' + a0 u = 0`` (or its 2D analogue) with LogReal Dirichlet data.

    ``a1`` is a tuple with one entry per dimension when ``dim == 2``.  ``eps``
    and ``p`` are kept for back-substitution ``y = (eps/p) ln u``; P3-style
    problems carry their ``ptransform`` instead.
    """

    a2: Coefficient
    a1: Union[Coefficient, tuple]
    a0: Coefficient
    bc_left: LogReal
    bc_right: LogReal
    dim: int = 1
    eps: float = 1.0
    p: float = 1.0
    ptransform: Optional[PTransform] = None

    @property
    def style(self) -> str:
        return "P3" if self.ptransform is not None else "P2"

    def coefficient(self, c: Coefficient, points: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate a coefficient at points given as one array per space variable."""
        shape = np.shape(points[0])
        if not isinstance(c, (ex.Num, ex.Var, ex.Unary, ex.Binary)):
            return np.full(shape, float(c))
        if self.dim == 1:
            names = ("x",) if "x" in ex.variables(c) else ("x1",)
        else:
            names = tuple(f"x{i + 1}" for i in range(self.dim))
        f = ex.compile_expr_vec(c, names + ("t",), eps=self.eps)
        return np.broadcast_to(f(*points[: len(names)], np.zeros(shape)), shape).astype(float)


def _fold(e: ex.Expr, eps: float, scale: float = 1.0) -> Coefficient:
    """``scale * e`` as a float when constant, else as an expression tree."""
    if ex.is_constant(e):
        return scale * ex.evaluate(e, {ex.EPS: eps})
    if scale == 1.0:
        return e
    return ex.Binary("*", ex.Num(scale), e)


def transform_p2(spec: ProblemSpec) -> LinearProblem:
    """``y = (eps/p) ln u`` for P1/P2: ``eps^2 u'' + eps q u' + p r u = 0``."""
    k = spec.kind
    if k not in (Kind.P1, Kind.P2):
        raise ValueError(f"transform_p2 applies to P1/P2, not {k.value}")
    s = spec.params
    if s.p == 0:
        raise IllegalSign("p must be non-zero")
    eps = s.eps
    if k == Kind.P1:
        a1, a0 = eps * s.q, 0.0
    else:
        a1 = _fold(spec.coeffs["q"], eps, eps)
        a0 = _fold(spec.coeffs["r"], eps, s.p)
    return LinearProblem(
        a2=eps * eps, a1=a1, a0=a0,
        bc_left=LogReal(1, s.alpha * s.p / eps), bc_right=LogReal(1, s.beta * s.p / eps),
        dim=1, eps=eps, p=s.p,
    )


def transform_p3(spec: ProblemSpec, ptransform: Optional[PTransform] = None) -> LinearProblem:
    """``u = P(y)`` for P3: ``eps u'' + q(x) u' = 0`` with ``u(0)=P(alpha)``, ``u(1)=P(beta)``."""
    if spec.kind != Kind.P3:
        raise ValueError(f"transform_p3 applies to P3, not {spec.kind.value}")
    pt = ptransform or p3_transform(spec)
    s = spec.params
    return LinearProblem(
        a2=s.eps, a1=_fold(spec.coeffs["q"], s.eps), a0=0.0,
        bc_left=pt.logP(s.alpha), bc_right=pt.logP(s.beta),
        dim=1, eps=s.eps, p=1.0, ptransform=pt,
    )


def transform_p5(spec: ProblemSpec) -> LinearProblem:
    """``w = (eps/p) ln u`` for P5: ``eps^2 Lap u + eps q.grad u + p r u = 0``."""
    if spec.kind != Kind.P5:
        raise ValueError(f"transform_p5 applies to P5, not {spec.kind.value}")
    if spec.dim not in (1, 2):
        raise UnsupportedDimension(f"dim {spec.dim}")
    s = spec.params
    if s.p == 0:
        raise IllegalSign("p must be non-zero")
    eps = s.eps
    a1 = tuple(_fold(spec.coeffs[f"q{i + 1}"], eps, eps) for i in range(spec.dim))
    return LinearProblem(
        a2=eps * eps, a1=a1 if spec.dim > 1 else a1[0], a0=_fold(spec.coeffs["r"], eps, s.p),
        bc_left=LogReal(1, s.alpha * s.p / eps), bc_right=LogReal(1, s.beta * s.p / eps),
        dim=spec.dim, eps=eps, p=s.p,
    )


def transform(spec: ProblemSpec) -> LinearProblem:
    if spec.kind in (Kind.P1, Kind.P2):
        return transform_p2(spec)
    if spec.kind == Kind.P3:
        return transform_p3(spec)
    if spec.kind == Kind.P5:
        return transform_p5(spec)
    raise ValueError(f"no linearizing transform for {spec.kind.value}")


def inverse_map(solution: LogGridFunction, lp: LinearProblem) -> GridFunction:
    """Map a linear-problem grid solution back to the original unknown.

    P2-style: ``y = (eps/p) ln u`` (every node must be positive).
    P3-style: ``y = P^{-1}(u)`` node by node; ``u`` may be negative when ``y < 0``.
    """
    values = np.asarray(solution.values, dtype=float)
    out = np.empty_like(values)
    if lp.ptransform is None:
        bad = np.flatnonzero(~(values > 0))
        if bad.size:
            raise NonpositiveValue(int(bad[0]))
        out[:] = (lp.eps / lp.p) * (np.log(values) + solution.shift)
    else:
        for i in range(values.size):
            out[i] = lp.ptransform.inverse(solution.logreal(i))
    return GridFunction(solution.mesh, out)


# --- residual identity --------------------------------------------------------


class FieldSample(NamedTuple):
    value: float
    grad: tuple
    lap: float
    dt: float = 0.0


def _deviation(lhs, rhs, tiny=1e-300):
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + tiny)


def residual_identity_check(
    spec: ProblemSpec,
    field: Callable[[tuple], FieldSample],
    sample_points: Sequence[tuple],
    parabolic: bool = False,
) -> float:
    """Largest relative mismatch of the linearizing identity over the samples.

    P5 (``field`` describes ``u > 0``): with ``w = (eps/p) ln u``,
    ``eps Lap w + p|grad w|^2 + q.grad w + r [- w_t]`` must equal
    ``(eps^2 Lap u + eps q.grad u + p r u [- eps u_t]) / (p u)``.

    P6 (``field`` describes ``w``): with ``u = P(w)``,
    ``eps Lap w + p(w)|grad w|^2 + q.grad w`` must equal
    ``(eps Lap u + q.grad u) / P'(w)``.

    Each point is ``(x1, ..., xn)`` or, for the parabolic variant, ``(x1, ..., xn, t)``.
    Derivatives come from the caller; nothing is differentiated numerically here.
    """
    if spec.kind == Kind.P5:
        return _check_p5(spec, field, sample_points, parabolic)
    if spec.kind == Kind.P6:
        if parabolic:
            raise ValueError("the parabolic identity is defined for P5 only")
        return _check_p6(spec, field, sample_points)
    raise ValueError(f"residual identity applies to P5/P6, not {spec.kind.value}")


def _check_p5(spec, field, points, parabolic):
    s = spec.params
    eps, p, dim = s.eps, s.p, spec.dim
    names = tuple(f"x{i + 1}" for i in range(dim)) + ("t",)
    qf = [spec.coeff(f"q{i + 1}", *names) for i in range(dim)]
    rf = spec.coeff("r", *names)
    worst = 0.0
    for pt in points:
        x = tuple(pt[:dim])
        t = pt[dim] if parabolic else 0.0
        f = field(pt)
        u, gu, lu = f.value, tuple(f.grad), f.lap
        if not u > 0:
            raise NonpositiveValue(0)
        q = [g(*x, t) for g in qf]
        r = rf(*x, t)
        # w = (eps/p) ln u, differentiated by the chain rule
        c = eps / p
        gw = [c * g / u for g in gu]
        lw = c * (lu / u - sum(g * g for g in gu) / (u * u))
        nonlinear = eps * lw + p * sum(g * g for g in gw) + sum(qi * gi for qi, gi in zip(q, gw)) + r
        linear = eps * eps * lu + eps * sum(qi * gi for qi, gi in zip(q, gu)) + p * r * u
        if parabolic:
            nonlinear -= c * f.dt / u
            linear -= eps * f.dt
        worst = max(worst, _deviation(nonlinear, linear / (p * u)))
    return worst


def _check_p6(spec, field, points):
    eps, dim = spec.eps, spec.dim
    names = tuple(f"x{i + 1}" for i in range(dim)) + ("w",)
    qf = [spec.coeff(f"q{i + 1}", *names) for i in range(dim)]
    pf = spec.coeff("p", "w")
    samples = [(tuple(pt[:dim]), field(pt)) for pt in points]
    ws = [f.value for _, f in samples]
    pt_table = p3_transform(spec, lo=min(ws + [0.0]), hi=max(ws + [0.0]))
    worst = 0.0
    for x, f in samples:
        w, gw, lw = f.value, tuple(f.grad), f.lap
        q = [g(*x, w) for g in qf]
        pw = pf(w)
        # u = P(w): grad u = P' grad w, Lap u = P' Lap w + P'' |grad w|^2, P'' = P' p(w)/eps
        d1 = math.exp(pt_table.G_at(w))
        d2 = d1 * pw / eps
        gsq = sum(g * g for g in gw)
        gu = [d1 * g for g in gw]
        lu = d1 * lw + d2 * gsq
        nonlinear = eps * lw + pw * gsq + sum(qi * gi for qi, gi in zip(q, gw))
        linear = eps * lu + sum(qi * gi for qi, gi in zip(q, gu))
        worst = max(worst, _deviation(nonlinear, linear / d1))
    return worst


def random_field(rng: np.random.Generator, dim: int, positive: bool = True, modes: int = 3):
    """Smooth random field ``f(pt) -> FieldSample`` with exact derivatives.

    ``f = c0 + sum_j b_j sin(k_j . x + phi_j) + c_t t``; with ``positive`` the
    constant dominates the sine amplitudes so ``f > 0`` everywhere.  Points
    may carry a trailing ``t`` entry.
    """
    b = rng.uniform(-1.0, 1.0, modes)
    k = rng.uniform(-3.0, 3.0, (modes, dim))
    phi = rng.uniform(0.0, 2.0 * math.pi, modes)
    ct = float(rng.uniform(-0.5, 0.5))
    c0 = float(np.abs(b).sum() + abs(ct) + rng.uniform(0.5, 2.0)) if positive else float(rng.uniform(-1.0, 1.0))
    ksq = (k * k).sum(axis=1)

    def field(pt):
        x = np.asarray(pt[:dim], dtype=float)
        t = float(pt[dim]) if len(pt) > dim else 0.0
        arg = k @ x + phi
        sn, cs = np.sin(arg), np.cos(arg)
        value = c0 + float(b @ sn) + ct * t
        grad = tuple(float(g) for g in (b * cs) @ k)
        lap = -float((b * ksq) @ sn)
        return FieldSample(value, grad, lap, ct)

    return field
