"""Closed-form solutions, boundary slopes and layer classification.

All formulas are rearranged so that every exponential appears in a sum of
non-negative terms; the sums are then formed in log space.  For P1 the
numerator of the exact solution is regrouped as

    e^{b} (1 - e^{-s x}) + e^{a - s x} (1 - e^{-s (1 - x)}),
    a = alpha p / eps, b = beta p / eps, s = q / eps,

which is algebraically identical to the four-exponential form but never
subtracts two nearly equal huge numbers.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .errors import ComplexRoots, NonpositiveArgument, SpecError
from .linearize import PTransform, p3_transform
from .problem import Kind, LayerClass, ProblemSpec, ScalarParams
from .stable import (
    LogReal,
    ZERO,
    log1mexp,
    log_erf,
    log_erfc,
    log_expm1,
    lr_add,
    lr_div,
    lr_expm1,
    lr_mul,
    lr_one_minus_exp,
)


def _log1mexp_vec(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.log(-np.expm1(-t))
        large = np.log1p(-np.exp(-t))
    return np.where(t < math.log(2.0), small, large)


def _p1_log_u(params: ScalarParams, x):
    """ln u(x) for the linearized P1 solution, vectorised over ``x``."""
    eps, p, q = params.eps, params.p, params.q
    a, b, s = params.alpha * p / eps, params.beta * p / eps, q / eps
    x = np.asarray(x, dtype=float)
    t1 = b + _log1mexp_vec(s * x)
    t2 = a - s * x + _log1mexp_vec(s * (1.0 - x))
    return np.logaddexp(t1, t2) - log1mexp(s)


def oracle_p1(params: ScalarParams, x: float) -> float:
    """Exact P1 solution at a single point, assembled from LogReals."""
    if params.beta == params.alpha:
        return float(params.alpha)
    eps, p, q = params.eps, params.p, params.q
    a, b, s = params.alpha * p / eps, params.beta * p / eps, q / eps
    num = lr_add(
        lr_mul(LogReal.exp(b), lr_one_minus_exp(s * x)),
        lr_mul(LogReal.exp(a - s * x), lr_one_minus_exp(s * (1.0 - x))),
    )
    den = lr_one_minus_exp(s)
    ratio = lr_div(num, den)
    if ratio.sign != 1:
        raise NonpositiveArgument(f"log argument {ratio!r} at x={x!r}")
    return eps / p * ratio.logmag


def oracle_p1_grid(params: ScalarParams, xs) -> np.ndarray:
    """Vectorised :func:`oracle_p1` (same grouping, numpy log-sum-exp)."""
    if params.beta == params.alpha:
        return np.full(np.shape(xs), float(params.alpha))
    return params.eps / params.p * _p1_log_u(params, xs)


def oracle_p1_derivatives(params: ScalarParams) -> tuple:
    """``(y'(0), y'(1))`` as LogReals; they exceed double range for small eps."""
    eps, p, q = params.eps, params.p, params.q
    d = (params.beta - params.alpha) * p / eps
    qp = LogReal.from_real(q / p)
    left = lr_div(lr_mul(qp, lr_expm1(d)), lr_one_minus_exp(q / eps))
    right = lr_div(lr_mul(qp, -lr_expm1(-d)), LogReal(1, log_expm1(q / eps)))
    return left, right


def oracle_p1_slopes(params: ScalarParams, x: float) -> tuple:
    """``(y, y', y'')`` at ``x`` from the closed form.

    With ``rho = C2 e^{-qx/eps} / (C1 + C2 e^{-qx/eps})`` the derivatives are
    ``y' = -(q/p) rho`` and ``y'' = q^2/(p eps) rho (1 - rho)``; ``1 - rho`` is
    formed as ``C1 / (...)`` to keep full relative accuracy.
    """
    eps, p, q = params.eps, params.p, params.q
    a, b, s = params.alpha * p / eps, params.beta * p / eps, q / eps
    num = lr_add(
        lr_mul(LogReal.exp(b), lr_one_minus_exp(s * x)),
        lr_mul(LogReal.exp(a - s * x), lr_one_minus_exp(s * (1.0 - x))),
    )
    # C2 e^{-sx} and C1, both up to the common factor 1/(1 - e^{-s})
    c2 = lr_mul(LogReal.exp(a - s * x), lr_one_minus_exp(a - b)) if a != b else ZERO
    c1 = lr_mul(LogReal.exp(b), lr_one_minus_exp(b - a + s))
    rho = lr_div(c2, num).to_real()
    one_minus_rho = lr_div(c1, num).to_real()
    y = eps / p * (num.logmag - lr_one_minus_exp(s).logmag)
    return y, -(q / p) * rho, q * q / (p * eps) * rho * one_minus_rho


def classify_layer(params: ScalarParams) -> LayerClass:
    """Layer position from the boundary values; degenerate lines take precedence."""
    alpha, beta = params.alpha, params.beta
    shifted = alpha - params.q / params.p
    if beta == alpha:
        return LayerClass.DEGENERATE_CONSTANT
    if beta == shifted:
        return LayerClass.DEGENERATE_LINEAR
    if beta > alpha:
        return LayerClass.LEFT
    if beta < shifted:
        return LayerClass.RIGHT
    return LayerClass.NONE


# --- Problem 2 with constant coefficients --------------------------------------


def _roots(p: float, q: float, r: float):
    """Roots of ``lam^2 + q lam + p r = 0`` without cancellation, ``lam_plus > lam_minus``."""
    disc = q * q - 4.0 * p * r
    if not disc > 0:
        raise ComplexRoots(f"q^2 - 4pr = {disc!r} <= 0")
    sq = math.sqrt(disc)
    if q >= 0:
        lam_minus = -0.5 * (q + sq)
        lam_plus = p * r / lam_minus
    else:
        lam_plus = 0.5 * (sq - q)
        lam_minus = p * r / lam_plus
    return lam_plus, lam_minus, sq


def _p2_log_u(params: ScalarParams, x):
    eps, p = params.eps, params.p
    lp, lm, sq = _roots(p, params.q, params.r)
    mp, mm, d = lp / eps, lm / eps, sq / eps
    a, b = params.alpha * p / eps, params.beta * p / eps
    x = np.asarray(x, dtype=float)
    t1 = b + mp * (x - 1.0) + _log1mexp_vec(d * x)
    t2 = a + mm * x + _log1mexp_vec(d * (1.0 - x))
    return np.logaddexp(t1, t2) - log1mexp(d)


def oracle_p2_constant(params: ScalarParams, x):
    """Exact solution of ``eps y'' + p y'^2 + q y' + r = 0`` for constant ``q``, ``r``.

    Requires ``q^2 - 4pr > 0``; ``x`` may be a scalar or an array.
    """
    y = params.eps / params.p * _p2_log_u(params, x)
    return float(y) if np.ndim(y) == 0 else y


def p2_constant_params(spec: ProblemSpec) -> Optional[ScalarParams]:
    """ScalarParams with ``q``, ``r`` filled in when a P1/P2 spec has constant coefficients."""
    if spec.kind == Kind.P1:
        return spec.params
    if spec.kind != Kind.P2:
        return None
    q, r = spec.constant_coeff("q"), spec.constant_coeff("r")
    if q is None or r is None:
        return None
    s = spec.params
    return ScalarParams(s.eps, s.p, q, r, s.alpha, s.beta)


# --- Problem 3 -----------------------------------------------------------------


def _p3_q(spec: ProblemSpec) -> float:
    if spec.kind != Kind.P3:
        raise SpecError(f"expected a P3 spec, got {spec.kind.value}")
    q = spec.constant_coeff("q")
    if q is None:
        raise SpecError("the implicit P3 solution needs a constant q")
    return q


def p3_rhs(pt: PTransform, alpha: float, beta: float, q: float, eps: float, x: float) -> LogReal:
    """Value of ``P(y(x))`` from the implicit solution, as a LogReal."""
    Pa, Pb = pt.logP(alpha), pt.logP(beta)
    if q == 0:
        return lr_add(lr_mul(Pa, LogReal.from_real(1.0 - x)), lr_mul(Pb, LogReal.from_real(x)))
    s = q / eps
    num = lr_add(
        lr_mul(Pb, lr_one_minus_exp(s * x)),
        lr_mul(lr_mul(Pa, LogReal.exp(-s * x)), lr_one_minus_exp(s * (1.0 - x))),
    )
    return lr_div(num, lr_one_minus_exp(s))


def oracle_p3_implicit(spec: ProblemSpec, x, ptransform: Optional[PTransform] = None):
    """``y(x)`` for P3 with constant ``q`` by bisection on ``P(y) = rhs(x)``.

    ``x`` may be a scalar or a sequence; the P table is built once per call
    unless one is supplied.
    """
    q = _p3_q(spec)
    s = spec.params
    pt = ptransform or p3_transform(spec)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        if xi == 0.0:
            out[i] = s.alpha
        elif xi == 1.0:
            out[i] = s.beta
        else:
            out[i] = pt.inverse(p3_rhs(pt, s.alpha, s.beta, q, s.eps, float(xi)))
    return float(out[0]) if np.ndim(x) == 0 else out


def oracle_p3_left_derivative(spec: ProblemSpec, ptransform: Optional[PTransform] = None) -> LogReal:
    """``y'(0) = (q/eps) (P(beta) - P(alpha)) / (1 - e^{-q/eps}) * exp(-G(alpha))``."""
    q = _p3_q(spec)
    s = spec.params
    pt = ptransform or p3_transform(spec)
    diff = pt.integral(s.alpha, s.beta)
    if q == 0:
        scale = LogReal.from_real(1.0)
    else:
        scale = lr_div(LogReal.from_real(q / s.eps), lr_one_minus_exp(q / s.eps))
    return lr_mul(lr_mul(scale, diff), LogReal.exp(-pt.G_at(s.alpha)))


def oracle_p3_right_derivative(spec: ProblemSpec, ptransform: Optional[PTransform] = None) -> LogReal:
    """``y'(1) = (q/eps) (P(beta) - P(alpha)) / (e^{q/eps} - 1) * exp(-G(beta))``."""
    q = _p3_q(spec)
    s = spec.params
    pt = ptransform or p3_transform(spec)
    diff = pt.integral(s.alpha, s.beta)
    if q == 0:
        scale = LogReal.from_real(1.0)
    elif q > 0:
        scale = lr_div(LogReal.from_real(q / s.eps), LogReal(1, log_expm1(q / s.eps)))
    else:
        # e^{q/eps} - 1 < 0 for q < 0; the ratio stays positive
        scale = lr_div(LogReal.from_real(-q / s.eps), lr_one_minus_exp(-q / s.eps))
    return lr_mul(lr_mul(scale, diff), LogReal.exp(-pt.G_at(s.beta)))


# --- Problem 4 -----------------------------------------------------------------


def oracle_p4(params: ScalarParams, z: float) -> float:
    """Self-similar profile ``W(z)``, written as ``eps ln(e^{beta/eps} erf + e^{alpha/eps} erfc)``."""
    if z < 0:
        raise ValueError("z must be non-negative")
    eps = params.eps
    arg = z / (2.0 * math.sqrt(eps))
    total = lr_add(LogReal(1, params.beta / eps + log_erf(arg)), LogReal(1, params.alpha / eps + log_erfc(arg)))
    if total.sign != 1:
        raise NonpositiveArgument(f"log argument {total!r} at z={z!r}")
    return eps * total.logmag


def oracle_p4_xt(params: ScalarParams, x: float, t: float) -> float:
    """``w(x, t) = W(x / sqrt(t))``."""
    if t <= 0 or x < 0:
        raise ValueError("need x >= 0 and t > 0")
    return oracle_p4(params, x / math.sqrt(t))


def oracle_p4_derivative(params: ScalarParams) -> LogReal:
    """``W'(0) = sqrt(eps/pi) (e^{(beta-alpha)/eps} - 1)`` as a LogReal."""
    eps = params.eps
    return lr_mul(LogReal(1, 0.5 * math.log(eps / math.pi)), lr_expm1((params.beta - params.alpha) / eps))


def exact_solution(spec: ProblemSpec, xs) -> np.ndarray:
    """Oracle values on a grid for any spec kind that has one (raises otherwise)."""
    xs = np.asarray(xs, dtype=float)
    if spec.kind == Kind.P1:
        return oracle_p1_grid(spec.params, xs)
    if spec.kind == Kind.P2:
        cp = p2_constant_params(spec)
        if cp is None:
            raise SpecError("P2 has a closed form only for constant q and r")
        return np.asarray(oracle_p2_constant(cp, xs))
    if spec.kind == Kind.P3:
        return np.asarray(oracle_p3_implicit(spec, xs))
    if spec.kind == Kind.P4:
        return np.array([oracle_p4(spec.params, float(z)) for z in xs])
    raise SpecError(f"no exact solution available for {spec.kind.value}")


def has_oracle(spec: ProblemSpec) -> bool:
    if spec.kind in (Kind.P1, Kind.P4):
        return True
    if spec.kind == Kind.P2:
        cp = p2_constant_params(spec)
        return cp is not None and cp.q * cp.q - 4 * cp.p * cp.r > 0
    if spec.kind == Kind.P3:
        return spec.constant_coeff("q") is not None
    return False

