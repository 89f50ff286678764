"""Log-domain arithmetic and special functions.

Every closed-form solution in this package contains factors such as
``exp(alpha*p/eps)`` that overflow a double long before ``eps`` gets
interesting.  Values are therefore carried as :class:`LogReal` pairs
``(sign, ln|value|)`` and only collapsed to floats at the very end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import (
    DivideByZero,
    LnOfNonpositive,
    NonFiniteExponent,
    QuadratureError,
)

_SQRT_PI = math.sqrt(math.pi)
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class LogReal:
    """Signed real number stored as ``sign * exp(logmag)``.

    ``sign == 0`` is an exact zero; its ``logmag`` is ``-inf`` by convention.
    """

    sign: int
    logmag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "logmag", -math.inf)
        elif not math.isfinite(self.logmag):
            if self.logmag == -math.inf:
                object.__setattr__(self, "sign", 0)
            else:
                raise ValueError(f"non-finite logmag {self.logmag!r}")

    @classmethod
    def from_real(cls, x: float) -> "LogReal":
        if x == 0:
            return ZERO
        if not math.isfinite(x):
            raise ValueError(f"cannot represent {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def exp(cls, t: float) -> "LogReal":
        """``e**t`` without overflow."""
        return cls(1, t)

    def to_real(self) -> float:
        """Collapse to a float; may overflow to ``inf`` or underflow to 0."""
        if self.sign == 0:
            return 0.0
        try:
            return self.sign * math.exp(self.logmag)
        except OverflowError:
            return self.sign * math.inf

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> "LogReal":
        return LogReal(-self.sign, self.logmag)

    def __add__(self, other: "LogReal") -> "LogReal":
        return lr_add(self, other)

    def __sub__(self, other: "LogReal") -> "LogReal":
        return lr_add(self, -other)

    def __mul__(self, other: "LogReal") -> "LogReal":
        return lr_mul(self, other)

    def __truediv__(self, other: "LogReal") -> "LogReal":
        return lr_div(self, other)

    def __repr__(self):
        s = {1: "+", -1: "-", 0: "0"}[self.sign]
        return f"LogReal({s}, {self.logmag!r})"


ZERO = LogReal(0, -math.inf)
ONE = LogReal(1, 0.0)


def lr_add(a: LogReal, b: LogReal) -> LogReal:
    """Signed log-sum-exp of two values."""
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    if a.logmag < b.logmag:
        a, b = b, a
    d = b.logmag - a.logmag  # <= 0
    if a.sign == b.sign:
        return LogReal(a.sign, a.logmag + math.log1p(math.exp(d)))
    if d == 0.0:
        return ZERO
    return LogReal(a.sign, a.logmag + log1mexp(-d))


def lr_sum(terms) -> LogReal:
    """Sum of many LogReals, shifted by the largest magnitude and added with ``fsum``.

    Exact cancellation is only detected when the scaled terms cancel exactly;
    callers that know the algebraic structure should group terms so that no
    catastrophic cancellation is left for this routine.
    """
    terms = [t for t in terms if t.sign != 0]
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    if len(terms) == 2:
        return lr_add(terms[0], terms[1])
    m = max(t.logmag for t in terms)
    s = math.fsum(t.sign * math.exp(t.logmag - m) for t in terms)
    if s == 0.0:
        return ZERO
    return LogReal(1 if s > 0 else -1, m + math.log(abs(s)))


def lr_mul(a: LogReal, b: LogReal) -> LogReal:
    if a.sign == 0 or b.sign == 0:
        return ZERO
    return LogReal(a.sign * b.sign, a.logmag + b.logmag)


def lr_div(a: LogReal, b: LogReal) -> LogReal:
    if b.sign == 0:
        raise DivideByZero("division by a zero LogReal")
    if a.sign == 0:
        return ZERO
    return LogReal(a.sign * b.sign, a.logmag - b.logmag)


def lr_ln(a: LogReal) -> float:
    if a.sign != 1:
        raise LnOfNonpositive(f"ln of non-positive value {a!r}")
    return a.logmag


def lr_scale(a: LogReal, c: float) -> LogReal:
    """``a * c`` for a plain float ``c``."""
    return lr_mul(a, LogReal.from_real(c))


# --- scalar helpers --------------------------------------------------------


def log1mexp(t: float) -> float:
    """``ln(1 - exp(-t))`` for ``t >= 0`` (``-inf`` at 0)."""
    if t < 0:
        raise ValueError("log1mexp needs t >= 0")
    if t == 0:
        return -math.inf
    if t < _LN2:
        return math.log(-math.expm1(-t))
    return math.log1p(-math.exp(-t))


def log_expm1(t: float) -> float:
    """``ln(exp(t) - 1)`` for ``t > 0``."""
    if t <= 0:
        if t == 0:
            return -math.inf
        raise ValueError("log_expm1 needs t >= 0")
    if t > 40.0:
        return t + math.log1p(-math.exp(-t))
    return math.log(math.expm1(t))


def lr_expm1(t: float) -> LogReal:
    """``exp(t) - 1`` as a LogReal, exact in sign and accurate for all ``t``."""
    if t == 0:
        return ZERO
    if t > 0:
        return LogReal(1, log_expm1(t))
    return LogReal(-1, log1mexp(-t))


def lr_one_minus_exp(s: float) -> LogReal:
    """``1 - exp(-s)`` as a LogReal."""
    return -lr_expm1(-s)


# --- error function --------------------------------------------------------

_SERIES_CUTOFF = 2.0


def _erf_series_sum(x: float) -> float:
    # erf(x) = 2x/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!, all terms positive
    x2 = 2.0 * x * x
    term = 1.0
    total = 1.0
    n = 0
    while True:
        n += 1
        term *= x2 / (2 * n + 1)
        total += term
        if term < 1e-17 * total:
            return total


def erfcx_cf(x: float) -> float:
    """Scaled complementary error function ``exp(x^2) erfc(x)`` for ``x >= 2``.

    Continued fraction evaluated with the modified Lentz algorithm.
    """
    tiny = 1e-300
    f = x
    c = f
    d = 0.0
    for k in range(1, 5000):
        a = 0.5 * k
        d = x + a * d
        if d == 0.0:
            d = tiny
        d = 1.0 / d
        c = x + a / c
        if c == 0.0:
            c = tiny
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return 1.0 / (_SQRT_PI * f)


def erf(x: float) -> float:
    """Error function, absolute error below 1e-14 on the real line."""
    if math.isnan(x):
        return math.nan
    ax = abs(x)
    if ax <= _SERIES_CUTOFF:
        v = 2.0 * ax / _SQRT_PI * math.exp(-ax * ax) * _erf_series_sum(ax)
    elif ax > 6.5:
        v = 1.0
    else:
        v = 1.0 - math.exp(-ax * ax) * erfcx_cf(ax)
    return v if x >= 0 else -v


def erfc(x: float) -> float:
    if x <= _SERIES_CUTOFF:
        return 1.0 - erf(x)
    if x > 27.3:
        return 0.0
    return math.exp(-x * x) * erfcx_cf(x)


def log_erf(x: float) -> float:
    """``ln erf(x)`` for ``x >= 0``, accurate at both ends."""
    if x < 0:
        raise ValueError("log_erf needs x >= 0")
    if x == 0:
        return -math.inf
    if x <= _SERIES_CUTOFF:
        return math.log(2.0 * x / _SQRT_PI) - x * x + math.log(_erf_series_sum(x))
    return math.log1p(-erfc(x))


def log_erfc(x: float) -> float:
    """``ln erfc(x)`` on the real line, no underflow for large ``x``."""
    if x <= _SERIES_CUTOFF:
        return math.log1p(-erf(x))
    return -x * x + math.log(erfcx_cf(x))


# --- quadrature ------------------------------------------------------------


def _simpson_adapt(f, a, fa, m, fm, b, fb, whole, eps, depth, max_depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if abs(delta) <= 15.0 * eps:
        return left + right + delta / 15.0
    if depth >= max_depth:
        raise QuadratureError(f"no convergence on [{a!r}, {b!r}] within depth {max_depth}")
    return _simpson_adapt(f, a, fa, lm, flm, m, fm, left, 0.5 * eps, depth + 1, max_depth) + _simpson_adapt(
        f, m, fm, rm, frm, b, fb, right, 0.5 * eps, depth + 1, max_depth
    )


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    abs_tol: float,
    max_depth: int = 40,
    panels: int = 1,
) -> float:
    """Adaptive Simpson quadrature of a real integrand with absolute tolerance."""
    if a == b:
        return 0.0
    total = 0.0
    edges = [a + (b - a) * k / panels for k in range(panels + 1)]
    edges[-1] = b
    eps = abs_tol / panels
    fe = [f(e) for e in edges]
    for k in range(panels):
        lo, hi = edges[k], edges[k + 1]
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        whole = (hi - lo) / 6.0 * (fe[k] + 4.0 * fm + fe[k + 1])
        total += _simpson_adapt(f, lo, fe[k], mid, fm, hi, fe[k + 1], whole, eps, 0, max_depth)
    return total


class _ShiftRestart(Exception):
    def __init__(self, peak):
        self.peak = peak


def log_domain_integral(
    g: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    max_depth: int = 40,
    panels: int = 32,
) -> LogReal:
    """``ln`` of ``integral_a^b exp(g(z)) dz`` returned as a positive LogReal.

    The integrand is rescaled by the largest exponent seen so it never leaves
    double range; ``tol`` is relative to the integral.
    """
    if a > b:
        raise ValueError(f"need a <= b, got [{a!r}, {b!r}]")
    if a == b:
        return LogReal(0, -math.inf)

    def checked(z):
        v = g(z)
        if not math.isfinite(v):
            raise NonFiniteExponent(f"exponent is {v!r} at z={z!r}")
        return v

    samples = [checked(a + (b - a) * k / (2 * panels)) for k in range(2 * panels + 1)]
    shift = max(samples)
    h = (b - a) / (2 * panels)
    coarse = h / 3.0 * math.fsum(
        (1 if k in (0, 2 * panels) else (4 if k % 2 else 2)) * math.exp(s - shift)
        for k, s in enumerate(samples)
    )

    for _ in range(20):
        scale = coarse if coarse > 0 else 1.0

        def f(z, shift=shift):
            e = checked(z) - shift
            if e > 30.0:
                raise _ShiftRestart(e + shift)
            return math.exp(e)

        try:
            value = adaptive_simpson(f, a, b, tol * scale, max_depth, panels)
        except _ShiftRestart as r:
            shift = r.peak
            coarse = 0.0
            continue
        if value <= 0:
            raise QuadratureError("integral of a positive function came out non-positive")
        if coarse > 0 and value >= 0.5 * coarse:
            return LogReal(1, shift + math.log(value))
        coarse = value
    raise QuadratureError("rescaling did not settle")
