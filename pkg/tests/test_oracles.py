import math

import numpy as np
import pytest

from hypersingular.errors import SpecError
from hypersingular.oracles import (
    classify_layer,
    exact_solution,
    has_oracle,
    oracle_p1,
    oracle_p1_derivatives,
    oracle_p1_grid,
    oracle_p1_slopes,
    oracle_p2_constant,
    oracle_p3_implicit,
    oracle_p3_left_derivative,
    oracle_p3_right_derivative,
    oracle_p4,
    oracle_p4_derivative,
    oracle_p4_xt,
)
from hypersingular.problem import LayerClass, ScalarParams, make_spec

# 200-bit mpmath evaluations of the closed forms
P1_REF = [
    # (alpha, beta, eps, x, y)
    (0.0, 1.0, 0.1, 0.01, 0.76483085027228186282),
    (0.0, 1.0, 0.1, 0.5, 0.99932849574131556429),
    (0.0, 1.0, 0.01, 0.001, 0.97647831538955909142),
    (2.0, 0.0, 0.1, 0.9, 1.0541396673665245575),
    (1.0, 0.5, 0.1, 0.5, 0.5686431832070827277),
    (0.0, 2.0, 1e-3, 1e-3, 1.9995413248546129181),
    # solid curve of the figure: alpha=0, beta=2
    (0.0, 2.0, 0.1, 0.25, 1.9914394917402550036),
    (0.0, 2.0, 0.1, 0.5, 1.9993284651524769875),
    (0.0, 2.0, 0.1, 0.75, 1.9999492163583689398),
]
REMARK1 = {0.25: -0.2493330050410098796, 0.5: -0.43068982183392715552}  # eps=0.1, alpha=beta=0
REMARK1_B = -0.19987621584617115854  # eps=0.05, alpha=0, beta=0.3, x=0.5
P4_REF = 0.93022177975250785923  # eps=0.1, alpha=0, beta=1, z=0.3
P4_DERIV = 3929.6164694012625454
P3_LEFT_LOGMAG = 17.182863651068473854  # p = e^y + eps, q=1, eps=0.1, alpha=0, beta=1


def P(alpha, beta, eps, p=1.0, q=1.0, r=0.0):
    return ScalarParams(eps=eps, p=p, q=q, r=r, alpha=alpha, beta=beta)


@pytest.mark.parametrize("alpha,beta,eps,x,ref", P1_REF)
def test_p1_reference_values(alpha, beta, eps, x, ref):
    assert oracle_p1(P(alpha, beta, eps), x) == pytest.approx(ref, abs=1e-14)
    assert oracle_p1_grid(P(alpha, beta, eps), np.array([x]))[0] == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("eps", [1e-6, 1e-4, 1e-2, 1.0])
def test_p1_boundary_values(eps):
    for alpha, beta in [(0, 1), (2, 0), (1, 0.5), (-3, 7)]:
        s = P(alpha, beta, eps)
        assert abs(oracle_p1(s, 0.0) - alpha) <= 1e-12
        assert abs(oracle_p1(s, 1.0) - beta) <= 1e-12


def test_degenerate_lines():
    xs = np.linspace(0, 1, 101)
    assert np.all(oracle_p1_grid(P(0.7, 0.7, 0.01), xs) == 0.7)
    lin = oracle_p1_grid(P(1.0, 0.0, 0.01), xs)
    assert np.max(np.abs(lin - (1.0 - xs))) <= 1e-12
    left, right = oracle_p1_derivatives(P(0.7, 0.7, 0.1))
    assert left.is_zero and right.is_zero


def test_left_derivative_is_e_to_the_ten():
    left, right = oracle_p1_derivatives(P(0.0, 1.0, 0.1))
    assert left.sign == 1
    assert left.to_real() == pytest.approx(math.exp(10.0), rel=1e-12)
    assert left.to_real() == pytest.approx(22026.4658, rel=1e-9)
    _, right = oracle_p1_derivatives(P(2.0, 0.0, 0.1))
    assert right.to_real() == pytest.approx(-22027.465794806716517, rel=1e-12)


def test_derivatives_beyond_double_range():
    left, _ = oracle_p1_derivatives(P(0.0, 1.0, 1e-4))
    assert left.logmag == pytest.approx(1e4, rel=1e-15)


def test_classification():
    assert classify_layer(P(0, 2, 0.1)) == LayerClass.LEFT
    assert classify_layer(P(2, 0, 0.1)) == LayerClass.RIGHT
    assert classify_layer(P(1, 0.5, 0.1)) == LayerClass.NONE
    assert classify_layer(P(1, 1, 0.1)) == LayerClass.DEGENERATE_CONSTANT
    assert classify_layer(P(1, 0, 0.1)) == LayerClass.DEGENERATE_LINEAR


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_monotonicity(eps):
    xs = np.linspace(0, 1, 1001)
    assert np.all(np.diff(oracle_p1_grid(P(0, 1, eps), xs)) >= 0)
    assert np.all(np.diff(oracle_p1_grid(P(2, 0, eps), xs)) <= 0)


def test_max_slope_location():
    eps = 0.01
    xs = np.linspace(0, 1, 10_001)
    for alpha, beta, cls in [(0, 1, LayerClass.LEFT), (2, 0, LayerClass.RIGHT), (-1, 1.5, LayerClass.LEFT)]:
        s = P(alpha, beta, eps)
        assert classify_layer(s) == cls
        y = oracle_p1_grid(s, xs)
        slope = np.abs(np.gradient(y, xs))
        xm = xs[int(np.argmax(slope))]
        assert (xm <= 3 * eps) if cls == LayerClass.LEFT else (xm >= 1 - 3 * eps)


def test_difference_residual_is_second_order():
    s = P(0.0, 1.0, 0.1)

    def residual(h):
        x = np.arange(0.3, 0.9, h)
        ym, y0, yp = (oracle_p1_grid(s, x + d) for d in (-h, 0.0, h))
        d1 = (yp - ym) / (2 * h)
        d2 = (yp - 2 * y0 + ym) / (h * h)
        return np.max(np.abs(s.eps * d2 + s.p * d1 * d1 + s.q * d1))

    r1, r2 = residual(0.01), residual(0.005)
    assert 3.5 < r1 / r2 < 4.5


def test_traveling_wave_residual():
    # u(z, t) = -p y(z - q t) solves u_t + u_z^2 - eps u_zz = 0
    rng = np.random.default_rng(7)
    for alpha, beta in [(0, 1), (2, 0), (1, 0.5)]:
        s = P(alpha, beta, 0.1, p=1.5, q=0.8)
        for _ in range(100):
            z, t = rng.uniform(0, 1), rng.uniform(0, 1)
            xi = (z - s.q * t) % 1.0
            _, d1, d2 = oracle_p1_slopes(s, xi)
            u_t = s.p * s.q * d1
            u_z = -s.p * d1
            u_zz = -s.p * d2
            terms = (u_t, u_z * u_z, s.eps * u_zz)
            assert abs(u_t + u_z * u_z - s.eps * u_zz) <= 1e-8 * max(map(abs, terms))


def test_p2_reduces_to_p1():
    xs = np.linspace(0, 1, 41)
    for alpha, beta, eps in [(0, 1, 0.1), (2, 0, 0.01), (1, 0.5, 0.05)]:
        s = P(alpha, beta, eps)
        np.testing.assert_allclose(oracle_p2_constant(s, xs), oracle_p1_grid(s, xs), atol=1e-13)


def test_remark_one():
    s = P(0.0, 0.0, 0.1, p=1.0, q=0.0, r=-1.0)
    for x, ref in REMARK1.items():
        assert oracle_p2_constant(s, x) == pytest.approx(ref, abs=1e-14)
    assert oracle_p2_constant(s, 0.5) < oracle_p2_constant(s, 0.25) < 0
    s = P(0.0, 0.3, 0.05, p=1.0, q=0.0, r=-1.0)
    assert oracle_p2_constant(s, 0.5) == pytest.approx(REMARK1_B, abs=1e-14)
    for eps in (1e-6, 1e-3, 1.0):
        s = P(0.2, -0.4, eps, p=1.0, q=0.0, r=-1.0)
        assert abs(oracle_p2_constant(s, 0.0) - 0.2) <= 1e-12
        assert abs(oracle_p2_constant(s, 1.0) + 0.4) <= 1e-12


def test_exact_solution_dispatch():
    spec = make_spec("P2", 0.1, p=1, alpha=0, beta=0, coeffs={"q": "0", "r": "-1"})
    assert has_oracle(spec)
    assert exact_solution(spec, [0.5])[0] == pytest.approx(REMARK1[0.5], abs=1e-14)
    spec = make_spec("P2", 0.1, p=1, alpha=0, beta=1, coeffs={"q": "x", "r": "0"})
    assert not has_oracle(spec)
    with pytest.raises(SpecError):
        exact_solution(spec, [0.5])


def test_p3_constant_p_matches_p1():
    spec = make_spec("P3", 0.1, alpha=0, beta=1, coeffs={"p": "1", "q": "1"})
    xs = np.linspace(0, 1, 33)
    got = oracle_p3_implicit(spec, xs)
    np.testing.assert_allclose(got, oracle_p1_grid(P(0, 1, 0.1), xs), atol=1e-9)
    left = oracle_p3_left_derivative(spec)
    ref, _ = oracle_p1_derivatives(P(0, 1, 0.1))
    assert left.logmag == pytest.approx(ref.logmag, rel=1e-10)


def test_p3_exponential_p():
    spec = make_spec("P3", 0.1, alpha=0, beta=1, coeffs={"p": "exp(y)+eps", "q": "1"})
    xs = np.linspace(0, 1, 33)
    y = oracle_p3_implicit(spec, xs)
    assert y[0] == 0.0 and y[-1] == 1.0
    assert np.all(np.diff(y) >= 0)
    left = oracle_p3_left_derivative(spec)
    assert left.logmag == pytest.approx(P3_LEFT_LOGMAG, rel=1e-10)
    assert left.logmag == pytest.approx((math.e - 1) / 0.1, rel=0.02)
    right = oracle_p3_right_derivative(spec)
    assert right.sign == 1 and right.logmag < 0
    flat = make_spec("P3", 0.1, alpha=0.4, beta=0.4, coeffs={"p": "exp(y)+eps", "q": "1"})
    assert oracle_p3_left_derivative(flat).is_zero


def test_p4():
    s = P(0.0, 1.0, 0.1)
    assert abs(oracle_p4(s, 0.0)) <= 1e-12
    assert abs(oracle_p4(s, 20 * math.sqrt(0.1)) - 1.0) <= 1e-8
    assert oracle_p4(s, 0.3) == pytest.approx(P4_REF, abs=1e-14)
    assert oracle_p4_xt(s, 0.3 * 2.0, 4.0) == pytest.approx(P4_REF, abs=1e-14)
    assert oracle_p4_derivative(s).to_real() == pytest.approx(P4_DERIV, rel=1e-13)
    with pytest.raises(ValueError):
        oracle_p4(s, -1.0)
    tiny = P(0.0, 1.0, 1e-6)
    assert math.isfinite(oracle_p4(tiny, 1e-4)) and oracle_p4_derivative(tiny).logmag > 1e5
