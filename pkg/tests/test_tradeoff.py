import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghzcert.mabk import p_bounds
from ghzcert.tradeoff import (
    TradeoffSpec,
    f_max_linearized,
    f_piecewise,
    g,
    g_derivative,
    g_even,
    g_odd,
    tangent_coeffs,
)

SQ2 = math.sqrt(2)
PE = p_bounds(4)
PO = p_bounds(3)


def g_oracle(omega, even, dps=50):
    """High-precision scalar oracle for g_e / g_o."""
    with mpmath.workdps(dps):
        w = mpmath.mpf(omega)
        x = mpmath.mpf(1) / 2 - (2 * w - 1) / mpmath.sqrt(2) if even else 1 - 2 * w
        x = min(max(x, mpmath.mpf(0)), mpmath.mpf(1) / 2)
        if x == 0:
            return -1.0
        h = -x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2)
        return float(2 * h - 1)


def test_endpoints():
    assert g_even((2 + SQ2) / 4) == -1.0
    assert g_odd(0.5) == -1.0
    assert g_even(0.75) == pytest.approx(g_oracle(0.75, True), abs=1e-14)
    assert g_odd((2 + SQ2) / 8) == pytest.approx(g_even(0.75), abs=1e-14)


@pytest.mark.parametrize("w", np.linspace(PE[0], PE[1], 9))
def test_g_even_matches_oracle(w):
    assert g_even(w) == pytest.approx(g_oracle(w, True), abs=1e-12)


@pytest.mark.parametrize("w", np.linspace(PO[0], PO[1], 9))
def test_g_odd_matches_oracle(w):
    assert g_odd(w) == pytest.approx(g_oracle(w, False), abs=1e-12)


def test_range_checks():
    with pytest.raises(ValueError):
        g_even(0.5)
    with pytest.raises(ValueError):
        g_odd(0.9)
    with pytest.raises(ValueError):
        f_piecewise(0.4, 1.0, 4)
    with pytest.raises(ValueError):
        tangent_coeffs(0.5 * PE[1], 0.5, 4)
    with pytest.raises(ValueError):
        TradeoffSpec(4, 4, 0.5, 0.3, 0.4)


def test_g_decreasing_and_derivative():
    w = np.linspace(PE[0], PE[1] - 1e-6, 200)
    assert np.all(np.diff(g(w, 4)) < 0)
    h = 1e-7
    for x in (0.76, 0.8, 0.84):
        fd = (g(x + h, 4) - g(x - h, 4)) / (2 * h)
        assert g_derivative(x, 4) == pytest.approx(fd, rel=1e-5)
    for x in (0.41, 0.45, 0.49):
        fd = (g(x + h, 3) - g(x - h, 3)) / (2 * h)
        assert g_derivative(x, 3) == pytest.approx(fd, rel=1e-5)
    assert g_derivative(PE[1], 4) == -np.inf


def test_f_piecewise_branches():
    gamma = 0.5
    assert f_piecewise(0.0, gamma, 4) == pytest.approx(0.5)  # g clamps to 1 below p_min
    assert f_piecewise(gamma * PE[1], gamma, 4) == pytest.approx(-0.5)
    assert f_piecewise(gamma, gamma, 4) == pytest.approx(gamma - 1)
    assert f_piecewise(0.4, gamma, 4) == pytest.approx((1 - gamma) * g_even(0.8))


def test_tangent_line_touches():
    gamma = 0.5
    for pt in np.linspace(gamma * PE[0] + 1e-3, gamma * PE[1] - 1e-3, 5):
        t = tangent_coeffs(pt, gamma, 4)
        assert t.a < 0
        assert t.a * pt + t.b == pytest.approx(f_piecewise(pt, gamma, 4), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 4, 5]), st.floats(0.05, 0.95), st.floats(0.001, 0.999), st.floats(0.0, 1.0))
def test_fmax_dominates_f(M, gamma, s, u):
    lo, hi = p_bounds(M)
    pt = gamma * (lo + s * (hi - lo))
    p1 = gamma * u
    assert f_max_linearized(p1, pt, gamma, M) >= f_piecewise(p1, gamma, M) - 1e-12


def test_fmax_equals_f_below_tangent_point():
    gamma, pt = 0.5, 0.41
    p1 = np.linspace(0, pt, 50)
    assert np.allclose(f_max_linearized(p1, pt, gamma, 4), f_piecewise(p1, gamma, 4))


def test_spec_record():
    s = TradeoffSpec(4, 3, 0.5, 0.42, 0.41)
    assert s.f() == pytest.approx(f_piecewise(0.42, 0.5, 4))
    assert s.f_max() >= s.f()
    assert s.tangent().a < 0
