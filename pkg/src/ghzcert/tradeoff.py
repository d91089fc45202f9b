"""Max-tradeoff machinery: g_e, g_o, the piecewise f and its tangent linearization f_max.

Functions accept scalars or numpy arrays. ``p1`` is the probability of the
outcome "test round won", so p1/gamma is a winning probability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mabk import p_bounds

SQRT2 = np.sqrt(2.0)
CLIP_SLACK = 1e-12
ARG_SNAP = 1e-14


def _h2(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x <= 0) | (x >= 1), 0.0, h)


def _dh2(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log2(1 - x) - np.log2(x)


def _g_argument(omega, M: int):
    omega = np.asarray(omega, dtype=float)
    if M % 2 == 0:
        x = 0.5 - (2 * omega - 1) / SQRT2
    else:
        x = 0.5 - (4 * omega - 1) / 2
    # at p_max the argument is 0 exactly; snap rounding residue so g hits -1
    x = np.where(np.abs(x) < ARG_SNAP, 0.0, x)
    return np.clip(x, 0.0, 0.5)


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def _check_range(omega, M: int):
    lo, hi = p_bounds(M)
    w = np.asarray(omega, dtype=float)
    if np.any(w < lo - CLIP_SLACK) or np.any(w > hi + CLIP_SLACK):
        raise ValueError(f"omega outside [{lo}, {hi}]")


def g_even(omega):
    _check_range(omega, 2)
    return _scalar(2 * _h2(_g_argument(omega, 2)) - 1)


def g_odd(omega):
    _check_range(omega, 3)
    return _scalar(2 * _h2(_g_argument(omega, 3)) - 1)


def g(omega, M: int):
    """Parity-appropriate g without the domain check (argument clamped to [0, 1/2])."""
    return _scalar(2 * _h2(_g_argument(omega, M)) - 1)


def g_derivative(omega, M: int):
    """dg/domega; -inf at p_max, 0 where the argument is clamped at 1/2."""
    x = _g_argument(omega, M)
    inner = -SQRT2 if M % 2 == 0 else -2.0
    d = 2 * inner * _dh2(x)
    return _scalar(np.where(x >= 0.5, 0.0, d))


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma={gamma} must lie in (0, 1)")


def f_piecewise(p1, gamma: float, M: int):
    """(1-gamma) g(p1/gamma) up to p_max, then the constant gamma - 1."""
    _check_gamma(gamma)
    w = np.asarray(p1, dtype=float) / gamma
    if np.any(w < -CLIP_SLACK) or np.any(w > 1 + CLIP_SLACK):
        raise ValueError("p1/gamma must lie in [0, 1]")
    _, hi = p_bounds(M)
    return _scalar(np.where(w <= hi, (1 - gamma) * (2 * _h2(_g_argument(w, M)) - 1), gamma - 1))


@dataclass(frozen=True)
class TangentCoeffs:
    a: float  # slope in bits per unit p1
    b: float  # intercept in bits


def _check_tangent_point(pt1: float, gamma: float, M: int):
    lo, hi = p_bounds(M)
    if not gamma * lo < pt1 < gamma * hi:
        raise ValueError(
            f"tangent point pt1={pt1} must lie strictly inside ({gamma * lo}, {gamma * hi}); "
            "the slope diverges at the knee"
        )


def tangent_coeffs(pt1: float, gamma: float, M: int) -> TangentCoeffs:
    _check_gamma(gamma)
    _check_tangent_point(pt1, gamma, M)
    a = (1 - gamma) / gamma * g_derivative(pt1 / gamma, M)
    b = f_piecewise(pt1, gamma, M) - a * pt1
    return TangentCoeffs(float(a), float(b))


def f_max_linearized(p1, pt1: float, gamma: float, M: int):
    """f below the tangent point, the tangent line above it.

    Past the knee the tangent line would drop under the constant branch
    gamma - 1 of f, so it is floored there. This keeps f_max >= f on all of
    [0, gamma] and does not change f_max anywhere below gamma * p_max.
    """
    t = tangent_coeffs(pt1, gamma, M)
    p1 = np.asarray(p1, dtype=float)
    f = f_piecewise(p1, gamma, M)
    line = np.maximum(t.a * p1 + t.b, gamma - 1)
    return _scalar(np.where(p1 <= pt1, f, line))


@dataclass(frozen=True)
class TradeoffSpec:
    M: int
    cut: int
    gamma: float
    p1: float
    pt1: float

    def __post_init__(self):
        if self.M < 2 or not 1 <= self.cut <= self.M - 1:
            raise ValueError("need M >= 2 and 1 <= cut <= M-1")
        _check_gamma(self.gamma)
        if not 0 <= self.p1 <= self.gamma:
            raise ValueError("p1 must lie in [0, gamma]")
        _check_tangent_point(self.pt1, self.gamma, self.M)

    def f(self) -> float:
        return f_piecewise(self.p1, self.gamma, self.M)

    def f_max(self) -> float:
        return f_max_linearized(self.p1, self.pt1, self.gamma, self.M)

    def tangent(self) -> TangentCoeffs:
        return tangent_coeffs(self.pt1, self.gamma, self.M)
