"""Completeness bound, the EAT second-order term, eta / eta_opt, and certified distillation rates."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import bisect

from .mabk import p_bounds
from .qmath import DensityMatrix, coherent_information, max_entropy_conditional
from .tradeoff import f_max_linearized, f_piecewise, tangent_coeffs

INV_PHI = (math.sqrt(5) - 1) / 2
REGISTER_DIMS = ("paper", "qubits")


@dataclass(frozen=True)
class CertificationParams:
    n: int
    gamma: float
    omega_exp: float
    delta_est: float
    eps_smo: float
    eps_snd: float
    M: int
    cut: int | None = None  # M' (parties on the certified side); defaults to M - 1
    register_dim: str = "paper"
    log_base: float = 2.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.M < 2:
            raise ValueError("need M >= 2")
        cut = self.M - 1 if self.cut is None else int(self.cut)
        if not 1 <= cut <= self.M - 1:
            raise ValueError(f"cut must lie in [1, {self.M - 1}]")
        object.__setattr__(self, "cut", cut)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.omega_exp <= 1.0:
            raise ValueError("omega_exp must lie in [0, 1]")
        if not 0.0 <= self.delta_est < 1.0:
            raise ValueError("delta_est must lie in [0, 1)")
        for name in ("eps_smo", "eps_snd"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.register_dim not in REGISTER_DIMS:
            raise ValueError(f"register_dim must be one of {REGISTER_DIMS}")

    @property
    def p1_threshold(self) -> float:
        """Smallest accepted winning frequency per round, omega_exp * gamma - delta_est."""
        return self.omega_exp * self.gamma - self.delta_est

    @property
    def abort_threshold(self) -> float:
        return self.p1_threshold * self.n

    def check_rate_domain(self):
        lo, hi = p_bounds(self.M)
        if not lo - 1e-12 <= self.omega_exp <= hi + 1e-12:
            raise ValueError(f"omega_exp={self.omega_exp} outside [{lo}, {hi}] for M={self.M}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("the rate engine needs gamma in (0, 1)")
        if self.p1_threshold < 0:
            raise ValueError("omega_exp * gamma - delta_est is negative")

    def smoothing_error(self) -> float:
        """8 * 3^(M/2) * sqrt(eps_smo), the fidelity error of the distilled state."""
        return 8 * 3 ** (self.M / 2) * math.sqrt(self.eps_smo)


def completeness_bound(n: int, delta_est: float) -> float:
    """Hoeffding bound exp(-2 n delta^2) on the honest abort probability."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= delta_est < 1.0:
        raise ValueError("delta_est must lie in [0, 1)")
    return math.exp(-2 * n * delta_est**2)


def v_term(cut: int, a_ceil: float, eps_smo: float, eps_snd: float, register_dim: str = "paper") -> float:
    """Second-order EAT coefficient (multiplies sqrt(n)).

    ``register_dim="paper"`` uses log2(1 + 2M'); ``"qubits"`` uses
    log2(1 + 2 * 2^M') for M' genuine qubit registers.
    """
    if a_ceil < 0:
        raise ValueError("a_ceil must be nonnegative")
    if not (0 < eps_smo < 1 and 0 < eps_snd < 1):
        raise ValueError("eps_smo and eps_snd must lie in (0, 1)")
    prod = eps_smo * eps_snd
    if prod == 0.0:
        raise ValueError("eps_smo * eps_snd underflows to zero")
    if register_dim == "paper":
        dim_term = math.log2(1 + 2 * cut)
    elif register_dim == "qubits":
        dim_term = math.log2(1 + 2 * 2**cut)
    else:
        raise ValueError(f"unknown register_dim {register_dim!r}")
    return 2 * (dim_term + a_ceil) * math.sqrt(1 - 2 * math.log2(prod))


def eta(params: CertificationParams, pt1: float) -> float:
    """n f_max(omega_exp gamma - delta_est, pt1) + sqrt(n) v(pt1)."""
    params.check_rate_domain()
    q = params.p1_threshold
    a = tangent_coeffs(pt1, params.gamma, params.M).a
    first = params.n * f_max_linearized(q, pt1, params.gamma, params.M)
    # f decreases in p1, so the slope is negative; the EAT needs its magnitude
    a_ceil = math.ceil(abs(a))
    return first + math.sqrt(params.n) * v_term(
        params.cut, a_ceil, params.eps_smo, params.eps_snd, params.register_dim
    )


def golden_section_minimize(func, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section search on [lo, hi]; returns (x, f(x)) for the best point evaluated."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = func(c), func(d)
    best = min((fc, c), (fd, d))
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = func(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = func(d)
            best = min(best, (fd, d))
    return best[1], best[0]


def tangent_grid(params: CertificationParams, points: int = 512) -> np.ndarray:
    lo, hi = p_bounds(params.M)
    return np.linspace(params.gamma * lo, params.gamma * hi, points + 2)[1:-1]


def eta_opt(params: CertificationParams, grid_points: int = 512, tol: float = 1e-10) -> tuple[float, float]:
    """Minimum of eta over the open tangent-point interval, returned as (eta_opt, pt_star).

    A grid scan picks the best cell; golden-section search refines inside the
    two neighbouring cells. eta need not be unimodal (the slope is ceiled),
    so the grid minimum is kept if the refinement does not beat it.
    """
    params.check_rate_domain()
    grid = tangent_grid(params, grid_points)
    if len(grid) == 0:
        raise ValueError("empty tangent-point interval")
    vals = np.array([eta(params, pt) for pt in grid])
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_section_minimize(lambda pt: eta(params, pt), lo, hi, tol)
    if fx <= vals[i]:
        return float(fx), float(x)
    return float(vals[i]), float(grid[i])


@dataclass(frozen=True)
class RateCertificate:
    eta_opt: float
    rate_total: float
    rate_per_round: float
    pt_star: float
    leading_order_rate: float
    smoothing_error: float


def leading_order_rate(omega_exp: float, gamma: float, M: int, delta_est: float = 0.0) -> float:
    """Per-round certified rate with the sqrt(n) and smoothing terms dropped."""
    return -f_piecewise(omega_exp * gamma - delta_est, gamma, M) / (M - 1)


def leading_order_zero_crossing(gamma: float, M: int, delta_est: float = 0.0, xtol: float = 1e-12) -> float:
    """omega_exp at which the leading-order rate changes sign, by bisection over [p_min, p_max]."""
    lo, hi = p_bounds(M)
    return float(bisect(lambda w: leading_order_rate(w, gamma, M, delta_est), lo, hi, xtol=xtol))


def certified_rate(params: CertificationParams, grid_points: int = 512) -> RateCertificate:
    """Certified lower bound on the one-shot GHZ distillable entanglement of the accepted state.

    The cut is forced to M' = M - 1.
    """
    params = replace(params, cut=params.M - 1)
    params.check_rate_domain()
    err = params.smoothing_error()
    if not 0 < err < 1:
        raise ValueError(f"8*3^(M/2)*sqrt(eps_smo) = {err:.4g} must lie in (0, 1)")
    value, pt_star = eta_opt(params, grid_points)
    log_eps = math.log(params.eps_smo, params.log_base)
    total = (-value + 2 * log_eps) / (params.M - 1)
    return RateCertificate(
        eta_opt=value,
        rate_total=total,
        rate_per_round=total / params.n,
        pt_star=pt_star,
        leading_order_rate=leading_order_rate(params.omega_exp, params.gamma, params.M, params.delta_est),
        smoothing_error=err,
    )


# ---------------------------------------------------------------------------
# device-dependent distillation rates


def _proper_subsets(items):
    items = list(items)
    for r in range(1, len(items) + 1):
        yield from itertools.combinations(items, r)


def asymptotic_distill_rate(rho: DensityMatrix, M: int) -> float:
    """max_k min_{K subset of [M]\\{k}, K nonempty} I(A_K > A_rest) / |K|."""
    if rho.num_systems != M:
        raise ValueError("state must have M subsystems")
    cache: dict[tuple, float] = {}
    best = -math.inf
    for k in range(M):
        worst = math.inf
        for K in _proper_subsets(i for i in range(M) if i != k):
            if K not in cache:
                cache[K] = coherent_information(rho, K)
            worst = min(worst, cache[K] / len(K))
        best = max(best, worst)
    return best


def one_shot_distill_bound(rho: DensityMatrix, M: int, eps_prime: float, log_base: float = 2.0) -> float:
    """One-shot rate with the non-smooth H_max standing in for the smooth one.

    H^eps_max <= H_max, so the value is a valid lower bound on the smooth
    expression.
    """
    if M > 4:
        raise ValueError("one_shot_distill_bound is limited to M <= 4")
    if rho.num_systems != M:
        raise ValueError("state must have M subsystems")
    if not eps_prime > 0 or not 8 * 3 ** (M / 2) * math.sqrt(eps_prime) < 1:
        raise ValueError("need eps' > 0 with 8*3^(M/2)*sqrt(eps') < 1")
    cache: dict[tuple, float] = {}
    best = -math.inf
    for k in range(M):
        worst = math.inf
        for K in _proper_subsets(i for i in range(M) if i != k):
            if K not in cache:
                cache[K] = -max_entropy_conditional(rho, K)
            worst = min(worst, cache[K] / len(K))
        best = max(best, worst)
    return best + 2 * math.log(eps_prime, log_base) / (M - 1)
