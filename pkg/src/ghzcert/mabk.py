"""MABK operators, the MABK game, and the bipartition factorization check."""
from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .qmath import PAULI_X, PAULI_Y, DensityMatrix, kron

SQRT2 = np.sqrt(2.0)
OBS_TOL = 1e-10


@dataclass(frozen=True)
class ObservablePair:
    """Two +-1-valued Hermitian observables of one party (settings 0 and 1)."""

    O0: np.ndarray
    O1: np.ndarray

    def __post_init__(self):
        mats = []
        for name in ("O0", "O1"):
            o = np.array(getattr(self, name), dtype=complex)
            if o.ndim != 2 or o.shape[0] != o.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.max(np.abs(o - o.conj().T)) > OBS_TOL:
                raise ValueError(f"{name} is not Hermitian")
            if np.max(np.abs(o @ o - np.eye(o.shape[0]))) > OBS_TOL:
                raise ValueError(f"{name} does not square to the identity")
            o.setflags(write=False)
            object.__setattr__(self, name, o)
            mats.append(o)
        if mats[0].shape != mats[1].shape:
            raise ValueError("O0 and O1 must have the same dimension")

    @property
    def dim(self) -> int:
        return self.O0.shape[0]

    def __getitem__(self, b: int) -> np.ndarray:
        return self.O1 if b else self.O0

    def swapped(self) -> "ObservablePair":
        return ObservablePair(self.O1, self.O0)


def equatorial(theta: float) -> np.ndarray:
    return np.cos(theta) * PAULI_X + np.sin(theta) * PAULI_Y


def equatorial_pair(theta0: float, theta1: float) -> ObservablePair:
    return ObservablePair(equatorial(theta0), equatorial(theta1))


def random_equatorial_parties(M: int, rng: np.random.Generator) -> list[ObservablePair]:
    return [equatorial_pair(*rng.uniform(0, 2 * np.pi, size=2)) for _ in range(M)]


def _F(B0, B1, C0, C1):
    return np.kron(B0, C0 + C1) + np.kron(B1, C0 - C1)


def mabk_pair(parties: Sequence[ObservablePair]) -> tuple[np.ndarray, np.ndarray]:
    """(K_M, Kbar_M) built by appending one party at a time on the right."""
    if not parties:
        raise ValueError("need at least one party")
    K, Kbar = parties[0].O0, parties[0].O1
    for p in parties[1:]:
        K, Kbar = 0.5 * _F(K, Kbar, p.O0, p.O1), 0.5 * _F(Kbar, K, p.O1, p.O0)
    return K, Kbar


def mabk_operator(parties: Sequence[ObservablePair]) -> np.ndarray:
    if len(parties) < 2:
        raise ValueError("the MABK operator needs M >= 2 parties")
    return mabk_pair(parties)[0]


# ---------------------------------------------------------------------------
# unrolled form


@dataclass(frozen=True)
class CoefficientTable:
    """K_M = scale * sum_x (-1)^f(x) O_{x_1} (x) ... (x) O_{x_M}, f(x) = None for the perp entries."""

    M: int
    f: dict
    scale: Fraction

    @property
    def support(self) -> list[str]:
        return [x for x, v in self.f.items() if v is not None]

    def sign(self, x: str) -> int:
        v = self.f[x]
        return 0 if v is None else (-1) ** v

    def signs(self) -> np.ndarray:
        return np.array([self.sign(x) for x in sorted(self.f)], dtype=float)

    def assemble(self, parties: Sequence[ObservablePair]) -> np.ndarray:
        if len(parties) != self.M:
            raise ValueError("party count does not match the table")
        out = 0
        for x in self.support:
            out = out + self.sign(x) * kron([p[int(b)] for p, b in zip(parties, x)])
        return float(self.scale) * out

    def to_json(self) -> str:
        return json.dumps(
            {
                "M": self.M,
                "scale": str(self.scale),
                "f": {x: ("perp" if v is None else v) for x, v in sorted(self.f.items())},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CoefficientTable":
        doc = json.loads(text)
        f = {x: (None if v == "perp" else int(v)) for x, v in doc["f"].items()}
        return cls(int(doc["M"]), f, Fraction(doc["scale"]))

    def with_flipped(self, x: str) -> "CoefficientTable":
        """Copy with one entry's sign flipped (mutation testing)."""
        f = dict(self.f)
        if f[x] is None:
            raise ValueError(f"entry {x} is perp and has no sign")
        f[x] = 1 - f[x]
        return CoefficientTable(self.M, f, self.scale)


@lru_cache(maxsize=None)
def unroll_coefficients(M: int) -> CoefficientTable:
    """Expand the MABK recursion symbolically over exact rationals.

    Every nonzero coefficient turns out to have the same magnitude; that
    magnitude is returned as ``scale`` instead of being assumed.
    """
    if not 2 <= M <= 10:
        raise ValueError("M must lie in [2, 10]")
    K = {"0": Fraction(1)}
    Kbar = {"1": Fraction(1)}
    half = Fraction(1, 2)
    for _ in range(M - 1):
        nK: dict[str, Fraction] = {}
        nKbar: dict[str, Fraction] = {}

        def add(table, x, c):
            table[x] = table.get(x, Fraction(0)) + c

        for x, c in K.items():
            # K (O0 + O1) into K, K (O1 - O0) into Kbar
            add(nK, x + "0", half * c)
            add(nK, x + "1", half * c)
            add(nKbar, x + "0", -half * c)
            add(nKbar, x + "1", half * c)
        for x, c in Kbar.items():
            # Kbar (O0 - O1) into K, Kbar (O1 + O0) into Kbar
            add(nK, x + "0", half * c)
            add(nK, x + "1", -half * c)
            add(nKbar, x + "0", half * c)
            add(nKbar, x + "1", half * c)
        K, Kbar = nK, nKbar

    mags = {abs(c) for c in K.values() if c != 0}
    if len(mags) != 1:
        raise ArithmeticError(f"non-uniform coefficient magnitudes {mags}")
    scale = mags.pop()
    f = {}
    for x in ("".join(b) for b in itertools.product("01", repeat=M)):
        c = K.get(x, Fraction(0))
        f[x] = None if c == 0 else (0 if c > 0 else 1)
    return CoefficientTable(M, f, scale)


# ---------------------------------------------------------------------------
# the game


class Outcome(enum.Enum):
    WON = "won"
    LOST = "lost"
    NOT_PLAYED = "not-played"


@dataclass(frozen=True)
class MabkGame:
    M: int
    parties: tuple
    coeffs: CoefficientTable = field(default=None)
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        parties = tuple(self.parties)
        if len(parties) != self.M:
            raise ValueError(f"expected {self.M} observable pairs, got {len(parties)}")
        object.__setattr__(self, "parties", parties)
        if self.coeffs is None:
            object.__setattr__(self, "coeffs", unroll_coefficients(self.M))
        if self.check:
            resid = np.linalg.norm(self.coeffs.assemble(parties) - mabk_operator(parties))
            if resid > 1e-10:
                raise ValueError(f"coefficient table disagrees with the recursion ({resid:.2e})")
            expected = 2**self.M if self.M % 2 == 0 else 2 ** (self.M - 1)
            if len(self.coeffs.support) != expected:
                raise ValueError("unexpected support size of the coefficient table")

    @classmethod
    def optimal(cls, M: int) -> "MabkGame":
        return cls(M, tuple(optimal_observables(M)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(p.dim for p in self.parties)

    def operator(self) -> np.ndarray:
        return mabk_operator(self.parties)


def _bits(x, M: int) -> str:
    if not isinstance(x, str):
        x = "".join(str(int(b)) for b in x)
    if len(x) != M or set(x) - {"0", "1"}:
        raise ValueError(f"expected {M} bits, got {x!r}")
    return x


def win_predicate(x, a, game: MabkGame) -> Outcome:
    x = _bits(x, game.M)
    a = _bits(a, game.M)
    fx = game.coeffs.f[x]
    if fx is None:
        return Outcome.NOT_PLAYED
    parity = sum(int(b) for b in a) % 2
    return Outcome.WON if parity == fx else Outcome.LOST


def _check_dims(rho: DensityMatrix, game: MabkGame):
    if rho.dims != game.dims:
        raise ValueError(f"state dims {rho.dims} do not match device dims {game.dims}")


def mabk_value(rho: DensityMatrix, game: MabkGame) -> float:
    """beta_M = 2^((4-M)/2) |Tr[K_M rho]| (beta_2 = 2|Tr[K_2 rho]| at M = 2)."""
    _check_dims(rho, game)
    t = np.trace(game.operator() @ rho.data)
    return float(2 ** ((4 - game.M) / 2) * abs(t))


def correlator(rho: DensityMatrix, game: MabkGame, x: str) -> float:
    op = kron([p[int(b)] for p, b in zip(game.parties, x)])
    return float(np.real(np.trace(op @ rho.data)))


def outcome_distribution(rho: DensityMatrix, parties: Sequence[ObservablePair], x: str) -> np.ndarray:
    """Born-rule distribution over output strings a (index = int(a, 2)) for input x.

    Outcome a_i = 0 is the +1 eigenspace of O_{x_i}.
    """
    rots, labels = [], []
    for p, b in zip(parties, x):
        w, v = np.linalg.eigh(p[int(b)])
        rots.append(v)
        labels.append((w < 0).astype(int))
    V = kron(rots)
    diag = np.real(np.einsum("ij,jk,ki->i", V.conj().T, rho.data, V))
    diag = diag.reshape([len(lab) for lab in labels])
    out = np.zeros((2,) * len(parties))
    for idx in itertools.product(*[range(len(lab)) for lab in labels]):
        out[tuple(lab[i] for lab, i in zip(labels, idx))] += diag[idx]
    return out.reshape(-1)


def winning_probability_exact(rho: DensityMatrix, game: MabkGame) -> float:
    """Winning probability with inputs uniform over all 2^M strings.

    Inputs whose table entry is perp cannot be won, so they count as losses.
    """
    _check_dims(rho, game)
    total = 0.0
    for x in game.coeffs.support:
        total += 0.5 * (1 + game.coeffs.sign(x) * correlator(rho, game, x))
    return total / 2**game.M


def p_bounds(M: int) -> tuple[float, float]:
    """Winning-probability range [p_min, p_max] for genuinely M-partite entangled states."""
    if M < 2:
        raise ValueError("need M >= 2")
    h = M // 2
    base = 2.0 ** (2 * h - M - 1)
    return base + 2.0 ** (h - M / 2 - 2), base + 2.0 ** (h - M / 2 - 1.5)


_SLACK = 1e-12


def beta_from_omega(omega: float, M: int) -> float:
    lo, hi = p_bounds(M)
    if not lo - _SLACK <= omega <= hi + _SLACK:
        raise ValueError(f"omega={omega} outside [{lo}, {hi}] for M={M}")
    if M % 2 == 0:
        return 8 * omega - 4
    return 8 * SQRT2 * omega - 2 * SQRT2


def omega_from_beta(beta: float, M: int) -> float:
    if not 2 - _SLACK <= beta <= 2 * SQRT2 + _SLACK:
        raise ValueError(f"beta={beta} outside [2, 2*sqrt(2)]")
    if M % 2 == 0:
        return (beta + 4) / 8
    return (beta + 2 * SQRT2) / (8 * SQRT2)


@dataclass(frozen=True)
class GameStats:
    omega: float
    beta: float
    M: int


def game_stats(rho: DensityMatrix, game: MabkGame) -> GameStats:
    return GameStats(winning_probability_exact(rho, game), mabk_value(rho, game), game.M)


# ---------------------------------------------------------------------------
# optimal settings


def _ghz_value(angles: np.ndarray, xs: np.ndarray, signs: np.ndarray) -> float:
    # <GHZ| (x)_i (cos t_i X + sin t_i Y) |GHZ> = cos(sum_i t_i)
    phase = angles[np.arange(xs.shape[1]), xs].sum(axis=1)
    return float(signs @ np.cos(phase))


@lru_cache(maxsize=None)
def optimal_angles(M: int, restarts: int = 16, seed: int = 2024) -> tuple:
    """Equatorial angles maximizing Tr[K_M GHZ] by exact coordinate ascent."""
    if not 2 <= M <= 8:
        raise ValueError("M must lie in [2, 8]")
    table = unroll_coefficients(M)
    keys = table.support
    xs = np.array([[int(b) for b in x] for x in keys])
    signs = np.array([table.sign(x) for x in keys], dtype=float)
    rng = np.random.default_rng(seed)
    best, best_val = None, -np.inf
    for _ in range(restarts):
        th = rng.uniform(0, 2 * np.pi, size=(M, 2))
        val = _ghz_value(th, xs, signs)
        for _sweep in range(10_000):
            old = val
            for i in range(M):
                for b in (0, 1):
                    rows = xs[:, i] == b
                    rest = th[np.arange(M), xs[rows]].sum(axis=1) - th[i, b]
                    c = np.sum(signs[rows] * np.exp(1j * rest))
                    th[i, b] = -np.angle(c)
            val = _ghz_value(th, xs, signs)
            if val - old <= 1e-15:
                break
        if val > best_val:
            best, best_val = th.copy(), val
    return tuple(map(tuple, np.mod(best, 2 * np.pi)))


def optimal_observables(M: int) -> list[ObservablePair]:
    return [equatorial_pair(t0, t1) for t0, t1 in optimal_angles(M)]


# ---------------------------------------------------------------------------
# bipartition factorization


def tail_composites(parties: Sequence[ObservablePair], m: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite observables of the last m parties, built by prepending one party at a time.

    Starting from (O_0^M, O_1^M), each new party A on the left maps
    (C0, C1) to (F(A0, A1, C0, C1)/2, F(A1, A0, C1, C0)/2).
    """
    M = len(parties)
    if not 1 <= m <= M - 1:
        raise ValueError(f"cut parameter m must lie in [1, {M - 1}]")
    C0, C1 = parties[-1].O0, parties[-1].O1
    for A in reversed(parties[M - m : M - 1]):
        C0, C1 = 0.5 * _F(A.O0, A.O1, C0, C1), 0.5 * _F(A.O1, A.O0, C1, C0)
    return C0, C1


def verify_bipartition_factorization(M: int, m: int, parties: Sequence[ObservablePair]) -> float:
    """Frobenius residual of K_M - F(K_{M-m}, Kbar_{M-m}, C0, C1)/2."""
    if len(parties) != M:
        raise ValueError("party count does not match M")
    if not 1 <= m <= M - 1:
        raise ValueError(f"cut parameter m must lie in [1, {M - 1}]")
    K = mabk_operator(parties)
    head, head_bar = mabk_pair(parties[: M - m])
    C0, C1 = tail_composites(parties, m)
    return float(np.linalg.norm(K - 0.5 * _F(head, head_bar, C0, C1)))
