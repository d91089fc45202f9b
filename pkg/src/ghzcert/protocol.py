"""Monte Carlo round engine for the entanglement-test protocol and its Jordan-projection variant.

Randomness: every (seed, trial) pair keys a Philox counter-based generator,
and round j consumes exactly the four uniforms in row j of an (n, 4) draw
(test flag, input, output, block label). Round j therefore depends only on
the key and j, and both protocol variants see the same test-round stream.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.stats import binomtest

from .certify import CertificationParams, RateCertificate, certified_rate
from .ghz import SourceModel, bitstrings, make_source
from .jordan import apply_block_projection, block_distribution, jordan_decompose
from .mabk import ObservablePair, equatorial_pair, optimal_observables, outcome_distribution, unroll_coefficients
from .qmath import DensityMatrix

PERP = -1  # stands for the bottom symbol in integer arrays
STORE_MAX_N = 1000
STORE_MAX_M = 4
DEVICE_KINDS = ("honest-optimal", "fixed-angles", "classical-deterministic")


def round_generator(seed: int, trial: int = 0) -> np.random.Generator:
    if not 0 <= seed < 2**64 or not 0 <= trial < 2**64:
        raise ValueError("seed and trial must be 64-bit nonnegative integers")
    return np.random.Generator(np.random.Philox(key=seed + (trial << 64)))


@dataclass(frozen=True)
class DeviceModel:
    kind: str
    M: int
    observables: tuple | None = None
    strategy: Mapping[str, str] | None = None  # x -> a, classical kind only

    def __post_init__(self):
        if self.kind not in DEVICE_KINDS:
            raise ValueError(f"unknown device kind {self.kind!r}")
        if self.M < 2:
            raise ValueError("need M >= 2")
        if self.kind == "classical-deterministic":
            table = dict(self.strategy) if self.strategy is not None else {}
            for x in bitstrings(self.M):
                table.setdefault(x, "0" * self.M)
            for x, a in table.items():
                if len(x) != self.M or len(a) != self.M or set(x + a) - {"0", "1"}:
                    raise ValueError(f"bad strategy entry {x!r} -> {a!r}")
            object.__setattr__(self, "strategy", table)
            return
        obs = self.observables
        if obs is None:
            if self.kind == "fixed-angles":
                raise ValueError("fixed-angles device needs observables")
            obs = optimal_observables(self.M)
        obs = tuple(p if isinstance(p, ObservablePair) else ObservablePair(*p) for p in obs)
        if len(obs) != self.M:
            raise ValueError(f"expected {self.M} observable pairs")
        object.__setattr__(self, "observables", obs)

    @classmethod
    def from_angles(cls, angles: Sequence[tuple[float, float]]) -> "DeviceModel":
        return cls("fixed-angles", len(angles), tuple(equatorial_pair(t0, t1) for t0, t1 in angles))

    @property
    def quantum(self) -> bool:
        return self.kind != "classical-deterministic"

    def outcome_table(self, rho: DensityMatrix) -> np.ndarray:
        """P[x, a] for every input x and output a (both as integers, MSB = party 0)."""
        xs = bitstrings(self.M)
        if not self.quantum:
            P = np.zeros((len(xs), len(xs)))
            for i, x in enumerate(xs):
                P[i, int(self.strategy[x], 2)] = 1.0
            return P
        if rho.dims != tuple(p.dim for p in self.observables):
            raise ValueError(f"source dims {rho.dims} do not match device dims")
        return np.array([outcome_distribution(rho, self.observables, x) for x in xs])


@dataclass(frozen=True)
class RoundRecord:
    j: int
    T: int
    X: tuple | None
    A: tuple | None
    D: tuple | None
    W: int | None

    def __post_init__(self):
        if self.T == 0 and not (self.X is None and self.A is None and self.W is None):
            raise ValueError("storage round must have X = A = W = perp")
        if self.T == 1 and (self.D is not None or self.W is None):
            raise ValueError("test round must have D = perp and W set")

    def to_dict(self) -> dict:
        return {"j": self.j, "T": self.T, "X": self.X, "A": self.A, "D": self.D, "W": self.W}


def _row(v) -> tuple | None:
    return None if v[0] == PERP else tuple(int(b) for b in v)


@dataclass
class Transcript:
    params: CertificationParams
    seed: int
    trial: int
    protocol: int
    T: np.ndarray  # (n,) int8
    X: np.ndarray  # (n, M) int8, PERP on storage rounds
    A: np.ndarray
    D: np.ndarray  # (n, M) int16, PERP unless a protocol-2 storage round
    W: np.ndarray  # (n,) int8 in {1, 0, PERP}
    stored_states: dict | None = None
    warnings: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.T)

    @property
    def W_total(self) -> int:
        return int(np.sum(self.W == 1))

    @property
    def aborted(self) -> bool:
        return self.W_total < self.params.abort_threshold

    @property
    def tests(self) -> int:
        return int(np.sum(self.T))

    @property
    def empirical_omega(self) -> float:
        return self.W_total / self.tests if self.tests else float("nan")

    def record(self, j: int) -> RoundRecord:
        return RoundRecord(
            j, int(self.T[j]), _row(self.X[j]), _row(self.A[j]), _row(self.D[j]),
            None if self.W[j] == PERP else int(self.W[j]),
        )

    @property
    def rounds(self) -> Iterator[RoundRecord]:
        return (self.record(j) for j in range(self.n))

    def summary(self) -> dict:
        p = self.params
        return {
            "summary": True,
            "protocol": self.protocol,
            "seed": self.seed,
            "trial": self.trial,
            "n": self.n,
            "M": p.M,
            "gamma": p.gamma,
            "omega_exp": p.omega_exp,
            "delta_est": p.delta_est,
            "tests": self.tests,
            "W_total": self.W_total,
            "abort_threshold": p.abort_threshold,
            "aborted": self.aborted,
            "empirical_omega": None if self.tests == 0 else self.empirical_omega,
            "warnings": list(self.warnings),
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_dict(), separators=(",", ":")) for r in self.rounds]
        lines.append(json.dumps(self.summary(), sort_keys=True, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _sample_index(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling; rows of ``cdf`` are cumulative sums ending at 1."""
    idx = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(idx, cdf.shape[-1] - 1)


def _normalized_cdf(P: np.ndarray, notes: list) -> np.ndarray:
    P = np.clip(P, 0.0, None)
    sums = P.sum(axis=-1, keepdims=True)
    if np.any(np.abs(sums - 1) > 1e-9):
        notes.append(f"outcome probabilities renormalized (max deviation {np.max(np.abs(sums - 1)):.2e})")
    if np.any(sums <= 0):
        raise ValueError("an input has an all-zero outcome distribution")
    cdf = np.cumsum(P / sums, axis=-1)
    cdf[..., -1] = 1.0
    return cdf


def _bits_matrix(values: np.ndarray, M: int) -> np.ndarray:
    shifts = np.arange(M - 1, -1, -1)
    return ((values[:, None] >> shifts) & 1).astype(np.int8)


def _win_table(M: int) -> np.ndarray:
    """win[x, a] = 1 iff the input is played and parity(a) = f(x); perp inputs count as lost."""
    coeffs = unroll_coefficients(M)
    xs = bitstrings(M)
    parity = np.array([bin(a).count("1") % 2 for a in range(2**M)])
    win = np.zeros((len(xs), len(xs)), dtype=np.int8)
    for i, x in enumerate(xs):
        fx = coeffs.f[x]
        if fx is not None:
            win[i] = parity == fx
    return win


def _check_models(source: SourceModel, device: DeviceModel, params: CertificationParams):
    if not source.M == device.M == params.M:
        raise ValueError("source, device and params disagree on M")


def _test_rounds(u: np.ndarray, gamma: float, cdf: np.ndarray, win: np.ndarray, M: int):
    T = (u[:, 0] < gamma).astype(np.int8)
    x = np.minimum((u[:, 1] * 2**M).astype(np.int64), 2**M - 1)
    a = _sample_index(cdf[x], u[:, 2])
    W = np.where(T == 1, win[x, a], PERP).astype(np.int8)
    return T, x, a, W


def _run(source, device, params, seed, trial, projection: bool) -> Transcript:
    _check_models(source, device, params)
    M, n = params.M, params.n
    rho = make_source(source)
    notes: list = []
    cdf = _normalized_cdf(device.outcome_table(rho), notes)
    u = round_generator(seed, trial).random((n, 4))
    T, x, a, W = _test_rounds(u, params.gamma, cdf, _win_table(M), M)

    test = T == 1
    X = np.full((n, M), PERP, dtype=np.int8)
    A = np.full((n, M), PERP, dtype=np.int8)
    X[test] = _bits_matrix(x[test], M)
    A[test] = _bits_matrix(a[test], M)
    D = np.full((n, M), PERP, dtype=np.int16)

    keep = n <= STORE_MAX_N and M <= STORE_MAX_M
    stored = {} if keep else None
    store = np.flatnonzero(~test)
    if projection:
        if not device.quantum:
            raise ValueError("the projection variant needs a quantum device")
        decomps = [jordan_decompose(p) for p in device.observables]
        probs = block_distribution(rho, decomps)
        shape = probs.shape
        flat_cdf = _normalized_cdf(probs.reshape(1, -1), notes)[0]
        labels = _sample_index(flat_cdf[None, :], u[store, 3])
        D[store] = np.array(np.unravel_index(labels, shape), dtype=np.int16).T.reshape(-1, M)
        if keep:
            cache = {}
            for j in store:
                lab = tuple(int(d) for d in D[j])
                if lab not in cache:
                    cache[lab] = apply_block_projection(rho, decomps, lab)[0]
                stored[int(j)] = cache[lab]
    elif keep:
        stored = {int(j): rho for j in store}

    for msg in notes:
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
    return Transcript(params, seed, trial, 2 if projection else 1, T, X, A, D, W, stored, notes)


def run_protocol(source: SourceModel, device: DeviceModel, params: CertificationParams, seed: int, trial: int = 0) -> Transcript:
    """Simulate n rounds: test with probability gamma, otherwise store the source state."""
    return _run(source, device, params, seed, trial, projection=False)


def run_protocol_with_projection(
    source: SourceModel, device: DeviceModel, params: CertificationParams, seed: int, trial: int = 0
) -> Transcript:
    """As :func:`run_protocol`, but storage rounds also measure the Jordan-block instrument."""
    return _run(source, device, params, seed, trial, projection=True)


def certificate_for(transcript: Transcript) -> RateCertificate | None:
    """Certified rate for an accepted transcript; None when the protocol aborted."""
    if transcript.aborted:
        return None
    return certified_rate(transcript.params)


@dataclass(frozen=True)
class AbortEstimate:
    rate: float
    interval: tuple[float, float]
    aborts: int
    trials: int


def estimate_abort_probability(
    source: SourceModel,
    device: DeviceModel,
    params: CertificationParams,
    trials: int,
    seed: int,
    protocol: int = 1,
) -> AbortEstimate:
    """Monte Carlo abort frequency with a 95% Wilson interval.

    Trial t uses the same stream as ``run_protocol(..., seed, trial=t)``.
    Test rounds are identical in both protocol variants, so ``protocol``
    only selects which transcript type the trials correspond to.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    if protocol not in (1, 2):
        raise ValueError("protocol must be 1 or 2")
    _check_models(source, device, params)
    if protocol == 2 and not device.quantum:
        raise ValueError("the projection variant needs a quantum device")
    M = params.M
    cdf = _normalized_cdf(device.outcome_table(make_source(source)), [])
    win = _win_table(M)
    aborts = 0
    for t in range(trials):
        u = round_generator(seed, t).random((params.n, 4))
        W = _test_rounds(u, params.gamma, cdf, win, M)[3]
        aborts += int(np.sum(W == 1) < params.abort_threshold)
    ci = binomtest(aborts, trials).proportion_ci(0.95, method="wilson")
    return AbortEstimate(aborts / trials, (float(ci.low), float(ci.high)), aborts, trials)
