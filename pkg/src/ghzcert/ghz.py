"""GHZ basis, GHZ-diagonal states, the CNOT reduction and Bell twirling."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .qmath import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    PureState,
    UnitaryMatrix,
    partial_trace,
)


def bitstrings(n: int) -> list[str]:
    """All n-bit strings in lexicographic order."""
    return ["".join(b) for b in itertools.product("01", repeat=n)]


def _basis_index(bits: str) -> int:
    return int(bits, 2) if bits else 0


def _flip(bits: str) -> str:
    return "".join("1" if b == "0" else "0" for b in bits)


def _as_bits(u, length: int) -> str:
    if not isinstance(u, str):
        u = "".join(str(int(b)) for b in u)
    if len(u) != length or set(u) - {"0", "1"}:
        raise ValueError(f"expected a bit string of length {length}, got {u!r}")
    return u


def ghz_basis_state(M: int, v: int, u) -> PureState:
    """(|0,u> + (-1)^v |1,~u>)/sqrt(2) on M qubits."""
    if M < 2:
        raise ValueError("need M >= 2")
    u = _as_bits(u, M - 1)
    psi = np.zeros(2**M, dtype=complex)
    psi[_basis_index("0" + u)] += 1 / np.sqrt(2)
    psi[_basis_index("1" + _flip(u))] += (-1) ** int(v) / np.sqrt(2)
    return PureState(psi, (2,) * M)


def ghz_rank_d(M: int, d: int = 2) -> PureState:
    if M < 2 or d < 2:
        raise ValueError("need M >= 2 and d >= 2")
    psi = np.zeros(d**M, dtype=complex)
    for i in range(d):
        psi[sum(i * d**k for k in range(M))] = 1 / np.sqrt(d)
    return PureState(psi, (d,) * M)


def ghz_state(M: int) -> DensityMatrix:
    return ghz_rank_d(M, 2).density()


@dataclass(frozen=True)
class GhzDiagonalSpec:
    """Weights of a state that is block diagonal in the GHZ basis.

    Tables are keyed by (M-1)-bit strings u. Each u contributes the 2x2 block
    [[lambda0[u], i s[u]], [-i s[u], lambda1[u]]] on span{psi_{0,u}, psi_{1,u}}.
    """

    M: int
    lambda0: Mapping[str, float]
    lambda1: Mapping[str, float]
    s: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("need M >= 2")
        keys = set(bitstrings(self.M - 1))
        for name in ("lambda0", "lambda1", "s"):
            table = {k: float(v) for k, v in dict(getattr(self, name)).items()}
            if set(table) - keys:
                raise ValueError(f"{name} has keys outside {{0,1}}^{self.M - 1}")
            for k in keys:
                table.setdefault(k, 0.0)
                if not 0.0 <= table[k] <= 1.0:
                    raise ValueError(f"{name}[{k}] = {table[k]} outside [0, 1]")
            object.__setattr__(self, name, table)
        total = sum(self.lambda0.values()) + sum(self.lambda1.values())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {total}, not 1")
        for u in keys:
            if self.s[u] ** 2 > self.lambda0[u] * self.lambda1[u] + 1e-12:
                raise ValueError(f"block {u} is not positive semidefinite")

    def to_json(self) -> str:
        return json.dumps(
            {"M": self.M, "lambda0": self.lambda0, "lambda1": self.lambda1, "s": self.s},
            sort_keys=True,
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "GhzDiagonalSpec":
        doc = json.loads(text)
        unknown = set(doc) - {"M", "lambda0", "lambda1", "s"}
        if unknown:
            raise ValueError(f"unknown keys {sorted(unknown)}")
        return cls(int(doc["M"]), doc["lambda0"], doc["lambda1"], doc.get("s", {}))

    @classmethod
    def werner(cls, M: int, visibility: float) -> "GhzDiagonalSpec":
        n = 2**M
        lam0 = {u: (1 - visibility) / n for u in bitstrings(M - 1)}
        lam1 = dict(lam0)
        lam0["0" * (M - 1)] += visibility
        return cls(M, lam0, lam1)


def ghz_diagonal_state(spec: GhzDiagonalSpec) -> DensityMatrix:
    M = spec.M
    rho = np.zeros((2**M, 2**M), dtype=complex)
    for u in bitstrings(M - 1):
        p0 = ghz_basis_state(M, 0, u).amplitudes
        p1 = ghz_basis_state(M, 1, u).amplitudes
        rho += spec.lambda0[u] * np.outer(p0, p0.conj())
        rho += spec.lambda1[u] * np.outer(p1, p1.conj())
        off = np.outer(p0, p1.conj())
        rho += 1j * spec.s[u] * (off - off.conj().T)
    return DensityMatrix(rho, (2,) * M)


def _cnot(n: int, control: int, target: int) -> np.ndarray:
    dim = 2**n
    u = np.zeros((dim, dim))
    for i in range(dim):
        bits = [(i >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        j = sum(b << (n - 1 - q) for q, b in enumerate(bits))
        u[j, i] = 1
    return u


def cnot_reduction_unitary(M: int, cut: int) -> UnitaryMatrix:
    """CNOT fan-outs that map each GHZ basis state to a Bell pair times a product state.

    Qubits 0..cut-1 form one side with control qubit 0; qubits cut..M-1 form
    the other side with control qubit ``cut``. The Bell pair sits on qubits
    (0, cut); every other qubit ends in a computational basis state.
    """
    if not 1 <= cut <= M - 1:
        raise ValueError(f"cut must lie in [1, {M - 1}]")
    u = np.eye(2**M)
    for t in range(1, cut):
        u = _cnot(M, 0, t) @ u
    for t in range(cut + 1, M):
        u = _cnot(M, cut, t) @ u
    return UnitaryMatrix(u)


# ordering: Phi+, Phi-, Psi+, Psi-
BELL_BASIS = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=complex,
).T / np.sqrt(2)


def to_bell_basis(rho: DensityMatrix) -> np.ndarray:
    """Matrix elements <B_i|rho|B_j> in the (Phi+, Phi-, Psi+, Psi-) ordering."""
    if rho.dims != (2, 2):
        raise ValueError("expected a two-qubit state")
    return BELL_BASIS.conj().T @ rho.data @ BELL_BASIS


_TWIRL_OPS = [np.kron(P, P) for P in (PAULI_X, PAULI_Y, PAULI_Z)]


def bell_twirl(rho: DensityMatrix) -> DensityMatrix:
    if rho.dims != (2, 2):
        raise ValueError("bell_twirl acts on two qubits")
    out = rho.data.copy()
    for P in _TWIRL_OPS:
        out = out + P @ rho.data @ P
    return DensityMatrix(out / 4, (2, 2))


SOURCE_KINDS = ("honest-werner", "custom-density-matrix", "classical-deterministic")


@dataclass(frozen=True)
class SourceModel:
    kind: str
    M: int
    visibility: float = 1.0
    state: DensityMatrix | None = None
    basis_state: str | None = None

    def __post_init__(self):
        if self.kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.M < 2:
            raise ValueError("need M >= 2")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")
        if self.kind == "custom-density-matrix":
            if self.state is None:
                raise ValueError("custom source needs a state")
            if self.state.num_systems != self.M:
                raise ValueError("custom state must have exactly M subsystems")
        if self.basis_state is not None:
            _as_bits(self.basis_state, self.M)


def make_source(model: SourceModel) -> DensityMatrix:
    M = model.M
    if model.kind == "honest-werner":
        v = model.visibility
        ghz = ghz_state(M).data
        return DensityMatrix(v * ghz + (1 - v) * np.eye(2**M) / 2**M, (2,) * M)
    if model.kind == "custom-density-matrix":
        return model.state
    bits = model.basis_state or "0" * M
    rho = np.zeros((2**M, 2**M), dtype=complex)
    rho[_basis_index(bits), _basis_index(bits)] = 1
    return DensityMatrix(rho, (2,) * M)


def control_pair_marginal(rho: DensityMatrix, cut: int) -> DensityMatrix:
    """Two-qubit marginal on the control qubits (0, cut) used by the CNOT reduction."""
    return partial_trace(rho, [0, cut])
