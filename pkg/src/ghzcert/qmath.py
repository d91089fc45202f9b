"""Dense linear algebra and entropy primitives for small multi-qubit systems.

All entropies are in bits. Subsystem indices are 0-based positions in
``dims``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
EIG_CLAMP = 1e-10


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine hits its iteration cap."""

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


def _check_dims(side: int, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid subsystem dimensions {dims}")
    if int(np.prod(dims)) != side:
        raise ValueError(f"dims {dims} do not multiply to matrix side {side}")
    return dims


@dataclass(frozen=True)
class DensityMatrix:
    data: np.ndarray
    dims: tuple[int, ...]
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError("density matrix must be square")
        object.__setattr__(self, "dims", _check_dims(data.shape[0], self.dims))
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if self.validate:
            herm = np.max(np.abs(data - data.conj().T))
            if herm > HERMITIAN_TOL:
                raise ValueError(f"not Hermitian (deviation {herm:.3e})")
            tr = np.trace(data).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise ValueError(f"trace {tr!r} is not 1")
            lo = np.linalg.eigvalsh(data).min()
            if lo < -PSD_TOL:
                raise ValueError(f"negative eigenvalue {lo:.3e}")

    @classmethod
    def from_pure(cls, state: "PureState") -> "DensityMatrix":
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()), state.dims)

    @classmethod
    def maximally_mixed(cls, dims: Sequence[int]) -> "DensityMatrix":
        d = int(np.prod(dims))
        return cls(np.eye(d) / d, tuple(dims))

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def num_systems(self) -> int:
        return len(self.dims)

    def eigenvalues(self) -> np.ndarray:
        return _clamped_eigenvalues(self.data)


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "dims", _check_dims(psi.shape[0], self.dims))
        norm = np.vdot(psi, psi).real
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm^2 {norm!r} is not 1")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    def density(self) -> DensityMatrix:
        return DensityMatrix.from_pure(self)


@dataclass(frozen=True)
class UnitaryMatrix:
    data: np.ndarray

    def __post_init__(self):
        u = np.array(self.data, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError("unitary must be square")
        dev = np.linalg.norm(u @ u.conj().T - np.eye(u.shape[0]))
        if dev > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")
        u.setflags(write=False)
        object.__setattr__(self, "data", u)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        u = self.data
        return DensityMatrix(u @ rho.data @ u.conj().T, rho.dims)


def kron(factors: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of square matrices, in list order."""
    factors = list(factors)
    if not factors:
        raise ValueError("kron needs at least one factor")
    for f in factors:
        f = np.asarray(f)
        if f.ndim != 2 or f.shape[0] != f.shape[1]:
            raise ValueError(f"non-square factor of shape {f.shape}")
    return reduce(np.kron, (np.asarray(f) for f in factors))


def _normalize_index_set(idx: Iterable[int], n: int, name: str) -> tuple[int, ...]:
    idx = tuple(sorted(set(int(i) for i in idx)))
    if not idx:
        raise ValueError(f"{name} must be nonempty")
    if idx[0] < 0 or idx[-1] >= n:
        raise ValueError(f"{name} index out of range for {n} subsystems")
    return idx


def _partial_trace_array(data: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = data.reshape(dims + dims)
    # contract each traced pair of axes, highest first so positions stay valid
    for i in sorted(traced, reverse=True):
        cur = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + cur)
    d = int(np.prod([dims[i] for i in keep]))
    return t.reshape(d, d)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the subsystems listed in ``keep`` (kept in ascending order)."""
    keep = _normalize_index_set(keep, rho.num_systems, "keep")
    if len(keep) == rho.num_systems:
        return rho
    out = _partial_trace_array(rho.data, rho.dims, keep)
    return DensityMatrix(out, tuple(rho.dims[i] for i in keep), validate=False)


def _clamped_eigenvalues(data: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(data)
    # solver noise produces tiny negatives
    return np.where((w < 0) & (w >= -EIG_CLAMP), 0.0, w)


def _entropy_of_spectrum(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-np.sum(w * np.log2(w)))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    return _entropy_of_spectrum(_clamped_eigenvalues(rho.data))


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p!r} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def _check_partition(rho: DensityMatrix, A, B) -> tuple[tuple[int, ...], tuple[int, ...]]:
    n = rho.num_systems
    A = _normalize_index_set(A, n, "A")
    B = tuple(sorted(set(int(i) for i in B)))
    if set(A) & set(B):
        raise ValueError("A and B overlap")
    if set(A) | set(B) != set(range(n)):
        raise ValueError("A and B must cover every subsystem")
    return A, B


def conditional_entropy(rho: DensityMatrix, A, B) -> float:
    """H(A|B) = H(AB) - H(B). ``B`` may be empty, giving H(A)."""
    A, B = _check_partition(rho, A, B)
    h_ab = von_neumann_entropy(rho)
    h_b = von_neumann_entropy(partial_trace(rho, B)) if B else 0.0
    return h_ab - h_b


def coherent_information(rho: DensityMatrix, A) -> float:
    """I(A>B) with B the complement of A."""
    A = _normalize_index_set(A, rho.num_systems, "A")
    B = [i for i in range(rho.num_systems) if i not in A]
    return -conditional_entropy(rho, A, B)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def _root_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    s = np.linalg.svd(_psd_sqrt(a) @ _psd_sqrt(b), compute_uv=False)
    return float(np.sum(s))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Squared fidelity ||sqrt(rho) sqrt(sigma)||_1^2."""
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    return min(1.0, _root_fidelity(rho.data, sigma.data) ** 2)


@dataclass
class MaxEntropyResult:
    value: float
    sigma_b: np.ndarray
    iterations: int
    history: list[float]
    residual: float


def max_entropy_conditional(
    rho: DensityMatrix,
    A,
    *,
    max_iter: int = 10_000,
    rtol: float = 1e-6,
    full_output: bool = False,
):
    """Non-smooth conditional max-entropy H_max(A|B), B the complement of A.

    Maximizes F(rho_AB, I_A (x) sigma_B) over states sigma_B by alternating
    maximization of |Tr[sqrt(rho) (I (x) S) U]| over the unitary U (polar
    step) and over S = sqrt(sigma_B) with ||S||_2 = 1 (positive-part step).
    Both steps are exact, so the root fidelity never decreases.
    """
    if rho.dim > 256:
        raise ValueError("max_entropy_conditional is limited to total dimension 256")
    A = _normalize_index_set(A, rho.num_systems, "A")
    B = tuple(i for i in range(rho.num_systems) if i not in A)
    dA = int(np.prod([rho.dims[i] for i in A]))
    if not B:
        # no side information: H_max(A) = 2 log2 Tr sqrt(rho)
        val = 2 * np.log2(np.sum(np.sqrt(_clamped_eigenvalues(rho.data))))
        res = MaxEntropyResult(float(val), np.ones((1, 1)), 0, [float(val)], 0.0)
        return res if full_output else res.value
    dB = int(np.prod([rho.dims[i] for i in B]))

    # reorder so A is the leading factor
    order = list(A) + list(B)
    n = rho.num_systems
    t = rho.data.reshape(rho.dims + rho.dims).transpose(order + [n + i for i in order])
    data = t.reshape(dA * dB, dA * dB)
    sqrt_rho = _psd_sqrt(data)

    S = np.eye(dB) / np.sqrt(dB)
    history = []
    prev = None
    residual = np.inf
    for it in range(1, max_iter + 1):
        X = sqrt_rho @ np.kron(np.eye(dA), S)
        P, sv, Qh = np.linalg.svd(X)
        root_f = float(np.sum(sv))
        history.append(root_f)
        if prev is not None:
            residual = abs(root_f - prev) / max(abs(root_f), 1e-300)
            if residual <= rtol:
                break
        prev = root_f
        U = Qh.conj().T @ P.conj().T
        Y = U @ sqrt_rho
        G = np.trace(Y.reshape(dA, dB, dA, dB), axis1=0, axis2=2)
        G = (G + G.conj().T) / 2
        w, v = np.linalg.eigh(G)
        w = np.clip(w, 0.0, None)
        if not np.any(w > 0):
            break
        S = (v * w) @ v.conj().T
        S /= np.linalg.norm(S)
    else:
        best = 2 * np.log2(max(history))
        raise ConvergenceError(
            f"H_max ascent did not converge in {max_iter} iterations",
            best=best,
            residual=residual,
        )
    sigma = S @ S
    value = float(2 * np.log2(history[-1]))
    # the iterate stays inside [-log2 dA, log2 dA] up to rounding
    value = float(np.clip(value, -np.log2(dA), np.log2(dA)))
    hist_bits = [float(2 * np.log2(h)) for h in history]
    res = MaxEntropyResult(value, sigma, len(history), hist_bits, float(residual))
    return res if full_output else res.value


def random_density_matrix(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble random state; used by tests and the verifier."""
    d = int(np.prod(dims))
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    m /= np.trace(m).real
    return DensityMatrix((m + m.conj().T) / 2, tuple(dims))


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
