"""Jordan's-lemma block decomposition of an observable pair and the block-projection instrument."""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .mabk import ObservablePair
from .qmath import PAULI_X, PAULI_Y, DensityMatrix, UnitaryMatrix, kron

ANGLE_TOL = 1e-8


@dataclass(frozen=True)
class JordanBlock:
    projector: np.ndarray
    angle: float
    block_dim: int
    isometry: np.ndarray  # columns span the block; O0 = sigma_y there for 2-dim blocks
    o0_sign: int = 0  # eigenvalue of O0 on a 1-dim block

    def qubit_observables(self) -> ObservablePair:
        """The pair as seen inside this block, written on a qubit register."""
        if self.block_dim == 2:
            return ObservablePair(
                PAULI_Y, np.cos(self.angle) * PAULI_Y + np.sin(self.angle) * PAULI_X
            )
        s0 = self.o0_sign
        s1 = s0 * (1 if self.angle < np.pi / 2 else -1)
        # second basis vector is padding; any +-1 value keeps the observables valid
        return ObservablePair(np.diag([s0, -s0]).astype(complex), np.diag([s1, -s1]).astype(complex))


@dataclass(frozen=True)
class JordanDecomposition:
    blocks: tuple
    basis: UnitaryMatrix

    @property
    def angles(self) -> np.ndarray:
        return np.array([b.angle for b in self.blocks])

    @property
    def dim(self) -> int:
        return self.basis.data.shape[0]

    def block_labels(self) -> np.ndarray:
        """Block index of every column of ``basis``."""
        return np.concatenate([[k] * b.block_dim for k, b in enumerate(self.blocks)])


def _is_pm1_observable(o: np.ndarray) -> bool:
    return np.allclose(o, o.conj().T, atol=1e-10) and np.allclose(o @ o, np.eye(len(o)), atol=1e-10)


def jordan_decompose(pair: ObservablePair) -> JordanDecomposition:
    """Joint block diagonalization of O0 and O1 into blocks of size at most two.

    The product O0 O1 is unitary. Its eigenvectors with eigenvalue e^{-i alpha},
    alpha in (0, pi), each span a 2-dim block {v, -i O0 v} on which
    O0 = sigma_y and O1 = cos(alpha) sigma_y + sin(alpha) sigma_x. The real
    eigenvalues +-1 give 1-dim blocks with alpha = 0 or pi.
    """
    O0, O1 = pair.O0, pair.O1
    if not (_is_pm1_observable(O0) and _is_pm1_observable(O1)):
        raise ValueError("inputs must be Hermitian with spectrum in {-1, +1}")
    T, Z = scipy.linalg.schur(O0 @ O1, output="complex")
    lam = np.diag(T)
    theta = np.angle(lam)

    blocks = []
    for k in np.flatnonzero(np.sin(theta) < -ANGLE_TOL):
        v = Z[:, k]
        V = np.column_stack([v, -1j * (O0 @ v)])
        blocks.append(JordanBlock(V @ V.conj().T, float(-theta[k]), 2, V))

    real = np.flatnonzero(np.abs(np.sin(theta)) <= ANGLE_TOL)
    for sign in (1, -1):
        cols = [k for k in real if np.sign(lam[k].real) == sign]
        if not cols:
            continue
        Zr = Z[:, cols]
        w, u = np.linalg.eigh(Zr.conj().T @ O0 @ Zr)
        angle = 0.0 if sign > 0 else np.pi
        for j in range(len(cols)):
            e = Zr @ u[:, j]
            blocks.append(
                JordanBlock(np.outer(e, e.conj()), angle, 1, e[:, None], int(np.rint(w[j])))
            )

    # stable sort: ascending angle, ties keep eigenvector order
    blocks.sort(key=lambda b: b.angle)
    basis = np.column_stack([b.isometry for b in blocks])
    return JordanDecomposition(tuple(blocks), UnitaryMatrix(basis))


def reconstruct(decomp: JordanDecomposition) -> ObservablePair:
    """Rebuild (O0, O1) from the blocks; used to check a decomposition."""
    d = decomp.dim
    O0 = np.zeros((d, d), dtype=complex)
    O1 = np.zeros((d, d), dtype=complex)
    for b in decomp.blocks:
        V = b.isometry
        q = b.qubit_observables()
        if b.block_dim == 2:
            O0 += V @ q.O0 @ V.conj().T
            O1 += V @ q.O1 @ V.conj().T
        else:
            O0 += q.O0[0, 0] * b.projector
            O1 += q.O1[0, 0] * b.projector
    return ObservablePair(O0, O1)


def block_distribution(rho: DensityMatrix, decomps: Sequence[JordanDecomposition]) -> np.ndarray:
    """Probabilities Tr[(x)_i Pi_{d_i} rho] for every label tuple, as an array indexed by labels."""
    if len(decomps) != rho.num_systems:
        raise ValueError("need one decomposition per party")
    V = kron([dc.basis.data for dc in decomps])
    diag = np.real(np.einsum("ij,jk,ki->i", V.conj().T, rho.data, V))
    diag = diag.reshape([dc.dim for dc in decomps])
    labels = [dc.block_labels() for dc in decomps]
    out = np.zeros([len(dc.blocks) for dc in decomps])
    for idx in itertools.product(*[range(dc.dim) for dc in decomps]):
        out[tuple(lab[i] for lab, i in zip(labels, idx))] += diag[idx]
    return np.clip(out, 0.0, None)


def apply_block_projection(
    rho: DensityMatrix,
    decomps: Sequence[JordanDecomposition],
    outcome: Sequence[int],
) -> tuple[DensityMatrix, float]:
    """Post-measurement state of the block measurement for one outcome, and its probability.

    Parties that already hold a qubit keep their original basis. Larger
    parties are compressed onto their block through the block isometry
    (1-dim blocks padded to a qubit), so every output register is a qubit.
    """
    if len(decomps) != rho.num_systems or len(outcome) != rho.num_systems:
        raise ValueError("need one decomposition and one label per party")
    projs, isos = [], []
    for dc, d, dim in zip(decomps, outcome, rho.dims):
        if dc.dim != dim:
            raise ValueError("decomposition dimension does not match the party")
        blk = dc.blocks[d]
        projs.append(blk.projector)
        if dim == 2:
            isos.append(np.eye(2))
        else:
            V = blk.isometry
            if blk.block_dim == 1:
                V = np.column_stack([V, np.zeros_like(V)])
            isos.append(V)
    P = kron(projs)
    prob = float(np.real(np.trace(P @ rho.data)))
    if prob <= 1e-14:
        raise ValueError(f"outcome {tuple(outcome)} has zero probability")
    W = functools.reduce(np.kron, isos)  # rectangular factors, so not qmath.kron
    out = W.conj().T @ (P @ rho.data @ P) @ W / prob
    out = (out + out.conj().T) / 2
    return DensityMatrix(out, (2,) * rho.num_systems), prob


def projected_observables(decomps: Sequence[JordanDecomposition], outcome, parties) -> list[ObservablePair]:
    """Observables acting on the registers returned by :func:`apply_block_projection`."""
    out = []
    for dc, d, p in zip(decomps, outcome, parties):
        out.append(p if dc.dim == 2 else dc.blocks[d].qubit_observables())
    return out
