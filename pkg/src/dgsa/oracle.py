"""Dense exact-diagonalization reference for small chains.

Everything here is exponential in the chain length and exists to validate
the tensor-network pipeline: exact spectra, ground-space projectors,
truncated-subspace projectors and projector distances.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import ShapeMismatchError
from .model import StandardHamiltonian, dense_chain_operator, partition
from .tensor_mps import MPS, to_dense

MAX_ORACLE_DIM = 2**14
GAUGE_SEED = 20240917


@dataclass(frozen=True)
class Spectrum:
    """Full spectrum of a dense Hamiltonian.

    Attributes
    ----------
    eigenvalues : ndarray
        Ascending eigenvalues.
    eigenvectors : ndarray
        Orthonormal columns; the first ``g`` span the ground space and are
        gauge-fixed by a fixed generic perturbation.
    g : int
        Number of eigenvalues within ``degeneracy_tol`` of the least one.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    g: int
    degeneracy_tol: float

    @property
    def eps0(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def eps1(self) -> float:
        """First energy above the ground space."""
        if self.g >= len(self.eigenvalues):
            return float("inf")
        return float(self.eigenvalues[self.g])

    @property
    def gap(self) -> float:
        return self.eps1 - self.eps0

    @property
    def ground_vectors(self) -> np.ndarray:
        return self.eigenvectors[:, : self.g]

    @property
    def G(self) -> np.ndarray:
        v = self.ground_vectors
        return v @ v.conj().T

    def report(self) -> dict[str, Any]:
        """Serializable summary (eigenvalues, degeneracy, gap)."""
        return {
            "eps0": self.eps0,
            "eps1": self.eps1,
            "gap": self.gap,
            "g": self.g,
            "degeneracy_tol": self.degeneracy_tol,
            "eigenvalues": [float(x) for x in self.eigenvalues],
        }


def gauge_fix(vectors: np.ndarray, seed: int = GAUGE_SEED) -> np.ndarray:
    """Deterministic basis of the span of orthonormal ``vectors``.

    A fixed generic Hermitian matrix on the ambient space is compressed to
    the span and diagonalized; its eigenvectors define the basis, with the
    phase of each column fixed by its largest-magnitude entry being real
    positive.
    """
    k = vectors.shape[1]
    if k <= 1:
        out = vectors.copy()
    else:
        rng = np.random.default_rng(seed)
        dim = vectors.shape[0]
        diag = rng.normal(size=dim)
        # A diagonal perturbation plus a random rank-k coupling keeps this cheap.
        c = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
        p = vectors.conj().T @ (diag[:, None] * vectors) + (vectors.conj().T @ c) @ (c.conj().T @ vectors) / dim
        p = (p + p.conj().T) / 2
        _, w = np.linalg.eigh(p)
        out = vectors @ w
    for j in range(out.shape[1]):
        idx = int(np.argmax(np.abs(out[:, j]) > 0.5 * np.abs(out[:, j]).max()))
        out[:, j] *= np.exp(-1j * np.angle(out[idx, j]))
    return out


def diagonalize(H: StandardHamiltonian, degeneracy_tol: float = 1e-8) -> Spectrum:
    """Exact spectrum of ``H``.

    Raises
    ------
    ValueError
        If ``d**n`` exceeds ``2**14``.
    """
    dim = H.d**H.n
    if dim > MAX_ORACLE_DIM:
        raise ValueError(f"dimension {dim} exceeds the oracle limit {MAX_ORACLE_DIM}")
    mat = H.dense()
    vals, vecs = np.linalg.eigh(mat)
    g = int(np.sum(vals <= vals[0] + degeneracy_tol))
    vecs = vecs.copy()
    vecs[:, :g] = gauge_fix(vecs[:, :g])
    return Spectrum(vals, vecs, g, degeneracy_tol)


def ground_overlap(state: MPS | np.ndarray, spec: Spectrum) -> float:
    """``||G v||`` for a normalized state."""
    v = to_dense(state) if isinstance(state, MPS) else np.asarray(state)
    if v.shape[0] != spec.eigenvectors.shape[0]:
        raise ShapeMismatchError("state dimension does not match the spectrum")
    return float(np.linalg.norm(spec.ground_vectors.conj().T @ v))


def truncated_projectors(H: StandardHamiltonian, cut: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Projectors onto low-energy sectors of the shifted halves.

    ``P_t`` projects onto (full left space) (x) (``H_R'`` eigenvalues <= t);
    ``Q_t`` onto eigenvectors of ``H_L' + H_R'`` with eigenvalue <= t.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    part = partition(H, cut)
    lv, lw = np.linalg.eigh(part.left_shifted_dense())
    rv, rw = np.linalg.eigh(part.right_shifted_dense())
    tol = 1e-10
    keep_r = rv <= t + tol
    right_proj = rw[:, keep_r] @ rw[:, keep_r].conj().T
    P = np.kron(np.eye(lw.shape[0]), right_proj)
    sums = lv[:, None] + rv[None, :]
    basis = np.kron(lw, rw)  # column (a, b) -> a * len(rv) + b
    keep = (sums <= t + tol).reshape(-1)
    Q = basis[:, keep] @ basis[:, keep].conj().T
    return P, Q


def truncated_norms(
    H: StandardHamiltonian, cut: int, t: float | Sequence[float], vectors: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """``||(1 - P_t) v||`` and ``||(1 - Q_t) v||`` for each column ``v``.

    Same projectors as :func:`truncated_projectors`, evaluated in the
    product eigenbasis of the shifted halves without forming them. With a
    sequence of ``t`` values the outputs gain a leading axis over ``t``.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be nonnegative")
    part = partition(H, cut)
    lv, lw = np.linalg.eigh(part.left_shifted_dense())
    rv, rw = np.linalg.eigh(part.right_shifted_dense())
    tol = 1e-10
    V = np.asarray(vectors).reshape(lw.shape[0], rw.shape[0], -1)
    sums = lv[:, None] + rv[None, :]
    out_p = np.zeros((ts.size, V.shape[2]))
    out_q = np.zeros((ts.size, V.shape[2]))
    for k in range(V.shape[2]):
        w = np.abs(lw.conj().T @ V[:, :, k] @ rw.conj()) ** 2
        for a, tv in enumerate(ts):
            out_p[a, k] = np.sqrt(w[:, rv > tv + tol].sum())
            out_q[a, k] = np.sqrt(w[sums > tv + tol].sum())
    if np.ndim(t) == 0:
        return out_p[0], out_q[0]
    return out_p, out_q


def projector_distance(G: np.ndarray, U: np.ndarray) -> tuple[float, float]:
    """Frobenius and trace norms of ``G - U``."""
    if G.shape != U.shape:
        raise ShapeMismatchError("projector shapes differ")
    diff = G - U
    diff = (diff + diff.conj().T) / 2
    fro = float(np.linalg.norm(diff, "fro"))
    trace = float(np.abs(np.linalg.eigvalsh(diff)).sum())
    return fro, trace


def independent_dense(H: StandardHamiltonian) -> np.ndarray:
    """Dense ``H`` assembled site by site with explicit Kronecker products.

    This deliberately avoids the sparse path of :meth:`StandardHamiltonian.dense`
    so the two constructions can cross-check each other.
    """
    d, n = H.d, H.n
    total = np.zeros((d**n, d**n), dtype=np.complex128)
    for k, h in enumerate(H.local_terms):
        op = np.eye(1)
        j = 0
        while j < n:
            if j == k:
                op = np.kron(op, h)
                j += 2
            else:
                op = np.kron(op, np.eye(d))
                j += 1
        total += op
    return total


__all__ = [
    "Spectrum",
    "dense_chain_operator",
    "diagonalize",
    "gauge_fix",
    "ground_overlap",
    "independent_dense",
    "projector_distance",
    "truncated_norms",
    "truncated_projectors",
]
