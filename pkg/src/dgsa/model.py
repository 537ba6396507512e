"""Nearest-neighbour chain Hamiltonians in standard form.

A Hamiltonian ``H = sum_i H_i`` on ``n`` sites is in standard form when
every two-site term satisfies ``0 <= H_i <= 1``. Term ``i`` (0-based) acts
on sites ``i`` and ``i + 1``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, ShapeMismatchError
from .tensor_mps import MPO

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
EYE2 = np.eye(2, dtype=np.complex128)

DENSE_HALF_CHAIN_DIM = 2**12
MAX_LOCAL_DIM = 4


def nn_mpo(terms: Sequence[np.ndarray], n: int, d: int) -> MPO:
    """Exact MPO of ``sum_k terms[k]`` with term ``k`` on sites ``k, k+1``.

    Each term is split by an operator SVD into ``sum_r A_r (x) B_r``; the
    resulting finite-state MPO has bond dimension ``2 + max_rank``.
    Zero terms (or ``n == 1``) give the zero operator.
    """
    if n == 1 or not terms:
        zero = np.zeros((1, d, d, 1), dtype=np.complex128)
        if n == 1:
            return MPO((zero,), hermitian=True)
        return MPO(tuple(zero for _ in range(n)), hermitian=True)
    splits = []
    for h in terms:
        t = h.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
        u, s, vh = np.linalg.svd(t)
        keep = max(1, int(np.sum(s > 1e-14 * max(s[0], 1e-300))))
        a = (u[:, :keep] * s[None, :keep]).T.reshape(keep, d, d)
        b = vh[:keep].reshape(keep, d, d)
        splits.append((a, b))
    r = max(a.shape[0] for a, _ in splits)
    D = r + 2
    eye = np.eye(d, dtype=np.complex128)
    ts = []
    for j in range(n):
        w = np.zeros((D, d, d, D), dtype=np.complex128)
        w[0, :, :, 0] = eye
        w[D - 1, :, :, D - 1] = eye
        if j < n - 1:
            a, _ = splits[j]
            for k in range(a.shape[0]):
                w[0, :, :, 1 + k] = a[k]
        if j > 0:
            _, b = splits[j - 1]
            for k in range(b.shape[0]):
                w[1 + k, :, :, D - 1] = b[k]
        if j == 0:
            w = w[:1]
        if j == n - 1:
            w = w[..., D - 1 :]
        ts.append(w)
    return MPO(tuple(ts), hermitian=True)


def dense_chain_operator(terms: Sequence[np.ndarray], n: int, d: int, offset: int = 0, sparse: bool = False):
    """Dense (or sparse) matrix of ``sum_k terms[k]`` on ``n`` sites.

    Term ``k`` acts on sites ``offset + k`` and ``offset + k + 1``.
    """
    dim = d**n
    total = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for k, h in enumerate(terms):
        left = d ** (offset + k)
        right = d ** (n - offset - k - 2)
        total = total + sp.kron(sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(h)), sp.identity(right, format="csr"))
    return total.tocsr() if sparse else total.toarray()


def least_eigenvalue(terms: Sequence[np.ndarray], n: int, d: int) -> float:
    """Least eigenvalue of a nearest-neighbour chain operator.

    Dense diagonalization for small blocks, Lanczos beyond.
    """
    if n <= 1 or not terms:
        return 0.0
    if d**n <= DENSE_HALF_CHAIN_DIM:
        return float(np.linalg.eigvalsh(dense_chain_operator(terms, n, d))[0])
    mat = dense_chain_operator(terms, n, d, sparse=True)
    val = spla.eigsh(mat, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
    return float(val[0])


@dataclass(frozen=True)
class StandardHamiltonian:
    """Standard-form chain Hamiltonian.

    Attributes
    ----------
    n, d : int
        Number of sites and local dimension.
    local_terms : tuple of ndarray
        The ``n - 1`` two-site terms, each ``d**2 x d**2`` with spectrum in
        ``[0, 1]``.
    shifts : tuple of float
        Per-term shift subtracted before scaling.
    scale : float
        Common positive factor the shifted terms were divided by.
    name : str
        Catalog name or ``"custom"``.
    params : dict
        Model parameters as given.
    """

    n: int
    d: int
    local_terms: tuple[np.ndarray, ...]
    shifts: tuple[float, ...] = ()
    scale: float = 1.0
    name: str = "custom"
    params: Mapping[str, Any] = field(default_factory=dict)

    @cached_property
    def mpo(self) -> MPO:
        return nn_mpo(self.local_terms, self.n, self.d)

    @property
    def total_shift(self) -> float:
        return float(sum(self.shifts))

    def to_original_units(self, energy: float) -> float:
        """Map a standardized energy back to the raw model's units."""
        return float(self.scale * energy + self.total_shift)

    def dense(self) -> np.ndarray:
        return dense_chain_operator(self.local_terms, self.n, self.d)

    def block_terms(self, first: int, last: int) -> tuple[np.ndarray, ...]:
        """Terms acting entirely inside sites ``first .. last - 1``."""
        return tuple(self.local_terms[first : max(first, last - 1)])


def standardize(raw_terms: Sequence[np.ndarray], d: int = 2, name: str = "custom", params: Mapping[str, Any] | None = None) -> StandardHamiltonian:
    """Shift and scale raw two-site terms into standard form.

    If every term already has its spectrum in ``[0, 1]`` nothing is changed.
    Otherwise each term is shifted by its least eigenvalue and all terms are
    divided by the largest resulting spectral width, so energies map back
    through ``E_raw = scale * E + sum(shifts)``.

    Raises
    ------
    ValueError
        If a term is not Hermitian or has the wrong shape.
    """
    terms = [np.asarray(t, dtype=np.complex128) for t in raw_terms]
    if d > MAX_LOCAL_DIM:
        raise ConfigError(f"local dimension {d} exceeds the supported maximum {MAX_LOCAL_DIM}")
    for t in terms:
        if t.shape != (d * d, d * d):
            raise ShapeMismatchError(f"term of shape {t.shape} is not two-site for d={d}")
        if np.abs(t - t.conj().T).max() > 1e-12 * max(1.0, np.abs(t).max()):
            raise ValueError("raw term is not Hermitian")
    terms = [(t + t.conj().T) / 2 for t in terms]
    spectra = [np.linalg.eigvalsh(t) for t in terms]
    n = len(terms) + 1
    if all(s[0] >= -1e-10 and s[-1] <= 1 + 1e-10 for s in spectra):
        return StandardHamiltonian(n, d, tuple(terms), tuple(0.0 for _ in terms), 1.0, name, dict(params or {}))
    shifts = [float(s[0]) for s in spectra]
    scale = max(float(s[-1] - s[0]) for s in spectra)
    if scale <= 0:
        scale = 1.0
    eye = np.eye(d * d)
    out = [(t - sh * eye) / scale for t, sh in zip(terms, shifts)]
    return StandardHamiltonian(n, d, tuple(out), tuple(shifts), scale, name, dict(params or {}))


def _ising_raw(n: int) -> list[np.ndarray]:
    return [-np.kron(PAULI_Z, PAULI_Z) for _ in range(n - 1)]


def _tfi_raw(n: int, h: float) -> list[np.ndarray]:
    # Each site field is shared equally among the terms that contain it.
    count = [0] * n
    for k in range(n - 1):
        count[k] += 1
        count[k + 1] += 1
    raw = []
    for k in range(n - 1):
        t = -np.kron(PAULI_Z, PAULI_Z)
        t = t - h / count[k] * np.kron(PAULI_X, EYE2) - h / count[k + 1] * np.kron(EYE2, PAULI_X)
        raw.append(t)
    return raw


def _heisenberg_raw(n: int, J: float) -> list[np.ndarray]:
    t = J * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y) + np.kron(PAULI_Z, PAULI_Z))
    return [t.copy() for _ in range(n - 1)]


def _random_ising_raw(n: int, seed: int, strength: float) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    raw = []
    for _ in range(n - 1):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        r = (g + g.conj().T) / 2
        r = r / np.linalg.norm(r, 2)
        raw.append(-np.kron(PAULI_Z, PAULI_Z) + strength * r)
    return raw


MODEL_NAMES = ("ising", "tfi", "heisenberg", "random_ising")


def make_model(name: str, n: int, params: Mapping[str, Any] | None = None) -> StandardHamiltonian:
    """Build a catalog model in standard form.

    Parameters
    ----------
    name : str
        ``"ising"`` (zero-field, ``H_i = (1 - Z Z)/2``), ``"tfi"`` (field
        ``h``), ``"heisenberg"`` (coupling ``J``) or ``"random_ising"``
        (``seed``, ``strength``).
    n : int
        Number of sites, at least 2.
    params : mapping, optional
        Model parameters.
    """
    params = dict(params or {})
    if n < 2:
        raise ConfigError("a chain needs at least two sites")
    if name == "ising":
        raw = _ising_raw(n)
    elif name == "tfi":
        raw = _tfi_raw(n, float(params.get("h", 0.0)))
    elif name == "heisenberg":
        raw = _heisenberg_raw(n, float(params.get("J", 1.0)))
    elif name == "random_ising":
        raw = _random_ising_raw(n, int(params.get("seed", 0)), float(params.get("strength", 0.1)))
    else:
        raise ConfigError(f"unknown model {name!r}; known: {', '.join(MODEL_NAMES)}")
    return standardize(raw, d=2, name=name, params=params)


@dataclass(frozen=True)
class Partition:
    """Split ``H = H_L + H_mid + H_R`` at a cut.

    Attributes
    ----------
    cut : int
        Number of sites in the left block.
    left_terms, right_terms : tuple of ndarray
        Terms inside ``[0, cut)`` and inside ``[cut, n)``.
    middle : ndarray or None
        The term straddling the cut (None when ``cut == n``).
    eps_left, eps_right : float
        Least eigenvalues of the two halves.
    """

    H: StandardHamiltonian
    cut: int
    left_terms: tuple[np.ndarray, ...]
    middle: np.ndarray | None
    right_terms: tuple[np.ndarray, ...]
    eps_left: float
    eps_right: float

    @property
    def n_left(self) -> int:
        return self.cut

    @property
    def n_right(self) -> int:
        return self.H.n - self.cut

    @cached_property
    def left_mpo(self) -> MPO:
        """``H_L`` as an MPO on the left block."""
        return nn_mpo(self.left_terms, self.cut, self.H.d)

    def left_dense(self) -> np.ndarray:
        return dense_chain_operator(self.left_terms, self.cut, self.H.d)

    def right_dense(self) -> np.ndarray:
        if self.n_right == 0:
            return np.zeros((1, 1), dtype=np.complex128)
        return dense_chain_operator(self.right_terms, self.n_right, self.H.d)

    def left_shifted_dense(self) -> np.ndarray:
        return self.left_dense() - self.eps_left * np.eye(self.H.d**self.cut)

    def right_shifted_dense(self) -> np.ndarray:
        return self.right_dense() - self.eps_right * np.eye(self.H.d**self.n_right)

    def full_dense_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(H_L (x) 1, H_mid, 1 (x) H_R)`` as dense operators on the chain."""
        d, n = self.H.d, self.H.n
        hl = np.kron(self.left_dense(), np.eye(d ** self.n_right))
        hr = np.kron(np.eye(d**self.cut), self.right_dense())
        if self.middle is None:
            hm = np.zeros_like(hl)
        else:
            hm = dense_chain_operator([self.middle], n, d, offset=self.cut - 1)
        return hl, hm, hr


def partition(H: StandardHamiltonian, cut: int, allow_full: bool = False) -> Partition:
    """Partition ``H`` at ``cut``.

    Parameters
    ----------
    cut : int
        ``1 <= cut <= n - 1``; with ``allow_full`` also ``cut == n``, where
        the right block is empty (used by the last trimming step).
    """
    hi = H.n if allow_full else H.n - 1
    if not 1 <= cut <= hi:
        raise ValueError(f"cut {cut} outside [1, {hi}]")
    left = tuple(H.local_terms[: cut - 1])
    right = tuple(H.local_terms[cut:])
    middle = H.local_terms[cut - 1] if cut < H.n else None
    eps_l = least_eigenvalue(left, cut, H.d)
    eps_r = least_eigenvalue(right, H.n - cut, H.d) if cut < H.n else 0.0
    return Partition(H, cut, left, middle, right, eps_l, eps_r)
