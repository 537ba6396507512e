"""Matrix product states and operators.

Site tensors of an :class:`MPS` have index order ``(left, phys, right)``;
site tensors of an :class:`MPO` have ``(left, out, in, right)``. Dense
vectors use row-major order with site 0 as the most significant digit.

Cuts are numbered like bonds: cut ``i`` separates the first ``i`` sites
from the rest, so ``1 <= i <= n - 1``. Site indices are 0-based.

Every routine is a pure function returning new objects. Singular values
below ``ZERO_TOL`` times the largest one are treated as exact zeros.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ComplexResultError, DegenerateStateError, ShapeMismatchError

ZERO_TOL = 1e-12
TIE_TOL = 1e-12
DENSE_HERMITIAN_CHECK_DIM = 2**10


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MPS:
    """A matrix product state on a contiguous block of sites.

    Attributes
    ----------
    tensors : tuple of ndarray
        Rank-3 complex tensors ``(left, d, right)``; boundary bonds are 1.
    d : int
        Physical dimension, stored explicitly so that the empty state on
        zero sites still knows it.
    center : int or None
        Orthogonality center if the state is in mixed canonical form.
    norm_cache : float or None
        Norm, when known from a canonical form.
    discarded : float
        Squared weight discarded by the compression that produced the state.
    flags : tuple of str
        Warnings such as ``"zero-norm"`` or ``"renormalized"``.
    """

    tensors: tuple[np.ndarray, ...]
    d: int = 2
    center: int | None = None
    norm_cache: float | None = None
    discarded: float = 0.0
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ts = tuple(np.asarray(t, dtype=np.complex128) for t in self.tensors)
        object.__setattr__(self, "tensors", ts)
        for t in ts:
            t.setflags(write=False)
        if ts:
            if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
                raise ShapeMismatchError("boundary bonds must have dimension 1")
            for k in range(len(ts) - 1):
                if ts[k].shape[2] != ts[k + 1].shape[0]:
                    raise ShapeMismatchError(f"bond mismatch between sites {k} and {k + 1}")
            if any(t.shape[1] != ts[0].shape[1] for t in ts):
                raise ShapeMismatchError("all sites must share the physical dimension")
            object.__setattr__(self, "d", int(ts[0].shape[1]))

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Bond dimensions at cuts ``1 .. n-1``."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @classmethod
    def empty(cls, d: int = 2) -> MPS:
        """The scalar 1 on zero sites, the seed of every viable set."""
        return cls(tensors=(), d=d, norm_cache=1.0)


@dataclass(frozen=True)
class MPO:
    """A matrix product operator.

    Attributes
    ----------
    tensors : tuple of ndarray
        Rank-4 tensors ``(left, out, in, right)``.
    hermitian : bool
        Declared Hermiticity; verified densely on construction when the
        Hilbert-space dimension is at most ``2**10``.
    discarded : float
        Frobenius-norm error of the compression that produced the operator.
    """

    tensors: tuple[np.ndarray, ...]
    hermitian: bool = False
    discarded: float = 0.0

    def __post_init__(self) -> None:
        ts = tuple(np.asarray(t, dtype=np.complex128) for t in self.tensors)
        object.__setattr__(self, "tensors", ts)
        for t in ts:
            t.setflags(write=False)
        if not ts:
            raise ShapeMismatchError("an MPO needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[3] != 1:
            raise ShapeMismatchError("boundary bonds must have dimension 1")
        for k in range(len(ts) - 1):
            if ts[k].shape[3] != ts[k + 1].shape[0]:
                raise ShapeMismatchError(f"bond mismatch between sites {k} and {k + 1}")
        if self.hermitian and self.d ** self.length <= DENSE_HERMITIAN_CHECK_DIM:
            m = mpo_to_dense(self)
            scale = max(1.0, float(np.abs(m).max()))
            if np.abs(m - m.conj().T).max() > 1e-9 * scale:
                raise ValueError("MPO flagged Hermitian fails the dense check")

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        return int(self.tensors[0].shape[1])

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)


@dataclass(frozen=True)
class SchmidtData:
    """Schmidt decomposition ``|v> = sum_j lambda_j |a_j>|b_j>`` at a cut.

    Attributes
    ----------
    cut : int
        Number of sites on the left.
    coefficients : ndarray
        Nonincreasing nonnegative Schmidt coefficients.
    left_vectors, right_vectors : list of MPS
        Orthonormal Schmidt vectors on ``[0, cut)`` and ``[cut, n)``.
    flags : tuple of str
        ``"renormalized"`` if the input was not normalized.
    """

    cut: int
    coefficients: np.ndarray
    left_vectors: list[MPS] = field(default_factory=list)
    right_vectors: list[MPS] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return len(self.coefficients)


# ---------------------------------------------------------------------------
# construction and dense conversion
# ---------------------------------------------------------------------------


def product_state(digits: Sequence[int], d: int = 2) -> MPS:
    """Computational-basis product state ``|digits[0] digits[1] ...>``."""
    ts = []
    for s in digits:
        t = np.zeros((1, d, 1), dtype=np.complex128)
        t[0, int(s), 0] = 1.0
        ts.append(t)
    return MPS(tuple(ts), d=d, norm_cache=1.0)


def random_mps(n: int, d: int, bond: int, rng: np.random.Generator, normalize: bool = True) -> MPS:
    """Random complex Gaussian MPS with the given maximal bond dimension.

    Bonds are capped by the exact dimension count ``min(d**k, d**(n-k))``.
    """
    dims = [1] + [min(bond, d**k, d ** (n - k)) for k in range(1, n)] + [1]
    ts = [
        (rng.normal(size=(dims[k], d, dims[k + 1])) + 1j * rng.normal(size=(dims[k], d, dims[k + 1])))
        for k in range(n)
    ]
    state = MPS(tuple(ts), d=d)
    return normalize_state(state) if normalize else state


def to_dense(state: MPS) -> np.ndarray:
    """Dense coefficient vector of length ``d**n``."""
    if state.length == 0:
        return np.ones(1, dtype=np.complex128)
    v = state.tensors[0].reshape(state.d, -1)
    for t in state.tensors[1:]:
        v = np.tensordot(v, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return v.reshape(-1).copy()


def from_dense(vec: np.ndarray, n: int, d: int = 2, rel_tol: float = ZERO_TOL) -> MPS:
    """Exact MPS of a dense vector by sequential SVDs.

    Singular values below ``rel_tol`` times the largest at each cut are
    dropped; with the default this is lossless up to round-off.
    """
    vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
    if vec.size != d**n:
        raise ShapeMismatchError(f"vector of size {vec.size} is not d**n = {d**n}")
    ts = []
    rest = vec.reshape(1, -1)
    left = 1
    for _ in range(n - 1):
        mat = rest.reshape(left * d, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = _rank(s, rel_tol)
        ts.append(u[:, :keep].reshape(left, d, keep))
        rest = s[:keep, None] * vh[:keep]
        left = keep
    ts.append(rest.reshape(left, d, 1))
    return MPS(tuple(ts), d=d)


def mpo_to_dense(op: MPO) -> np.ndarray:
    """Dense matrix of an MPO."""
    d = op.d
    m = op.tensors[0][0]  # (out, in, r)
    m = m.reshape(d, d, -1)
    for w in op.tensors[1:]:
        # m: (O, I, a), w: (a, s, t, b) -> (O s, I t, b)
        m = np.tensordot(m, w, axes=(2, 0))  # (O, I, s, t, b)
        o, i, s, t, b = m.shape
        m = m.transpose(0, 2, 1, 3, 4).reshape(o * s, i * t, b)
    return m[:, :, 0].copy()


def mpo_from_dense(mat: np.ndarray, n: int, d: int = 2, rel_tol: float = ZERO_TOL, hermitian: bool = False) -> MPO:
    """MPO of a dense operator by sequential SVDs on the (out, in) pairs.

    The Frobenius norm of the discarded part is stored in ``discarded``.
    """
    mat = np.asarray(mat, dtype=np.complex128)
    if mat.shape != (d**n, d**n):
        raise ShapeMismatchError("matrix does not act on d**n dimensions")
    t = mat.reshape((d,) * (2 * n))
    perm = [x for k in range(n) for x in (k, n + k)]
    vec = t.transpose(perm).reshape(-1)
    ts = []
    rest = vec.reshape(1, -1)
    left = 1
    err2 = 0.0
    for _ in range(n - 1):
        m = rest.reshape(left * d * d, -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        keep = _rank(s, rel_tol)
        err2 += float(np.sum(s[keep:] ** 2))
        ts.append(u[:, :keep].reshape(left, d, d, keep))
        rest = s[:keep, None] * vh[:keep]
        left = keep
    ts.append(rest.reshape(left, d, d, 1))
    return MPO(tuple(ts), hermitian=hermitian, discarded=float(np.sqrt(err2)))


def mpo_identity(n: int, d: int = 2) -> MPO:
    eye = np.eye(d, dtype=np.complex128).reshape(1, d, d, 1)
    return MPO(tuple(eye for _ in range(n)), hermitian=True)


# ---------------------------------------------------------------------------
# canonical forms and Schmidt decompositions
# ---------------------------------------------------------------------------


def _rank(s: np.ndarray, rel_tol: float) -> int:
    if s.size == 0 or s[0] <= 0:
        return 1
    return max(1, int(np.sum(s > rel_tol * s[0])))


def _qr_pos(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR with a real nonnegative diagonal of R (makes QR idempotent)."""
    q, r = np.linalg.qr(mat)
    diag = np.diagonal(r)
    ph = np.where(np.abs(diag) > 0, diag / np.where(np.abs(diag) > 0, np.abs(diag), 1.0), 1.0)
    q = q * ph[None, :]
    r = ph.conj()[:, None] * r
    return q, r


def canonicalize(state: MPS, center: int) -> MPS:
    """Bring ``state`` into mixed canonical form around site ``center``.

    Tensors left of ``center`` become left isometries and tensors right of
    it right isometries. The represented vector is unchanged.

    Raises
    ------
    DegenerateStateError
        If the state has zero norm.
    """
    n = state.length
    if not 0 <= center < n:
        raise ShapeMismatchError(f"center {center} outside [0, {n})")
    ts = [t.copy() for t in state.tensors]
    for k in range(center):
        l, d, r = ts[k].shape
        q, rr = _qr_pos(ts[k].reshape(l * d, r))
        ts[k] = q.reshape(l, d, -1)
        ts[k + 1] = np.tensordot(rr, ts[k + 1], axes=(1, 0))
    for k in range(n - 1, center, -1):
        l, d, r = ts[k].shape
        q, rr = _qr_pos(ts[k].reshape(l, d * r).conj().T)
        ts[k] = q.conj().T.reshape(-1, d, r)
        ts[k - 1] = np.tensordot(ts[k - 1], rr.conj().T, axes=(2, 0))
    nrm = float(np.linalg.norm(ts[center]))
    if not np.isfinite(nrm) or nrm <= 1e-300:
        raise DegenerateStateError("cannot canonicalize a zero-norm state")
    return MPS(tuple(ts), d=state.d, center=center, norm_cache=nrm, flags=state.flags)


def norm(state: MPS) -> float:
    """Euclidean norm of the represented vector."""
    if state.length == 0:
        return 1.0
    if state.norm_cache is not None:
        return state.norm_cache
    val = kernels.overlap(state.tensors, state.tensors).real
    return float(np.sqrt(max(val, 0.0)))


def normalize_state(state: MPS) -> MPS:
    """Return the normalized state in canonical form centred at site 0."""
    c = canonicalize(state, 0)
    ts = list(c.tensors)
    ts[0] = ts[0] / c.norm_cache
    return MPS(tuple(ts), d=c.d, center=0, norm_cache=1.0, flags=state.flags)


def _ordered_svd(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD with the deterministic ordering and phase convention.

    Singular values are sorted in descending order; groups equal to within
    ``TIE_TOL`` (relative) are ordered lexicographically by the real then
    imaginary parts of their left vectors. Each left vector is rephased so
    that its first entry of non-negligible magnitude is real positive, and
    the matching right vector absorbs the conjugate phase.
    """
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    for j in range(u.shape[1]):
        col = u[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-10 * max(np.abs(col).max(), 1e-300))
        if big.size:
            ph = col[big[0]] / abs(col[big[0]])
            u[:, j] = col / ph
            vh[j, :] = vh[j, :] * ph
    if s.size > 1:
        scale = s[0] if s[0] > 0 else 1.0
        order = list(range(s.size))
        groups: list[list[int]] = []
        for j in order:
            if groups and abs(s[groups[-1][0]] - s[j]) <= TIE_TOL * scale:
                groups[-1].append(j)
            else:
                groups.append([j])
        new_order: list[int] = []
        for g in groups:
            if len(g) > 1:
                key = lambda j: tuple(np.round(np.concatenate([u[:, j].real, u[:, j].imag]), 10))
                g = sorted(g, key=key, reverse=True)
            new_order.extend(g)
        u, s, vh = u[:, new_order], s[new_order], vh[new_order]
    return u, s, vh


def schmidt_decompose(state: MPS, cut: int) -> SchmidtData:
    """Schmidt decomposition across the bond after the first ``cut`` sites.

    Coefficients below the zero threshold are dropped. An unnormalized
    input is normalized and the result carries the flag ``"renormalized"``.
    """
    n = state.length
    if not 1 <= cut <= n - 1:
        raise ShapeMismatchError(f"cut {cut} outside [1, {n - 1}]")
    c = canonicalize(state, cut - 1)
    flags: tuple[str, ...] = ()
    ts = list(c.tensors)
    if abs(c.norm_cache - 1.0) > 1e-10:
        flags = ("renormalized",)
        ts[cut - 1] = ts[cut - 1] / c.norm_cache
    l, d, r = ts[cut - 1].shape
    u, s, vh = _ordered_svd(ts[cut - 1].reshape(l * d, r))
    keep = _rank(s, ZERO_TOL)
    lefts, rights = [], []
    for j in range(keep):
        left_ts = ts[: cut - 1] + [u[:, j].reshape(l, d, 1)]
        lefts.append(MPS(tuple(left_ts), d=d, center=cut - 1, norm_cache=1.0))
        first = np.tensordot(vh[j], ts[cut], axes=(0, 0))[None, :, :]
        rights.append(MPS((first,) + tuple(ts[cut + 1 :]), d=d, center=0, norm_cache=1.0))
    return SchmidtData(cut=cut, coefficients=s[:keep].copy(), left_vectors=lefts, right_vectors=rights, flags=flags)


def truncate_at_cut(state: MPS, cut: int, D: int) -> MPS:
    """Keep the ``D`` largest Schmidt terms at ``cut`` and renormalize.

    Raises
    ------
    ValueError
        If ``D <= 0``.
    """
    if D <= 0:
        raise ValueError("bond dimension D must be positive")
    n = state.length
    if not 1 <= cut <= n - 1:
        raise ShapeMismatchError(f"cut {cut} outside [1, {n - 1}]")
    c = canonicalize(state, cut - 1)
    ts = list(c.tensors)
    l, d, r = ts[cut - 1].shape
    u, s, vh = _ordered_svd(ts[cut - 1].reshape(l * d, r))
    keep = min(D, _rank(s, ZERO_TOL))
    kept = s[:keep]
    scale = float(np.linalg.norm(kept))
    ts[cut - 1] = u[:, :keep].reshape(l, d, keep)
    ts[cut] = np.tensordot((kept / scale)[:, None] * vh[:keep], ts[cut], axes=(1, 0))
    discarded = float(np.sum(s[keep:] ** 2) / np.sum(s**2))
    return MPS(tuple(ts), d=d, center=cut, norm_cache=1.0, discarded=discarded)


def truncate_all_bonds(state: MPS, D: int, return_weights: bool = False):
    """Truncate every bond to ``D`` in one left-to-right sweep.

    The truncation at cut ``k`` acts on the state already truncated at cuts
    ``1 .. k-1``; the result is renormalized once at the end.

    Parameters
    ----------
    return_weights : bool
        Also return, per cut, the norm of the discarded component relative
        to the vector being truncated at that moment.
    """
    if D <= 0:
        raise ValueError("bond dimension D must be positive")
    n = state.length
    if n <= 1:
        out = normalize_state(state) if n == 1 else state
        return (out, []) if return_weights else out
    c = canonicalize(state, 0)
    ts = list(c.tensors)
    weights = []
    for k in range(n - 1):
        l, d, r = ts[k].shape
        u, s, vh = _ordered_svd(ts[k].reshape(l * d, r))
        keep = min(D, _rank(s, ZERO_TOL))
        tot = float(np.sum(s**2))
        weights.append(float(np.sqrt(np.sum(s[keep:] ** 2) / tot)) if tot > 0 else 0.0)
        ts[k] = u[:, :keep].reshape(l, d, keep)
        ts[k + 1] = np.tensordot(s[:keep, None] * vh[:keep], ts[k + 1], axes=(1, 0))
    nrm = float(np.linalg.norm(ts[-1]))
    if nrm <= 1e-300:
        raise DegenerateStateError("truncation removed the whole state")
    ts[-1] = ts[-1] / nrm
    out = MPS(tuple(ts), d=state.d, center=n - 1, norm_cache=1.0)
    return (out, weights) if return_weights else out


def compress(state: MPS, rel_tol: float = ZERO_TOL) -> MPS:
    """Drop singular values below ``rel_tol`` times the largest at each cut.

    The norm is kept. The total discarded squared weight relative to the
    squared norm is accumulated in ``discarded``.
    """
    n = state.length
    if n <= 1:
        return state
    c = canonicalize(state, n - 1)
    ts = list(c.tensors)
    total = c.norm_cache**2
    lost = 0.0
    for k in range(n - 1, 0, -1):
        l, d, r = ts[k].shape
        u, s, vh = np.linalg.svd(ts[k].reshape(l, d * r), full_matrices=False)
        keep = _rank(s, rel_tol)
        lost += float(np.sum(s[keep:] ** 2))
        ts[k] = vh[:keep].reshape(keep, d, r)
        ts[k - 1] = np.tensordot(ts[k - 1], u[:, :keep] * s[None, :keep], axes=(2, 0))
    nrm = float(np.linalg.norm(ts[0]))
    return MPS(
        tuple(ts), d=state.d, center=0, norm_cache=nrm, discarded=state.discarded + lost / total, flags=state.flags
    )


# ---------------------------------------------------------------------------
# inner products and operator application
# ---------------------------------------------------------------------------


def _check_pair(a: MPS, b: MPS) -> None:
    if a.length != b.length or a.d != b.d:
        raise ShapeMismatchError(f"MPS shapes differ: n={a.length},{b.length} d={a.d},{b.d}")


def overlap(a: MPS, b: MPS) -> complex:
    """Inner product ``<a|b>`` (antilinear in ``a``)."""
    _check_pair(a, b)
    return kernels.overlap(a.tensors, b.tensors)


def expectation(state: MPS, op: MPO) -> float:
    """``<v|O|v> / <v|v>`` for an MPO flagged Hermitian.

    Raises
    ------
    ComplexResultError
        If ``op.hermitian`` is False.
    """
    if not op.hermitian:
        raise ComplexResultError("expectation of an operator not flagged Hermitian")
    if op.length != state.length or op.d != state.d:
        raise ShapeMismatchError("operator and state shapes differ")
    num = kernels.sandwich(state.tensors, op.tensors, state.tensors)
    den = kernels.overlap(state.tensors, state.tensors).real
    if den <= 0:
        raise DegenerateStateError("expectation of a zero-norm state")
    return float(num.real / den)


def apply_mpo(op: MPO, state: MPS, compress_tol: float | None = None) -> MPS:
    """Apply ``op`` to ``state``.

    Without ``compress_tol`` the bond dimensions are exactly the products of
    the operand bonds. With it, the result is compressed and the discarded
    weight is recorded in ``discarded``.
    """
    if op.length != state.length or op.d != state.d:
        raise ShapeMismatchError("operator and state shapes differ")
    ts = []
    for w, a in zip(op.tensors, state.tensors):
        c = np.einsum("astb,ltr->alsbr", w, a)
        wa, la, s, wb, rb = c.shape
        ts.append(c.reshape(wa * la, s, wb * rb))
    out = MPS(tuple(ts), d=state.d)
    if compress_tol is not None:
        out = compress(out, compress_tol)
    return out


def apply_mpo_block(op: MPO, state: MPS, right_index: int | None = None) -> MPS:
    """Apply an MPO whose right boundary bond may exceed one.

    ``right_index`` selects one value of the open right bond (used for the
    left factors of an operator Schmidt decomposition).
    """
    ts = []
    for k, (w, a) in enumerate(zip(op.tensors, state.tensors)):
        if k == len(op.tensors) - 1 and right_index is not None:
            w = w[..., right_index : right_index + 1]
        c = np.einsum("astb,ltr->alsbr", w, a)
        wa, la, s, wb, rb = c.shape
        ts.append(c.reshape(wa * la, s, wb * rb))
    return MPS(tuple(ts), d=state.d)


def linear_combine(states: Sequence[MPS], weights: Sequence[complex], exact_compress: bool = True) -> MPS:
    """Weighted sum ``sum_k w_k |s_k>`` as a direct-sum MPS.

    With ``exact_compress`` the result is compressed at the numerical zero
    threshold, which never increases bonds beyond the direct-sum bound. A
    vanishing result is returned as a bond-1 zero state flagged
    ``"zero-norm"``.
    """
    if not states:
        raise ValueError("need at least one state")
    n, d = states[0].length, states[0].d
    for s in states:
        if s.length != n or s.d != d:
            raise ShapeMismatchError("all states must share length and physical dimension")
    weights = [complex(w) for w in weights]
    if len(weights) != len(states):
        raise ValueError("one weight per state is required")
    scale = sum(abs(w) * norm(s) for s, w in zip(states, weights))
    if n == 0:
        raise ShapeMismatchError("cannot combine states on zero sites")
    if n == 1:
        t = sum(w * s.tensors[0] for s, w in zip(states, weights))
        out = MPS((t,), d=d)
    else:
        first = np.concatenate([w * s.tensors[0] for s, w in zip(states, weights)], axis=2)
        ts = [first]
        for k in range(1, n - 1):
            ls = [s.tensors[k].shape[0] for s in states]
            rs = [s.tensors[k].shape[2] for s in states]
            block = np.zeros((sum(ls), d, sum(rs)), dtype=np.complex128)
            lo = ro = 0
            for s, li, ri in zip(states, ls, rs):
                block[lo : lo + li, :, ro : ro + ri] = s.tensors[k]
                lo += li
                ro += ri
            ts.append(block)
        ts.append(np.concatenate([s.tensors[-1] for s in states], axis=0))
        out = MPS(tuple(ts), d=d)
    nrm = float(np.sqrt(max(kernels.overlap(out.tensors, out.tensors).real, 0.0)))
    if nrm <= 1e-12 * max(scale, 1e-300):
        zero = tuple(np.zeros((1, d, 1), dtype=np.complex128) for _ in range(n))
        return MPS(zero, d=d, norm_cache=0.0, flags=("zero-norm",))
    if exact_compress and n > 1:
        out = compress(out, ZERO_TOL)
    return out


def extend_state(state: MPS, local: np.ndarray) -> MPS:
    """Append one site carrying the single-site vector ``local``."""
    t = np.asarray(local, dtype=np.complex128).reshape(1, -1, 1)
    return MPS(state.tensors + (t,), d=t.shape[1], norm_cache=state.norm_cache)


def scale_state(state: MPS, factor: complex) -> MPS:
    """Multiply the state by a scalar (absorbed into the canonical center if any)."""
    ts = list(state.tensors)
    k = state.center if state.center is not None else 0
    ts[k] = ts[k] * factor
    nc = None if state.norm_cache is None else state.norm_cache * abs(factor)
    return replace(state, tensors=tuple(ts), norm_cache=nc)


# ---------------------------------------------------------------------------
# MPO algebra
# ---------------------------------------------------------------------------


def mpo_as_mps(op: MPO) -> MPS:
    """View an MPO as an MPS with physical dimension ``d**2``."""
    ts = [w.reshape(w.shape[0], -1, w.shape[3]) for w in op.tensors]
    return MPS(tuple(ts), d=op.d**2)


def _mps_as_mpo(state: MPS, d: int, hermitian: bool, discarded: float) -> MPO:
    ts = [t.reshape(t.shape[0], d, d, t.shape[2]) for t in state.tensors]
    return MPO(tuple(ts), hermitian=hermitian, discarded=discarded)


def mpo_compress(op: MPO, rel_tol: float = ZERO_TOL, hermitian: bool | None = None) -> MPO:
    """Compress an MPO in the Frobenius geometry.

    The Frobenius norm of the discarded part (an upper bound on its
    operator norm) is added to ``discarded``.
    """
    if op.length == 1:
        return op
    m = mpo_as_mps(op)
    c = compress(m, rel_tol)
    fro = norm(m)
    err = float(np.sqrt(max(c.discarded, 0.0)) * fro)
    herm = op.hermitian if hermitian is None else hermitian
    return _mps_as_mpo(c, op.d, herm, op.discarded + err)


def mpo_add(ops: Sequence[MPO], weights: Sequence[complex], hermitian: bool = False) -> MPO:
    """Direct-sum MPO of ``sum_k w_k O_k`` (no compression)."""
    n = ops[0].length
    d = ops[0].d
    if n == 1:
        t = sum(complex(w) * o.tensors[0] for o, w in zip(ops, weights))
        return MPO((t,), hermitian=hermitian)
    first = np.concatenate([complex(w) * o.tensors[0] for o, w in zip(ops, weights)], axis=3)
    ts = [first]
    for k in range(1, n - 1):
        ls = [o.tensors[k].shape[0] for o in ops]
        rs = [o.tensors[k].shape[3] for o in ops]
        block = np.zeros((sum(ls), d, d, sum(rs)), dtype=np.complex128)
        lo = ro = 0
        for o, li, ri in zip(ops, ls, rs):
            block[lo : lo + li, :, :, ro : ro + ri] = o.tensors[k]
            lo += li
            ro += ri
        ts.append(block)
    ts.append(np.concatenate([o.tensors[-1] for o in ops], axis=0))
    return MPO(tuple(ts), hermitian=hermitian)


def mpo_product(a: MPO, b: MPO) -> MPO:
    """Operator product ``a @ b`` (bond dimensions multiply)."""
    ts = []
    for wa, wb in zip(a.tensors, b.tensors):
        c = np.einsum("aspc,bptd->abstcd", wa, wb)
        x, y, s, t, u, v = c.shape
        ts.append(c.reshape(x * y, s, t, u * v))
    return MPO(tuple(ts))


def mpo_dagger(op: MPO) -> MPO:
    ts = [w.conj().transpose(0, 2, 1, 3) for w in op.tensors]
    return MPO(tuple(ts), hermitian=op.hermitian, discarded=op.discarded)


@dataclass(frozen=True)
class OperatorSchmidt:
    """Operator Schmidt decomposition ``O = sum_j A_j (x) B_j`` at a cut.

    ``left`` is an MPO on the first ``cut`` sites whose open right bond
    enumerates the terms, with the Schmidt coefficients absorbed; ``right``
    holds the matching Frobenius-orthonormal factors. ``coefficients`` are
    the operator Schmidt values (Frobenius geometry).
    """

    cut: int
    coefficients: np.ndarray
    left: tuple[np.ndarray, ...]
    right: tuple[np.ndarray, ...]

    @property
    def n_terms(self) -> int:
        return len(self.coefficients)

    def left_factor(self, j: int) -> MPO:
        ts = list(self.left)
        ts[-1] = ts[-1][..., j : j + 1]
        return MPO(tuple(ts))

    def right_factor(self, j: int) -> MPO:
        ts = list(self.right)
        ts[0] = ts[0][j : j + 1]
        return MPO(tuple(ts))


def operator_schmidt(op: MPO, cut: int, rel_tol: float = ZERO_TOL) -> OperatorSchmidt:
    """Split ``op`` at ``cut`` into ``sum_j A_j (x) B_j``.

    Terms with Schmidt value below ``rel_tol`` times the largest are dropped.
    """
    n = op.length
    if not 1 <= cut <= n - 1:
        raise ShapeMismatchError(f"cut {cut} outside [1, {n - 1}]")
    m = canonicalize(mpo_as_mps(op), cut - 1)
    ts = list(m.tensors)
    l, dd, r = ts[cut - 1].shape
    u, s, vh = np.linalg.svd(ts[cut - 1].reshape(l * dd, r), full_matrices=False)
    keep = _rank(s, rel_tol)
    d = op.d
    left = [t.reshape(t.shape[0], d, d, t.shape[2]) for t in ts[: cut - 1]]
    left.append((u[:, :keep] * s[None, :keep]).reshape(l, d, d, keep))
    first = np.tensordot(vh[:keep], ts[cut], axes=(1, 0))
    right = [first.reshape(keep, d, d, -1)] + [t.reshape(t.shape[0], d, d, t.shape[2]) for t in ts[cut + 1 :]]
    return OperatorSchmidt(cut=cut, coefficients=s[:keep].copy(), left=tuple(left), right=tuple(right))
