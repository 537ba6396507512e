"""Viable sets and the stepping procedures that grow them along the chain.

A viable set on ``i`` sites is a small collection of MPS on the first
``i`` sites whose span, tensored with the rest of the chain, contains a
low-error witness orthogonal to the ground states found so far. One step
moves a viable set one site along by four stages:

* ``extend``: tensor every member with a basis of the new site,
* ``trim``: solve the trim program over a net of boundary data and keep
  the left Schmidt vectors of the solutions (shrinks the set),
* ``truncate``: cap all bond dimensions,
* ``reduce``: apply the left operator-Schmidt factors of the filter
  operator (pushes the error back down).

The last step replaces ``reduce`` by ``final_reduce``, which applies a
stronger filter to whole-chain states.

When a dense oracle is available, every stage measures the best witness in
its span and compares it with the stage target.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import kernels
from .agsp import AgspOperator
from .errors import StageError, TrimFailureError
from .model import Partition, StandardHamiltonian, partition
from .oracle import Spectrum, gauge_fix
from .sdp import (
    ProgramSolution,
    SpanBasis,
    build_span,
    make_trim_program,
    solve_trim_program,
)
from .tensor_mps import (
    MPO,
    MPS,
    ZERO_TOL,
    _ordered_svd,
    apply_mpo,
    extend_state,
    linear_combine,
    norm,
    scale_state,
    schmidt_decompose,
    to_dense,
    truncate_all_bonds,
)

log = logging.getLogger(__name__)

# Theoretical constants of the analysis (documentation and formula evaluation only).
C_THEORY = 6.25e-54
C_PRIME_THEORY = 1e-11


def f_of_g(g: int) -> float:
    """``f = g (2g + 1)``."""
    return g * (2 * g + 1)


def theory_t(eps: float, g: int) -> float:
    """Truncation level ``t = 99 (ln 99 + 4 ln f - ln c - 6 ln eps)``."""
    f = f_of_g(g)
    return 99.0 * (math.log(99) + 4 * math.log(f) - math.log(C_THEORY) - 6 * math.log(eps))


def theory_xi(eps: float, g: int) -> float:
    """Contraction-net resolution ``xi = c' eps / (f (1 + t))``."""
    return C_PRIME_THEORY * eps / (f_of_g(g) * (1 + theory_t(eps, g)))


def theory_constants(eps: float, g: int, n: int) -> dict[str, Any]:
    """All theoretical parameters that have closed forms, for reports."""
    f = f_of_g(g)
    return {
        "c": C_THEORY,
        "c_prime": C_PRIME_THEORY,
        "f": f,
        "t": theory_t(eps, g),
        "xi": theory_xi(eps, g),
        "trim_energy_net_spacing": 4 * C_PRIME_THEORY * eps / f,
        "reduce_zeta": C_THEORY * eps**6 / f**4,
        "Lambda": big_lambda(g),
        "P": f"800*{n}*B_(1/(800*{n}))",
        "B_delta": "2^O(1/eps + eps^(-1/4) log^(3/4)(1/delta))",
    }


def delta_low(D: float, g: int, c_prime: float = C_PRIME_THEORY) -> float:
    """Overlap error of the recycled witness: ``1 - (1 - c'/f - sqrt D)/sqrt(1 - D)``."""
    if not 0 <= D < 1:
        raise ValueError("D must lie in [0, 1)")
    return 1.0 - (1.0 - c_prime / f_of_g(g) - math.sqrt(D)) / math.sqrt(1.0 - D)


def big_lambda(g: int) -> float:
    """Eigenvalue mass bound ``1 - 1/(10000 g + 5000)``."""
    return 1.0 - 1.0 / (10000 * g + 5000)


def delta_high(D: float, g: int, c_prime: float = C_PRIME_THEORY) -> float:
    """Overlap error of the trimmed witness in the distinguishable regime."""
    beta = math.sqrt((1.0 / big_lambda(g) + 1e-9) * (1.0 - D))
    if beta >= 1:
        return float("inf")
    return 30000 * c_prime / g * (1 + beta) / (1 - beta)


# ---------------------------------------------------------------------------
# configuration and data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Desk-scale parameters of the stepping pipeline.

    Attributes
    ----------
    eta_net : float
        Spacing of the energy net.
    xi : float
        Contraction-net resolution; the trim program uses radius ``xi/2``.
    B : int or None
        Bond space dimension of the trim program; None derives it from the
        witness Schmidt rank (capped at ``B_max``), or ``B_max`` without an
        oracle.
    P : int
        Bond cap applied by ``truncate``.
    zeta_reduce, reduce_budget : float
        Filter strength and operator-norm budget of the ``reduce`` filter.
    final_budget : float
        Operator-norm budget of the final filter (its strength is
        ``eta**2 / 4f``).
    reduce_rel_tol : float
        Operator-Schmidt terms of the filter below this fraction of the
        largest are dropped in ``reduce``.
    eig_threshold : float or None
        Trim keeps eigenvectors of each solution above this value
        (default ``1e-9 / g``).
    net_mode : {"candidates", "exhaustive"}
        Exhaustive mode solves the trim program on every pair of the
        contraction and energy nets. Candidate mode builds each point from
        a candidate left state (its contraction and its left energy rounded
        up into the energy net), which makes the point feasible.
    member_candidates, random_candidates : int
        Numbers of lowest-energy members and of random low-energy span
        states used as candidates.
    energy_sweep : bool
        Pair every candidate contraction with every energy-net point.
    secondary_weight : float
        Weight of ``Tr(H_L sigma)`` added to the trim objective when
        previous states exist; it only breaks ties between optima.
    targets : dict
        Measured-error targets per stage.
    """

    eta_net: float = 1.0
    xi: float = 0.02
    B: int | None = None
    B_max: int = 2
    witness_rank_tol: float = 1e-3
    P: int = 16
    zeta_reduce: float = 0.05
    reduce_budget: float = 0.005
    final_budget: float = 1e-4
    reduce_rel_tol: float = 1e-3
    propagator: str = "exact"
    filter_compress_tol: float = 1e-10
    apply_compress_tol: float = 1e-12
    eig_threshold: float | None = None
    net_mode: str = "candidates"
    member_candidates: int = 1
    random_candidates: int = 1
    energy_sweep: bool = False
    use_oracle_witness: bool = True
    exhaustive_cap: int = 20000
    secondary_weight: float = 1e-3
    targets: tuple[tuple[str, float], ...] = (("S2", 0.01), ("S3", 0.2))
    enforce_targets: bool = True
    workers: int = 1
    seed: int = 0

    def target(self, stage: str, default: float | None = None) -> float | None:
        return dict(self.targets).get(stage, default)


@dataclass(frozen=True)
class ViableSet:
    """A tagged collection of half-chain states.

    Attributes
    ----------
    h : int
        Index of the ground state being sought.
    i : int
        Number of sites covered.
    states : tuple of MPS
        Members, each on sites ``[0, i)``.
    s_bound, b_bound : int
        Recorded cardinality and bond-dimension bounds.
    error_kind : {"delta", "Delta"}
        Whether ``error`` is an overlap error or an energy error.
    error : float
        The stage's error parameter (its configured target).
    stage : str
        ``"S0"``, or ``"S1"`` .. ``"S4"`` for the four sub-steps.
    measured : dict
        Witness diagnostics measured against the oracle, if any.
    """

    h: int
    i: int
    states: tuple[MPS, ...]
    s_bound: int
    b_bound: int
    error_kind: str
    error: float
    stage: str
    measured: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for s in self.states:
            if s.length != self.i:
                raise ValueError(f"member on {s.length} sites in a set on {self.i} sites")
        if len(self.states) > self.s_bound:
            raise ValueError("cardinality exceeds the recorded bound")
        if max((s.max_bond for s in self.states), default=1) > self.b_bound:
            raise ValueError("bond dimension exceeds the recorded bound")

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def max_bond(self) -> int:
        return max((s.max_bond for s in self.states), default=1)

    def row(self) -> dict[str, Any]:
        """Flat diagnostics row for reports."""
        return {
            "h": self.h,
            "i": self.i,
            "stage": self.stage,
            "size": self.size,
            "max_bond": self.max_bond,
            "error_kind": self.error_kind,
            "error_target": self.error,
            **{k: v for k, v in self.measured.items() if not isinstance(v, (list, dict, np.ndarray))},
        }


def initial_set(h: int, d: int) -> ViableSet:
    """The trivially viable set ``{1}`` on zero sites."""
    return ViableSet(h, 0, (MPS.empty(d),), 1, 1, "Delta", 0.0, "S0")


def _with_states(S: ViableSet, states: Sequence[MPS], stage: str, **kw: Any) -> ViableSet:
    states = tuple(states)
    bond = max((s.max_bond for s in states), default=1)
    return replace(S, states=states, s_bound=len(states), b_bound=bond, stage=stage, measured={}, **kw)


@dataclass(frozen=True)
class BoundaryContraction:
    """Reduced state of the left state on (last left site) x (bond space).

    ``matrix`` is indexed by ``s * B + beta``.
    """

    cut: int
    B: int
    matrix: np.ndarray


@dataclass(frozen=True)
class NetPoint:
    """One ``(X, Y)`` pair of the trim nets with its provenance tag."""

    X: np.ndarray
    Y: float
    provenance: str


# ---------------------------------------------------------------------------
# extend
# ---------------------------------------------------------------------------


def extend(S: ViableSet) -> ViableSet:
    """Tensor every member with each basis vector of the next site."""
    d = S.states[0].d
    out = []
    for s in S.states:
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0
            out.append(extend_state(s, e))
    return replace(
        S, i=S.i + 1, states=tuple(out), s_bound=d * S.s_bound, stage="S1", measured={}
    )


# ---------------------------------------------------------------------------
# boundary contractions
# ---------------------------------------------------------------------------


def _last_site_reduced(a: MPS, b: MPS) -> np.ndarray:
    """``R[s, t] = sum_x a(x, s) conj(b(x, t))`` over all but the last site."""
    n = a.length
    env = kernels.left_env(b.tensors, a.tensors, n - 1)
    return a.tensors[-1][:, :, 0].T @ env.T @ b.tensors[-1][:, :, 0].conj()


def boundary_contraction(v: MPS, cut: int, B: int | None = None) -> BoundaryContraction:
    """Boundary contraction of ``v`` at ``cut``.

    The left state ``sum_j lambda_j |a_j>|j>`` is traced over all left
    sites except the last. At ``cut == n`` the bond space is trivial and
    the result is the reduced state of the last site. ``B`` pads (or
    truncates, with renormalization) the bond space.

    Raises
    ------
    ValueError
        If ``cut`` is outside ``[1, n]``.
    """
    n = v.length
    if not 1 <= cut <= n:
        raise ValueError(f"cut {cut} outside [1, {n}]")
    d = v.d
    if cut == n:
        nv = norm(v)
        vv = scale_state(v, 1.0 / nv)
        lam = np.array([1.0])
        lefts = [vv]
    else:
        sd = schmidt_decompose(v, cut)
        lam, lefts = sd.coefficients, sd.left_vectors
    Bt = len(lam) if B is None else B
    keep = min(Bt, len(lam))
    lam = lam[:keep] / np.linalg.norm(lam[:keep])
    mat = np.zeros((d, Bt, d, Bt), dtype=np.complex128)
    for j in range(keep):
        for k in range(keep):
            mat[:, j, :, k] = lam[j] * lam[k] * _last_site_reduced(lefts[j], lefts[k])
    M = mat.reshape(d * Bt, d * Bt)
    return BoundaryContraction(cut, Bt, (M + M.conj().T) / 2)


def dense_left_state(vec: np.ndarray, n: int, d: int, cut: int, B: int) -> tuple[np.ndarray, np.ndarray]:
    """Left state of a dense vector truncated to Schmidt rank ``B``.

    Returns ``(ls, w)``: ``ls`` with shape ``(d**cut, B)`` and the truncated,
    renormalized full vector ``w``.
    """
    M = np.asarray(vec).reshape(d**cut, d ** (n - cut))
    u, s, vh = _ordered_svd(M)
    keep = min(B, int(np.sum(s > ZERO_TOL * s[0])))
    lam = s[:keep] / np.linalg.norm(s[:keep])
    ls = np.zeros((d**cut, B), dtype=np.complex128)
    ls[:, :keep] = u[:, :keep] * lam[None, :]
    w = (u[:, :keep] * lam[None, :]) @ vh[:keep]
    return ls, w.reshape(-1)


def dense_contraction(ls: np.ndarray, d: int) -> np.ndarray:
    """Boundary contraction from a dense left state ``(d**cut, B)``."""
    B = ls.shape[1]
    t = ls.reshape(-1, d, B)
    M = np.einsum("xsb,xtc->sbtc", t, t.conj()).reshape(d * B, d * B)
    return (M + M.conj().T) / 2


def schmidt_rank(vec: np.ndarray, n: int, d: int, cut: int, rel_tol: float) -> int:
    """Number of Schmidt coefficients above ``rel_tol`` times the largest."""
    if cut >= n:
        return 1
    s = np.linalg.svd(np.asarray(vec).reshape(d**cut, d ** (n - cut)), compute_uv=False)
    return int(np.sum(s > rel_tol * s[0]))


# ---------------------------------------------------------------------------
# nets
# ---------------------------------------------------------------------------


def energy_net(eta: float) -> list[float]:
    """The points ``-1, -1 + eta, ...`` up to the first one at or above ``1 + eta``.

    Raises
    ------
    ValueError
        If ``eta <= 0``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    count = math.ceil(2.0 / eta - 1e-12) + 1
    return [-1.0 + k * eta for k in range(count + 1)]


def _grid(xi: float, d: int, B: int) -> np.ndarray:
    """Points ``k * s`` in ``[-1, 1]`` plus the endpoints, ``s = xi / (2 B**2 d**2)``.

    Centring on zero keeps the zero matrix in the net for every ``xi``;
    neighbouring points are still at most ``s`` apart.
    """
    step = xi / (2.0 * (B * d) ** 2)
    m = math.floor(1.0 / step + 1e-9)
    pts = step * np.arange(-m, m + 1)
    if pts[-1] < 1.0 - 1e-12:
        pts = np.concatenate([[-1.0], pts, [1.0]])
    return pts


def contraction_net_size(xi: float, d: int, B: int) -> int:
    """Number of Hermitian matrices in the exhaustive contraction net."""
    k = d * B
    return len(_grid(xi, d, B)) ** (k * k)


def contraction_net(
    xi: float,
    d: int,
    B: int,
    mode: str = "exhaustive",
    cap: int = 20000,
    candidates: Sequence[tuple[np.ndarray, str]] = (),
) -> Iterator[tuple[np.ndarray, str]]:
    """Enumerate candidate boundary contractions.

    In exhaustive mode this is the net of Hermitian matrices on
    ``C^d (x) C^B`` whose diagonal entries and the real and imaginary parts
    of whose off-diagonal entries lie on the grid ``-1, -1 + s, ..., 1``
    with ``s = xi / (2 B**2 d**2)``. Restricting the net to Hermitian
    matrices loses nothing: the Hermitian part of a net point is at least
    as close to any density matrix. In candidate mode the given
    ``(matrix, tag)`` pairs are yielded unchanged.

    Raises
    ------
    ValueError
        If ``xi <= 0``, the mode is unknown, or the exhaustive net exceeds
        ``cap`` points.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    if mode == "candidates":
        yield from candidates
        return
    if mode != "exhaustive":
        raise ValueError(f"unknown net mode {mode!r}")
    size = contraction_net_size(xi, d, B)
    if size > cap:
        raise ValueError(f"exhaustive contraction net has {size} points, above the cap {cap}")
    k = d * B
    grid = _grid(xi, d, B)
    iu = np.triu_indices(k, 1)
    n_off = len(iu[0])
    for idx in np.ndindex(*([len(grid)] * (k * k))):
        vals = grid[list(idx)]
        X = np.diag(vals[:k]).astype(np.complex128)
        re = vals[k : k + n_off]
        im = vals[k + n_off :]
        X[iu] = re + 1j * im
        X[(iu[1], iu[0])] = re - 1j * im
        yield X, "exhaustive"


# ---------------------------------------------------------------------------
# witness diagnostics (dense oracle)
# ---------------------------------------------------------------------------


@dataclass
class WitnessReport:
    """Best witness of a span measured against the oracle.

    Attributes
    ----------
    overlap_error : float
        ``1 - max ||G v||`` over unit ``v`` in the witness space.
    energy_error : float
        ``(min <v|H|v> - eps0) / eps`` over the same space.
    vector : ndarray
        The minimum-energy unit vector (gauge-fixed on ties).
    dim : int
        Dimension of the witness space.
    """

    overlap_error: float
    energy_error: float
    energy: float
    vector: np.ndarray
    dim: int

    def as_dict(self) -> dict[str, Any]:
        return {
            "witness_overlap_error": self.overlap_error,
            "witness_energy_error": self.energy_error,
            "witness_energy": self.energy,
            "witness_dim": self.dim,
        }


def span_dense_basis(states: Sequence[MPS], tol: float = 1e-10) -> np.ndarray:
    """Orthonormal dense basis of the span of ``states``."""
    mat = np.stack([to_dense(s) for s in states], axis=1)
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        return np.zeros((mat.shape[0], 0), dtype=np.complex128)
    return u[:, s > math.sqrt(tol) * s[0]]


def measure_witness(
    states: Sequence[MPS],
    H_dense: np.ndarray,
    spec: Spectrum,
    prev_dense: np.ndarray | None,
    eps: float,
    n: int,
    d: int,
) -> WitnessReport:
    """Best witness in ``(Span(states) (x) H_right)`` orthogonal to ``prev_dense``."""
    cut = states[0].length
    E = span_dense_basis(states)
    Q = np.kron(E, np.eye(d ** (n - cut)))
    if prev_dense is not None and prev_dense.shape[1]:
        C = Q.conj().T @ prev_dense
        u, s, _ = np.linalg.svd(C, full_matrices=True)
        rank = int(np.sum(s > 1e-10))
        Q = Q @ u[:, rank:]
    if Q.shape[1] == 0:
        return WitnessReport(1.0, float("inf"), float("inf"), np.zeros(d**n), 0)
    Hw = Q.conj().T @ H_dense @ Q
    vals, vecs = np.linalg.eigh((Hw + Hw.conj().T) / 2)
    tie = np.flatnonzero(vals <= vals[0] + 1e-10 * max(1.0, abs(vals[0])))
    low = Q @ vecs[:, tie]
    w = gauge_fix(low)[:, 0] if low.shape[1] > 1 else low[:, 0]
    V = spec.ground_vectors
    Gw = Q.conj().T @ V
    top = float(np.linalg.svd(Gw, compute_uv=False)[0]) if Gw.size else 0.0
    return WitnessReport(
        overlap_error=float(max(0.0, 1.0 - top)),
        energy_error=float((vals[0] - spec.eps0) / eps),
        energy=float(vals[0]),
        vector=w,
        dim=int(Q.shape[1]),
    )


# ---------------------------------------------------------------------------
# the pass context
# ---------------------------------------------------------------------------


@dataclass
class PassContext:
    """Everything one pass ``h`` needs besides the viable set.

    Attributes
    ----------
    H : StandardHamiltonian
    eps : float
        Gap lower bound used by the filters.
    g : int
        Requested degeneracy (sets ``f`` and the eigenvalue threshold).
    h : int
        Pass index.
    prev : list of MPS
        Previously found states ``gamma_1 .. gamma_{h-1}``.
    K : AgspOperator or None
        The ``reduce`` filter; None skips ``reduce``.
    K_final : AgspOperator or None
        The final filter.
    spec : Spectrum or None
        Dense oracle (enables witness diagnostics and witness candidates).
    cfg : PipelineConfig
    """

    H: StandardHamiltonian
    eps: float
    g: int
    h: int
    prev: list[MPS]
    cfg: PipelineConfig
    K: AgspOperator | None = None
    K_final: AgspOperator | None = None
    spec: Spectrum | None = None
    rows: list[dict[str, Any]] = field(default_factory=list)
    enforce: bool = True
    _H_dense: np.ndarray | None = field(default=None, repr=False)
    _prev_dense: np.ndarray | None = field(default=None, repr=False)
    _parts: dict[int, Partition] = field(default_factory=dict, repr=False)
    _clock: float | None = field(default=None, repr=False)

    def record(self, row: dict[str, Any]) -> None:
        """Append a stage row stamped with the wall time since the previous row."""
        now = time.perf_counter()
        row["wall_ms"] = 0.0 if self._clock is None else 1000 * (now - self._clock)
        self._clock = now
        self.rows.append(row)

    @property
    def d(self) -> int:
        return self.H.d

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def H_dense(self) -> np.ndarray:
        if self._H_dense is None:
            self._H_dense = self.H.dense()
        return self._H_dense

    @property
    def prev_dense(self) -> np.ndarray | None:
        if not self.prev:
            return None
        if self._prev_dense is None:
            self._prev_dense = np.stack([to_dense(p) for p in self.prev], axis=1)
        return self._prev_dense

    def part(self, cut: int) -> Partition:
        if cut not in self._parts:
            self._parts[cut] = partition(self.H, cut, allow_full=True)
        return self._parts[cut]

    @property
    def eig_threshold(self) -> float:
        return self.cfg.eig_threshold if self.cfg.eig_threshold is not None else 1e-9 / self.g

    def left_reference(self, cut: int) -> float:
        """Left-energy reference of the energy net at ``cut``.

        With previous states it is ``<gamma_1|H_L|gamma_1>``; in the first
        pass it is the least eigenvalue of ``H_L``.
        """
        part = self.part(cut)
        if not self.prev:
            return part.eps_left
        from .tensor_mps import expectation

        g1 = self.prev[0]
        if cut == self.n:
            return expectation(g1, self.H.mpo)
        return expectation(g1, _padded_left_mpo(part, self.n))

    def witness(self, states: Sequence[MPS]) -> WitnessReport | None:
        if self.spec is None:
            return None
        return measure_witness(states, self.H_dense, self.spec, self.prev_dense, self.eps, self.n, self.d)

    def check(self, S: ViableSet, target_kind: str, target: float | None) -> ViableSet:
        """Attach witness diagnostics and enforce the stage target."""
        rep = self.witness(S.states)
        measured: dict[str, Any] = {}
        if rep is not None:
            measured = rep.as_dict()
            value = rep.overlap_error if target_kind == "delta" else rep.energy_error
            measured["measured_error"] = value
            if target is not None:
                measured["target_met"] = bool(value <= target + 1e-12)
                if self.enforce and self.cfg.enforce_targets and value > target + 1e-12:
                    self.record({**S.row(), **measured})
                    raise StageError(
                        S.h, S.i, S.stage, f"measured {target_kind}={value:.3e} above target {target:.3e}"
                    )
        S = replace(S, measured=measured)
        self.record(S.row())
        return S


def _padded_left_mpo(part: Partition, n: int) -> MPO:
    """``H_L (x) 1`` as an MPO on the whole chain."""
    from .tensor_mps import mpo_identity

    left = part.left_mpo
    right = mpo_identity(n - part.cut, part.H.d)
    return MPO(tuple(left.tensors) + tuple(right.tensors), hermitian=True)


# ---------------------------------------------------------------------------
# trim
# ---------------------------------------------------------------------------


def _span_projector(span: SpanBasis, members: Sequence[MPS]) -> np.ndarray:
    """Projector onto ``span(members)`` in span coordinates."""
    if not members:
        return np.zeros((span.rank, span.rank), dtype=np.complex128)
    cols, _ = span.coords_many(list(members))
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    u = u[:, s > 1e-8 * s[0]]
    return u @ u.conj().T


def round_up_to_net(y: float, net: Sequence[float]) -> tuple[float, bool]:
    """Least net point at or above ``y``; clamps to the top point (flagged) if none."""
    for p in net:
        if p >= y - 1e-12:
            return p, False
    return net[-1], True


def _state_candidate(
    span: SpanBasis, c: np.ndarray, B: int, HL: np.ndarray, ref: float, net: Sequence[float], tag: str
) -> tuple[NetPoint, bool]:
    """Net point built from the left state with span coordinates ``c``.

    The state occupies the first bond slot, so the point is feasible by
    construction: its contraction equals ``X`` and its left energy is at
    most ``Y``.
    """
    c = np.asarray(c) / np.linalg.norm(c)
    d = span.d
    rho = np.einsum("p,q,pqst->st", c, c.conj(), span.reduced_matrices())
    X = np.zeros((d, B, d, B), dtype=np.complex128)
    X[:, 0, :, 0] = (rho + rho.conj().T) / 2
    y = float(np.vdot(c, HL @ c).real) - ref
    Y, clamped = round_up_to_net(y, net)
    return NetPoint(X.reshape(d * B, d * B), Y, tag), clamped


def _candidate_states(span: SpanBasis, S1: ViableSet, HL: np.ndarray, cfg: PipelineConfig, rng: np.random.Generator):
    """Span coordinates of the candidate left states.

    The ``member_candidates`` members of lowest left energy, then
    ``random_candidates`` random combinations of the lowest left-energy
    eigenvectors in the span.
    """
    out: list[tuple[np.ndarray, str]] = []
    if cfg.member_candidates:
        cols, _ = span.coords_many(list(S1.states))
        norms = np.linalg.norm(cols, axis=0)
        energies = [
            float(np.vdot(cols[:, k], HL @ cols[:, k]).real) / norms[k] ** 2 if norms[k] > 1e-12 else np.inf
            for k in range(cols.shape[1])
        ]
        for k in np.argsort(energies, kind="stable")[: cfg.member_candidates]:
            if np.isfinite(energies[k]):
                out.append((cols[:, k], "member"))
    if cfg.random_candidates:
        _, w = np.linalg.eigh(HL)
        low = w[:, : min(4, w.shape[1])]
        for _ in range(cfg.random_candidates):
            a = rng.normal(size=low.shape[1])
            if not span.real:
                a = a + 1j * rng.normal(size=low.shape[1])
            out.append((low @ a, "random"))
    return out


@dataclass
class TrimRecord:
    """Outcome of one net point."""

    provenance: str
    Y: float
    status: str
    objective: float | None
    kept: int
    kept_mass: float | None
    residual: float | None
    dual_gap: float | None


def trim(S1: ViableSet, L: Sequence[MPS], ctx: PassContext) -> ViableSet:
    """Shrink an extended set with the trim program over the two nets.

    Raises
    ------
    TrimFailureError
        If every net point is infeasible.
    """
    cfg = ctx.cfg
    i = S1.i
    d = ctx.d
    part = ctx.part(i)
    L = list(L)
    span = build_span(list(S1.states) + L, {"HL": part.left_mpo})
    HL = span.ops["HL"]
    ref = ctx.left_reference(i)
    Pi = _span_projector(span, L)
    if ctx.prev:
        objective = Pi + cfg.secondary_weight * HL
    else:
        objective = HL
    diag: dict[str, Any] = {"span_rank": span.rank, "reference": ref}

    # witness-derived candidate and bond space size
    rep = ctx.witness(list(S1.states) + L)
    B = cfg.B
    wit_point: NetPoint | None = None
    if rep is not None:
        rank_w = schmidt_rank(rep.vector, ctx.n, d, i, cfg.witness_rank_tol)
        if B is None:
            B = min(rank_w, cfg.B_max)
        if cfg.use_oracle_witness:
            ls, w = dense_left_state(rep.vector, ctx.n, d, i, B) if i < ctx.n else (rep.vector.reshape(-1, 1), rep.vector)
            X_w = dense_contraction(ls, d)
            hl = np.kron(part.left_dense(), np.eye(d ** (ctx.n - i)))
            Y_w = float(np.vdot(w, hl @ w).real) - ref
            diag["witness_rank"] = rank_w
            diag["witness_Y"] = Y_w
            wit_point = NetPoint(X_w, Y_w, "oracle-witness")
    if B is None:
        B = cfg.B_max
    if i == ctx.n:
        B = 1
    diag["B"] = B

    program = make_trim_program(span, B, objective, HL)
    lam_min = float(np.linalg.eigvalsh(HL)[0])
    net_Y = energy_net(cfg.eta_net)

    points: list[NetPoint] = []
    if wit_point is not None:
        Yc, clamped = round_up_to_net(wit_point.Y, net_Y)
        if clamped:
            log.warning("witness left energy %.4f above the energy net; clamped to %.4f", wit_point.Y, Yc)
            diag["clamped"] = True
        points.append(NetPoint(wit_point.X, Yc, wit_point.provenance))
    rng = np.random.default_rng([cfg.seed, ctx.h, i])
    if cfg.net_mode == "candidates":
        for c, tag in _candidate_states(span, S1, HL, cfg, rng):
            pt, clamped = _state_candidate(span, c, B, HL, ref, net_Y, tag)
            if cfg.energy_sweep:
                points.extend(NetPoint(pt.X, Y, tag) for Y in net_Y)
            else:
                points.append(pt)
                diag["clamped"] = diag.get("clamped", False) or clamped
    else:
        for X, tag in contraction_net(cfg.xi, d, B, "exhaustive", cap=cfg.exhaustive_cap):
            tn = float(np.abs(np.linalg.eigvalsh(X)).sum())
            if abs(tn - 1.0) > cfg.xi / 2 + 1e-12:
                continue  # no density matrix is within xi/2 of X
            points.extend(NetPoint(X, Y, tag) for Y in net_Y)

    def solve(pt: NetPoint) -> tuple[NetPoint, ProgramSolution | None]:
        if pt.Y + ref < lam_min - 1e-12:
            return pt, None
        return pt, solve_trim_program(program, pt.X, pt.Y + ref, cfg.xi)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(solve, points))
    else:
        results = [solve(pt) for pt in points]

    records: list[TrimRecord] = []
    new_cols: list[np.ndarray] = []
    r = span.rank
    thr = ctx.eig_threshold
    accepted = None
    for pt, sol in results:
        if sol is None:
            records.append(TrimRecord(pt.provenance, pt.Y, "prescreened", None, 0, None, None, None))
            continue
        if not sol.feasible:
            records.append(TrimRecord(pt.provenance, pt.Y, sol.status, None, 0, None, None, sol.dual_gap))
            continue
        vals, vecs = np.linalg.eigh(sol.sigma)
        keep = vals >= thr
        kept = 0
        for k in np.flatnonzero(keep)[::-1]:
            V = vecs[:, k].reshape(r, B)
            u, s, _ = np.linalg.svd(V, full_matrices=False)
            for j in range(len(s)):
                if s[j] > ZERO_TOL * s[0]:
                    new_cols.append(u[:, j])
                    kept += 1
        res = max(sol.residuals.values()) if sol.residuals else 0.0
        records.append(
            TrimRecord(pt.provenance, pt.Y, "optimal", sol.objective, kept, float(vals[keep].sum()), res, sol.dual_gap)
        )
        if accepted is None and pt.provenance == "oracle-witness":
            accepted = pt.provenance
    if not new_cols:
        raise TrimFailureError(ctx.h, i, "S2", f"all {len(points)} net points infeasible")
    cols = np.stack(new_cols, axis=1)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    basis = u[:, s > 1e-8 * s[0]]
    members = [span.to_mps(basis[:, j]) for j in range(basis.shape[1])]
    members = [scale_state(m, 1.0 / norm(m)) for m in members]
    diag.update(
        {
            "net_points": len(points),
            "feasible": sum(1 for rec in records if rec.status == "optimal"),
            "prescreened": sum(1 for rec in records if rec.status == "prescreened"),
            "new_vectors": len(members),
            "Lambda_minus": big_lambda(ctx.g) - 1e-9,
            "min_kept_mass": min((rec.kept_mass for rec in records if rec.kept_mass is not None), default=None),
            "max_residual": max((rec.residual for rec in records if rec.residual is not None), default=None),
            "max_dual_gap": max((abs(rec.dual_gap) for rec in records if rec.dual_gap is not None), default=None),
            "witness_point_feasible": any(
                rec.status == "optimal" for rec in records if rec.provenance == "oracle-witness"
            ),
        }
    )
    out = _with_states(S1, members + L, "S2", error_kind="delta", error=cfg.target("S2", 0.01))
    diag["accepted_provenance"] = sorted({rec.provenance for rec in records if rec.status == "optimal"})
    try:
        out = ctx.check(out, "delta", cfg.target("S2", 0.01))
    finally:
        ctx.rows[-1]["trim"] = diag
        ctx.rows[-1]["net_records"] = [dict(rec.__dict__) for rec in records]
    return out


# ---------------------------------------------------------------------------
# truncate, reduce, final reduce
# ---------------------------------------------------------------------------


def truncate_set(S2: ViableSet, L: Sequence[MPS], P: int, ctx: PassContext | None = None) -> ViableSet:
    """Cap every bond of every member at ``P`` and re-add ``L``."""
    out: list[MPS] = []
    recycled = {id(v) for v in L}
    for s in S2.states:
        if id(s) in recycled:
            continue
        if s.max_bond <= P:
            out.append(s)
        else:
            out.append(truncate_all_bonds(s, P))
    out.extend(L)
    target = ctx.cfg.target("S3", 0.2) if ctx is not None else 0.2
    S3 = _with_states(S2, out, "S3", error_kind="delta", error=target)
    if ctx is not None:
        S3 = ctx.check(S3, "delta", target)
    return S3


def reduce(S3: ViableSet, K: AgspOperator, L: Sequence[MPS], ctx: PassContext | None = None) -> ViableSet:
    """Apply every left operator-Schmidt factor of ``K`` at the current cut.

    Raises
    ------
    ValueError
        If ``K`` has no MPO form to decompose.
    """
    i = S3.i
    rel_tol = ctx.cfg.reduce_rel_tol if ctx is not None else ZERO_TOL
    ctol = ctx.cfg.apply_compress_tol if ctx is not None else None
    split = K.decompose(i, rel_tol)
    out: list[MPS] = []
    for s in S3.states:
        for j in range(split.n_terms):
            v = apply_mpo(split.left_factor(j), s, compress_tol=ctol)
            if "zero-norm" in v.flags or norm(v) <= 1e-14 * max(norm(s), 1e-300):
                continue
            out.append(scale_state(v, 1.0 / norm(v)))
    out.extend(L)
    target = K.schedule.zeta
    S4 = _with_states(S3, out, "S4", error_kind="Delta", error=target)
    S4 = replace(S4, s_bound=split.n_terms * S3.size + len(L))
    if ctx is not None:
        S4 = ctx.check(S4, "Delta", ctx.cfg.target("S4", target))
        S4 = replace(S4, measured={**S4.measured, "terms": split.n_terms})
    return S4


def final_reduce(S3: ViableSet, K_strong: AgspOperator, prev: Sequence[MPS], ctx: PassContext | None = None) -> ViableSet:
    """Apply the whole final filter to every member and append ``prev``."""
    if K_strong.mpo is None:
        raise ValueError("final filter needs an MPO form")
    ctol = ctx.cfg.apply_compress_tol if ctx is not None else None
    out = []
    for s in S3.states:
        v = apply_mpo(K_strong.mpo, s, compress_tol=ctol)
        if "zero-norm" in v.flags or norm(v) <= 1e-14:
            continue
        out.append(scale_state(v, 1.0 / norm(v)))
    out.extend(prev)
    target = K_strong.schedule.zeta
    Sn = _with_states(S3, out, "S4", error_kind="Delta", error=target)
    if ctx is not None:
        Sn = ctx.check(Sn, "Delta", ctx.cfg.target("final", target))
    return Sn


# ---------------------------------------------------------------------------
# steps
# ---------------------------------------------------------------------------


def step(S_prev: ViableSet, L: Sequence[MPS], ctx: PassContext) -> ViableSet:
    """Extend, trim, truncate and reduce one site further along."""
    S1 = extend(S_prev)
    ctx.record(S1.row())
    S2 = trim(S1, L, ctx)
    S3 = truncate_set(S2, L, ctx.cfg.P, ctx)
    if ctx.K is None:
        return S3
    return reduce(S3, ctx.K, L, ctx)


def final_step(S_prev: ViableSet, ctx: PassContext) -> ViableSet:
    """The last step: trims against whole-chain data and applies the final filter."""
    S1 = extend(S_prev)
    ctx.record(S1.row())
    L = [scale_state(p, 1.0 / norm(p)) for p in ctx.prev]
    S2 = trim(S1, L, ctx)
    S3 = truncate_set(S2, L, ctx.cfg.P, ctx)
    if ctx.K_final is None:
        return S3
    return final_reduce(S3, ctx.K_final, ctx.prev, ctx)


__all__ = [
    "BoundaryContraction",
    "NetPoint",
    "PassContext",
    "PipelineConfig",
    "ViableSet",
    "WitnessReport",
    "big_lambda",
    "boundary_contraction",
    "contraction_net",
    "contraction_net_size",
    "delta_high",
    "delta_low",
    "dense_contraction",
    "dense_left_state",
    "energy_net",
    "extend",
    "final_reduce",
    "final_step",
    "initial_set",
    "linear_combine",
    "measure_witness",
    "reduce",
    "step",
    "theory_constants",
    "trim",
    "truncate_set",
]
