"""Span reduction and the two convex programs of the ground-space algorithm.

Both programs optimize a density matrix ``sigma`` on the span of a set of
MPS (tensored, for the trim program, with a ``B``-dimensional bond space).
Everything is expressed in an orthonormal basis of the span obtained from
the Gram matrix, so the programs are small dense problems.

The trim program

    min  Tr(C sigma)
    s.t. Tr sigma = 1,  Tr(H_L sigma) <= y,  ||Phi(sigma) - X||_1 <= r,
         sigma >= 0

is solved through its dual

    max  mu - lam*y - <Z, X> - nu*r
    s.t. C - mu*1 + lam*H_L + Phi^dagger(Z) >= 0,  -nu*1 <= Z <= nu*1,
         lam >= 0,

which has only ``(dB)**2 + 3`` scalar unknowns; ``sigma`` is read off as
the multiplier of the large matrix inequality. ``Phi`` is the partial
trace over all but the last site of the block, acting on span coordinates.
"""

from __future__ import annotations

import os
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import kernels
from .errors import DegenerateStateError, PreconditionError, SpanError
from .tensor_mps import MPO, MPS, ZERO_TOL, linear_combine, norm, overlap, scale_state

GRAM_TOL = 1e-10
TIE_EIG_TOL = 1e-8
PREV_TOL = 1e-9
# Interior-point tolerances tried in order; overly tight ones can stall.
SOLVER_TOLERANCES = (1e-8, 1e-7)
SOLVER_MAXITERS = 50
RESIDUAL_TOL = 1e-7
# Previous states may leave the span by this much (Gram-cutoff round-off).
SPAN_RESID_TOL = 1e-6
SUM_CHUNK = 16
REAL_SPAN_TOL = 1e-8


# ---------------------------------------------------------------------------
# spans
# ---------------------------------------------------------------------------


@dataclass
class SpanBasis:
    """Orthonormal basis ``e_p = sum_a T[a, p] s_a`` of ``Span(states)``.

    Attributes
    ----------
    states : list of MPS
        The spanning set, all of the same length.
    T : ndarray
        ``(len(states), rank)`` coefficient matrix.
    gram_eigenvalues : ndarray
        Eigenvalues of the Gram matrix (descending), for diagnostics.
    ops : dict
        Projected operators ``T^dagger <s_a|O|s_b> T`` by name.
    real : bool
        True when the span is closed under complex conjugation and the
        basis vectors ``e_p`` are real vectors; real operators then have
        real matrices in this basis.
    """

    states: list[MPS]
    T: np.ndarray
    gram_eigenvalues: np.ndarray
    ops: dict[str, np.ndarray] = field(default_factory=dict)
    real: bool = False
    _reduced: np.ndarray | None = field(default=None, repr=False)

    @property
    def rank(self) -> int:
        return self.T.shape[1]

    @property
    def length(self) -> int:
        return self.states[0].length

    @property
    def d(self) -> int:
        return self.states[0].d

    def coords(self, v: MPS) -> tuple[np.ndarray, float]:
        """Coordinates ``<e_p|v>`` and the norm of the part outside the span."""
        ov = np.array([overlap(s, v) for s in self.states])
        c = self.T.conj().T @ ov
        nv2 = overlap(v, v).real
        resid = float(np.sqrt(max(nv2 - float(np.vdot(c, c).real), 0.0)))
        return c, resid

    def coords_many(self, vs: Sequence[MPS]) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of several states as columns, plus residual norms."""
        if not vs:
            return np.zeros((self.rank, 0), dtype=np.complex128), np.zeros(0)
        ov = kernels.gram([s.tensors for s in self.states], [v.tensors for v in vs])
        c = self.T.conj().T @ ov
        nv2 = np.array([overlap(v, v).real for v in vs])
        resid = np.sqrt(np.maximum(nv2 - np.sum(np.abs(c) ** 2, axis=0), 0.0))
        return c, resid

    def to_mps(self, c: np.ndarray, drop: float = 1e-14) -> MPS:
        """The state ``sum_p c_p e_p`` as an exactly compressed MPS.

        Members are summed in chunks of ``SUM_CHUNK`` with exact
        compression after each chunk, which keeps intermediate bonds small.
        """
        w = self.T @ np.asarray(c)
        scale = np.abs(w).max() if w.size else 0.0
        idx = [k for k in range(len(w)) if abs(w[k]) > drop * scale]
        if not idx:
            raise DegenerateStateError("zero coefficient vector")
        parts = [(self.states[k], w[k]) for k in idx]
        while len(parts) > 1:
            merged = []
            for lo in range(0, len(parts), SUM_CHUNK):
                chunk = parts[lo : lo + SUM_CHUNK]
                if len(chunk) == 1:
                    merged.append(chunk[0])
                    continue
                merged.append((linear_combine([c[0] for c in chunk], [c[1] for c in chunk]), 1.0))
            parts = merged
        state, weight = parts[0]
        return state if weight == 1.0 else scale_state(state, weight)

    def dense_basis(self) -> np.ndarray:
        """Dense columns ``e_p`` (small chains only)."""
        from .tensor_mps import to_dense

        mat = np.stack([to_dense(s) for s in self.states], axis=1)
        return mat @ self.T

    def reduced_matrices(self) -> np.ndarray:
        """``R[p, q] = Tr_{all but last site}(|e_p><e_q|)`` as ``(r, r, d, d)``.

        Entry ``R[p, q, s, t]`` is ``sum_x e_p(x, s) conj(e_q(x, t))``.
        """
        if self._reduced is None:
            m = len(self.states)
            n = self.length
            d = self.d
            raw = np.empty((m, m, d, d), dtype=np.complex128)
            for a in range(m):
                ta = self.states[a].tensors
                last_a = ta[-1][:, :, 0]  # (l, s)
                for b in range(a, m):
                    tb = self.states[b].tensors
                    env = kernels.left_env(tb, ta, n - 1)  # (lb, la)
                    last_b = tb[-1][:, :, 0]
                    val = last_a.T @ env.T @ last_b.conj()  # (s, t)
                    raw[a, b] = val
                    if b != a:
                        raw[b, a] = val.conj().T
            self._reduced = np.einsum("ap,bq,abst->pqst", self.T, self.T.conj(), raw, optimize=True)
        return self._reduced


def _real_rotation(T: np.ndarray, ts: Sequence[Sequence[np.ndarray]], tol: float = REAL_SPAN_TOL) -> np.ndarray | None:
    """Unitary ``Q`` such that the basis ``T Q`` consists of real vectors.

    Members often carry arbitrary global phases, so a span of real vectors
    can have a complex Gram matrix. Complex conjugation acts on span
    coordinates as ``c -> M conj(c)`` with ``M = T^dagger W conj(T)`` and
    ``W[a, b] = <s_a|conj(s_b)>``; the span is closed under conjugation
    exactly when ``M`` is unitary. Vectors fixed by the conjugation have
    real mutual inner products, and an orthonormal set of ``rank`` of them
    is a real basis. Returns None when the span is not closed.
    """
    r = T.shape[1]
    conj_ts = [[t.conj() for t in state] for state in ts]
    W = kernels.gram(ts, conj_ts)
    M = T.conj().T @ W @ T.conj()
    if np.abs(M.conj().T @ M - np.eye(r)).max() > tol:
        return None
    eye = np.eye(r)
    fixed = np.concatenate([eye + M, 1j * (eye - M)], axis=1)
    Gr = (fixed.conj().T @ fixed).real
    vals, vecs = np.linalg.eigh((Gr + Gr.T) / 2)
    vals, vecs = vals[::-1][:r], vecs[:, ::-1][:, :r]
    if vals[-1] <= tol:
        return None
    Q = fixed @ vecs / np.sqrt(vals)[None, :]
    if np.abs(Q.conj().T @ Q - eye).max() > tol:
        return None
    return Q


def build_span(states: Sequence[MPS], ops: dict[str, MPO] | None = None, tol: float = GRAM_TOL) -> SpanBasis:
    """Rank-revealing orthonormalization of a set of MPS.

    Gram eigenvalues below ``tol`` times the largest are discarded. The
    listed MPOs are projected onto the resulting basis and Hermitized.

    Raises
    ------
    DegenerateStateError
        If the set is empty or numerically zero.
    """
    states = list(states)
    if not states:
        raise DegenerateStateError("cannot span an empty set")
    ts = [s.tensors for s in states]
    G = kernels.gram(ts, ts)
    G = (G + G.conj().T) / 2
    vals, vecs = np.linalg.eigh(G)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if vals[0] <= 1e-300:
        raise DegenerateStateError("all states are numerically zero")
    keep = vals > tol * vals[0]
    T = vecs[:, keep] / np.sqrt(vals[keep])[None, :]
    Q = _real_rotation(T, ts)
    if Q is not None:
        T = T @ Q
    span = SpanBasis(states=states, T=T, gram_eigenvalues=vals, real=Q is not None)
    for name, op in (ops or {}).items():
        M = kernels.sandwich_gram(ts, op.tensors, ts)
        P = T.conj().T @ M @ T
        span.ops[name] = (P + P.conj().T) / 2
    return span


# ---------------------------------------------------------------------------
# small dense SDP solver (dual form, Schur-complement interior point)
# ---------------------------------------------------------------------------


@dataclass
class ProgramSolution:
    """Solution of one of the convex programs.

    Attributes
    ----------
    sigma : ndarray or None
        Optimal density matrix in span coordinates (None if infeasible).
    objective : float or None
    residuals : dict
        Constraint violations measured on ``sigma`` after the solve.
    status : str
        ``"optimal"``, ``"infeasible"`` or ``"failed"``.
    dual_gap : float or None
        Primal-dual objective gap reported by the solver.
    """

    sigma: np.ndarray | None
    objective: float | None
    residuals: dict[str, float]
    status: str
    dual_gap: float | None = None
    solver: str = ""
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def hermitian_basis(k: int) -> list[np.ndarray]:
    """Orthonormal basis of ``k x k`` Hermitian matrices under ``Re Tr(A B)``."""
    out = []
    for a in range(k):
        e = np.zeros((k, k), dtype=np.complex128)
        e[a, a] = 1.0
        out.append(e)
    for a in range(k):
        for b in range(a + 1, k):
            e = np.zeros((k, k), dtype=np.complex128)
            e[a, b] = e[b, a] = 1 / np.sqrt(2)
            out.append(e)
            f = np.zeros((k, k), dtype=np.complex128)
            f[a, b] = -1j / np.sqrt(2)
            f[b, a] = 1j / np.sqrt(2)
            out.append(f)
    return out


def _embed(m: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a Hermitian matrix."""
    re, im = m.real, m.imag
    return np.block([[re, -im], [im, re]])


def _unembed(z: np.ndarray) -> np.ndarray:
    k = z.shape[0] // 2
    a, b, c, dd = z[:k, :k], z[:k, k:], z[k:, :k], z[k:, k:]
    return (a + dd) + 1j * (c - b)


@dataclass(frozen=True)
class TraceNormBall:
    """Constraint ``||Phi(sigma) - X||_1 <= radius`` with ``Phi`` given by its adjoint on a basis."""

    adjoints: tuple[np.ndarray, ...]  # Phi^dagger(E_k)
    basis: tuple[np.ndarray, ...]  # E_k
    X: np.ndarray
    radius: float


def _is_real(mats: Sequence[np.ndarray], tol: float = 1e-12) -> bool:
    for m in mats:
        if np.iscomplexobj(m) and np.abs(m.imag).max(initial=0.0) > tol * max(1.0, np.abs(m).max(initial=0.0)):
            return False
    return True


def _solve_dual(
    C: np.ndarray,
    ineqs: Sequence[tuple[np.ndarray, float]],
    ball: TraceNormBall | None,
) -> tuple[dict[str, Any], bool]:
    """Solve ``min Tr(C s)`` over density matrices with linear and trace-norm constraints.

    When every matrix of the program is real, the conjugate of a feasible
    point is feasible with the same objective, so their average is a real
    optimum; the program is then solved over real symmetric matrices, which
    halves the size of the cone. Returns the solver output and whether the
    real form was used.
    """
    from cvxopt import matrix, solvers

    basis: list[np.ndarray] = list(ball.basis) if ball is not None else []
    adjoints: list[np.ndarray] = list(ball.adjoints) if ball is not None else []
    real = _is_real([C] + [a for a, _ in ineqs] + ([ball.X] if ball is not None else []))
    if real and ball is not None:
        keep = [k for k, e in enumerate(basis) if _is_real([e])]
        basis = [basis[k].real for k in keep]
        adjoints = [adjoints[k] for k in keep]
        real = _is_real(adjoints)
        if not real:
            basis = list(ball.basis)
            adjoints = list(ball.adjoints)
    emb = (lambda m: np.ascontiguousarray(np.real(m))) if real else _embed

    N = C.shape[0]
    m = len(ineqs)
    K = len(basis)
    nx = 1 + m + (1 + K if ball is not None else 0)
    # big LMI: S = C - mu*1 + sum lam_i A_i + sum z_k F_k  >= 0
    big_cols = [(-1.0) * np.eye(N, dtype=np.complex128)] + [a for a, _ in ineqs]
    if ball is not None:
        big_cols.append(np.zeros((N, N), dtype=np.complex128))
        big_cols.extend(adjoints)
    G_big = np.stack([-emb(mk).reshape(-1, order="F") for mk in big_cols], axis=1)
    Gs = [matrix(G_big)]
    hs = [matrix(emb(C))]
    c = np.zeros(nx)
    c[0] = -1.0
    for i, (_, b) in enumerate(ineqs):
        c[1 + i] = b
    Gl = np.zeros((m + (1 if ball is not None else 0), nx))
    for i in range(m):
        Gl[i, 1 + i] = -1.0
    if ball is not None:
        inu = 1 + m
        c[inu] = ball.radius
        for k, e in enumerate(basis):
            c[inu + 1 + k] = float(np.trace(e @ ball.X).real)
        Gl[m, inu] = -1.0
        dB = ball.X.shape[0]
        eye = emb(np.eye(dB, dtype=np.complex128))
        for sign in (+1.0, -1.0):
            cols = []
            for j in range(nx):
                if j == inu:
                    cols.append(-eye)
                elif j > inu:
                    cols.append(sign * emb(basis[j - inu - 1]))
                else:
                    cols.append(np.zeros_like(eye))
            Gs.append(matrix(np.stack([col.reshape(-1, order="F") for col in cols], axis=1)))
            hs.append(matrix(np.zeros_like(eye)))
    kwargs = {}
    if Gl.shape[0]:
        kwargs = {"Gl": matrix(Gl), "hl": matrix(np.zeros(Gl.shape[0]))}
    verbose = bool(os.environ.get("DGSA_SDP_VERBOSE"))
    sol = None
    for tol in SOLVER_TOLERANCES:
        opts = {"show_progress": verbose, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": SOLVER_MAXITERS}
        sol = solvers.sdp(matrix(c), Gs=Gs, hs=hs, options=opts, **kwargs)
        if sol["status"] in ("optimal", "dual infeasible", "primal infeasible"):
            break
    return sol, real


def _density_from(sol: dict[str, Any], real: bool) -> np.ndarray:
    z = np.array(sol["zs"][0])
    z = (z + z.T) / 2
    sigma = z.astype(np.complex128) if real else _unembed(z)
    return (sigma + sigma.conj().T) / 2


def _clean_density(sigma: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals[None, :]) @ vecs.conj().T
    tr = float(np.trace(out).real)
    return out / tr if tr > 0 else out


def solve_density_program(
    C: np.ndarray, ineqs: Sequence[tuple[np.ndarray, float]] = (), ball: TraceNormBall | None = None
) -> ProgramSolution:
    """Generic small SDP over density matrices (see module docstring).

    The returned ``sigma`` is projected onto the PSD cone and renormalized;
    the residuals are measured on that cleaned matrix.
    """
    # Adding the identity shifts the objective by exactly 1 on density
    # matrices; it keeps the solver's initial slack away from the boundary
    # when C vanishes (the feasibility-only case).
    sol, real = _solve_dual(C + np.eye(C.shape[0]), ineqs, ball)
    status = sol["status"]
    info = {"solver_status": status, "iterations": int(sol.get("iterations", 0) or 0), "real_form": real}
    if status == "dual infeasible":
        return ProgramSolution(None, None, {}, "infeasible", None, "cvxopt-dual", info)
    if sol.get("zs") is None or sol["zs"][0] is None:
        return ProgramSolution(None, None, {}, "failed", None, "cvxopt-dual", info)
    raw = _density_from(sol, real)
    sigma = _clean_density(raw)
    res = {
        "trace": abs(float(np.trace(raw).real) - 1.0),
        "psd": float(max(0.0, -np.linalg.eigvalsh(raw)[0])),
    }
    for i, (a, b) in enumerate(ineqs):
        res[f"ineq_{i}"] = max(0.0, float(np.trace(a @ sigma).real) - b)
    if ball is not None:
        phi = apply_phi_from_adjoints(sigma, ball)
        res["trace_norm"] = max(0.0, float(np.abs(np.linalg.eigvalsh(phi - ball.X)).sum()) - ball.radius)
    gap = sol.get("gap")
    pobj = float(np.trace(C @ sigma).real)
    worst = max(res.values()) if res else 0.0
    out_status = "optimal" if worst <= RESIDUAL_TOL else "failed"
    return ProgramSolution(sigma, pobj, res, out_status, None if gap is None else float(gap), "cvxopt-dual", info)


def apply_phi_from_adjoints(sigma: np.ndarray, ball: TraceNormBall) -> np.ndarray:
    """Reconstruct ``Phi(sigma)`` from ``<E_k, Phi(sigma)> = Tr(F_k sigma)``."""
    out = np.zeros_like(ball.X)
    for e, f in zip(ball.basis, ball.adjoints):
        out = out + float(np.trace(f @ sigma).real) * e
    return out


# ---------------------------------------------------------------------------
# the trim program
# ---------------------------------------------------------------------------


@dataclass
class TrimProgram:
    """Fixed data of the trim program on one span (reused across net points).

    Attributes
    ----------
    span : SpanBasis
        Span of the candidate half-chain states.
    B : int
        Dimension of the bond space tensored onto the span.
    objective : ndarray
        ``C`` in coordinates of ``span (x) C^B``.
    HL : ndarray
        Left-block Hamiltonian in the same coordinates.
    """

    span: SpanBasis
    B: int
    objective: np.ndarray
    HL: np.ndarray
    adjoints: tuple[np.ndarray, ...]
    basis: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return self.span.rank * self.B

    def phi(self, sigma: np.ndarray) -> np.ndarray:
        """Partial trace of ``sigma`` onto (last site) (x) (bond space)."""
        r, B = self.span.rank, self.B
        R = self.span.reduced_matrices()
        d = R.shape[2]
        s4 = sigma.reshape(r, B, r, B)
        out = np.einsum("pqst,pbqc->sbtc", R, s4, optimize=True)
        return out.reshape(d * B, d * B)


def make_trim_program(span: SpanBasis, B: int, objective: np.ndarray, HL: np.ndarray) -> TrimProgram:
    """Assemble the trim program on ``span (x) C^B``.

    Parameters
    ----------
    objective, HL : ndarray
        ``rank x rank`` Hermitian matrices in span coordinates; they are
        tensored with the identity on the bond space.
    """
    r = span.rank
    R = span.reduced_matrices()
    d = R.shape[2]
    eyeB = np.eye(B)
    C = np.kron(objective, eyeB)
    H = np.kron(HL, eyeB)
    basis = tuple(hermitian_basis(d * B))
    adj = []
    for e in basis:
        e4 = e.reshape(d, B, d, B)  # E[(s, b), (t, c)]
        # F[(q, c), (p, b)] = sum_{s,t} E[(t, c), (s, b)] R[p, q, s, t]
        f = np.einsum("tcsb,pqst->qcpb", e4, R, optimize=True).reshape(r * B, r * B)
        adj.append((f + f.conj().T) / 2)
    return TrimProgram(span, B, (C + C.conj().T) / 2, (H + H.conj().T) / 2, tuple(adj), basis)


def solve_trim_program(program: TrimProgram, X: np.ndarray, Y: float, xi: float) -> ProgramSolution:
    """Solve the trim program for one net point.

    Parameters
    ----------
    X : ndarray
        Candidate boundary contraction, ``dB x dB`` Hermitian.
    Y : float
        Absolute upper bound on ``Tr(H_L sigma)``.
    xi : float
        Net resolution; the trace-norm radius is ``xi / 2``.
    """
    ball = TraceNormBall(program.adjoints, program.basis, np.asarray(X, dtype=np.complex128), xi / 2)
    sol = solve_density_program(program.objective, [(program.HL, float(Y))], ball)
    sol.info["Y"] = float(Y)
    return sol


# ---------------------------------------------------------------------------
# the ground-state program
# ---------------------------------------------------------------------------


def _null_complement(cols: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(cols)`` in ``C^dim``."""
    if cols.shape[1] == 0:
        return np.eye(dim, dtype=np.complex128)
    u, s, _ = np.linalg.svd(cols, full_matrices=True)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300)))
    return u[:, rank:]


def solve_gsa_program(span: SpanBasis, prev: Sequence[MPS], H_name: str = "H") -> ProgramSolution:
    """Minimize ``Tr(H sigma)`` on the span subject to ``<gamma_j|sigma|gamma_j> = 0``.

    Solved exactly: the feasible set consists of density matrices supported
    on the orthogonal complement of the previous states inside the span, so
    the optimum is the normalized projector onto the least eigenspace of
    ``H`` compressed to that complement.

    Raises
    ------
    SpanError
        If a previous state is not representable in the span.
    """
    H = span.ops[H_name]
    cols, resid = span.coords_many(list(prev))
    if resid.size and resid.max() > SPAN_RESID_TOL:
        raise SpanError(f"previous state outside the span (residual {resid.max():.2e})")
    N = _null_complement(cols, span.rank)
    if N.shape[1] == 0:
        return ProgramSolution(None, None, {}, "infeasible", None, "eigen")
    Hc = N.conj().T @ H @ N
    vals, vecs = np.linalg.eigh((Hc + Hc.conj().T) / 2)
    tol = 1e-10 * max(1.0, abs(vals[0]))
    k = int(np.sum(vals <= vals[0] + tol))
    low = N @ vecs[:, :k]
    sigma = low @ low.conj().T / k
    prev_res = 0.0
    if cols.shape[1]:
        cn = cols / np.linalg.norm(cols, axis=0)[None, :]
        prev_res = float(max(np.vdot(cn[:, j], sigma @ cn[:, j]).real for j in range(cols.shape[1])))
    res = {
        "trace": abs(float(np.trace(sigma).real) - 1.0),
        "psd": 0.0,
        "prev": prev_res,
        "prev_outside_span": float(resid.max()) if resid.size else 0.0,
    }
    return ProgramSolution(sigma, float(vals[0]), res, "optimal", 0.0, "eigen", {"degeneracy": k})


def solve_gsa_program_sdp(span: SpanBasis, prev: Sequence[MPS], H_name: str = "H") -> ProgramSolution:
    """Interior-point solution of the ground-state program (cross-check route)."""
    H = span.ops[H_name]
    cols, resid = span.coords_many(list(prev))
    if resid.size and resid.max() > SPAN_RESID_TOL:
        raise SpanError(f"previous state outside the span (residual {resid.max():.2e})")
    ineqs = []
    for j in range(cols.shape[1]):
        c = cols[:, j] / np.linalg.norm(cols[:, j])
        ineqs.append((np.outer(c, c.conj()), PREV_TOL))
    return solve_density_program(H, ineqs, None)


# ---------------------------------------------------------------------------
# demixing and orthogonalization
# ---------------------------------------------------------------------------


def leading_eigenvector(sigma: np.ndarray, H: np.ndarray, seed: int = 7) -> np.ndarray:
    """Leading eigenvector of ``sigma`` with the energy tie-break.

    Among eigenvectors whose eigenvalue is within ``1e-8`` of the top one,
    the combination of least ``H``-energy is returned; remaining ties are
    resolved by a fixed generic perturbation inside the tied space.
    """
    vals, vecs = np.linalg.eigh((sigma + sigma.conj().T) / 2)
    top = vals[-1]
    idx = np.flatnonzero(vals >= top - TIE_EIG_TOL)
    V = vecs[:, idx]
    if V.shape[1] == 1:
        return V[:, 0]
    Hs = V.conj().T @ H @ V
    ev, ew = np.linalg.eigh((Hs + Hs.conj().T) / 2)
    low = np.flatnonzero(ev <= ev[0] + 1e-10 * max(1.0, abs(ev[0])))
    W = V @ ew[:, low]
    if W.shape[1] == 1:
        return W[:, 0]
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(W.shape[0], W.shape[0])) + 1j * rng.normal(size=(W.shape[0], W.shape[0]))
    P = W.conj().T @ (g + g.conj().T) @ W
    _, pw = np.linalg.eigh((P + P.conj().T) / 2)
    v = W @ pw[:, 0]
    j = int(np.argmax(np.abs(v)))
    return v * np.exp(-1j * np.angle(v[j]))


def demix(
    sol: ProgramSolution,
    H_span: np.ndarray,
    eps0: float,
    eps: float,
    Delta: float,
    g: int,
    span: SpanBasis | None = None,
):
    """Extract a low-energy pure state from a low-energy mixed state.

    Requires ``Tr(sigma H) <= eps0 + Delta*eps/(2g+1)`` and
    ``Delta <= 1/(3g)``; the returned leading eigenvector then has energy at
    most ``eps0 + Delta*eps``. Returns span coordinates, or an MPS when
    ``span`` is given.

    Raises
    ------
    PreconditionError
        If either hypothesis fails.
    """
    sigma = sol.sigma
    energy = float(np.trace(sigma @ H_span).real)
    if Delta > 1.0 / (3 * g) + 1e-15:
        raise PreconditionError(f"Delta={Delta} exceeds 1/(3g)")
    if energy > eps0 + Delta * eps / (2 * g + 1) + 1e-12:
        raise PreconditionError("mixed state energy above the demixing threshold")
    v = leading_eigenvector(sigma, H_span)
    if span is None:
        return v
    return span.to_mps(v)


def orthogonalize(v: MPS, prev: Sequence[MPS]) -> MPS:
    """Remove the components of ``v`` along ``span(prev)`` and normalize.

    Raises
    ------
    SpanError
        If ``v`` lies (numerically) inside ``span(prev)``.
    """
    prev = list(prev)
    nv = norm(v)
    if not prev:
        return scale_state(v, 1.0 / nv)
    ts = [p.tensors for p in prev]
    G = kernels.gram(ts, ts)
    b = kernels.gram(ts, [v.tensors])[:, 0]
    coef = np.linalg.solve(G, b)
    out = linear_combine([v] + prev, [1.0] + list(-coef))
    nr = norm(out)
    if nr < 1e-10 * max(nv, 1e-300) or "zero-norm" in out.flags:
        raise SpanError("state lies inside the span of the previous states")
    # A second pass removes the round-off left by the first.
    b2 = kernels.gram(ts, [out.tensors])[:, 0]
    if np.abs(b2).max() > 1e-13 * nr:
        coef2 = np.linalg.solve(G, b2)
        out = linear_combine([out] + prev, [1.0] + list(-coef2))
        nr = norm(out)
    return scale_state(out, 1.0 / nr)


__all__ = [
    "ZERO_TOL",
    "ProgramSolution",
    "SpanBasis",
    "TrimProgram",
    "build_span",
    "demix",
    "leading_eigenvector",
    "make_trim_program",
    "orthogonalize",
    "solve_density_program",
    "solve_gsa_program",
    "solve_gsa_program_sdp",
    "solve_trim_program",
]
