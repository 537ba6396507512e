"""Tests for spans, the convex programs, demixing and orthogonalization."""

import itertools

import numpy as np
import pytest

from dgsa.errors import PreconditionError, SpanError
from dgsa.model import make_model, partition
from dgsa.oracle import diagonalize
from dgsa.sdp import (
    ProgramSolution,
    build_span,
    demix,
    hermitian_basis,
    leading_eigenvector,
    make_trim_program,
    orthogonalize,
    solve_gsa_program,
    solve_gsa_program_sdp,
    solve_trim_program,
)
from dgsa.tensor_mps import (
    from_dense,
    linear_combine,
    product_state,
    random_mps,
    scale_state,
    to_dense,
)


def _basis_states(n):
    return [product_state(bits) for bits in itertools.product((0, 1), repeat=n)]


def test_span_orthonormal_input():
    span = build_span(_basis_states(3))
    assert span.rank == 8
    E = span.dense_basis()
    assert np.abs(E.conj().T @ E - np.eye(8)).max() <= 1e-12
    assert np.allclose(span.gram_eigenvalues, 1.0)


def test_span_duplicate_drops_rank(rng):
    states = [random_mps(4, 2, 2, rng) for _ in range(3)]
    assert build_span(states + [states[1]]).rank == 3


def test_span_projected_h_interlaces(rng):
    H = make_model("tfi", 5, {"h": 0.5})
    full = np.linalg.eigvalsh(H.dense())
    for _ in range(5):
        states = [random_mps(5, 2, 2, rng) for _ in range(6)]
        span = build_span(states, {"H": H.mpo})
        sub = np.linalg.eigvalsh(span.ops["H"])
        m, k = len(full), len(sub)
        for j in range(k):
            assert full[j] - 1e-9 <= sub[j] <= full[m - k + j] + 1e-9


def test_span_real_detection(rng):
    assert build_span(_basis_states(2)).real
    states = [scale_state(s, np.exp(0.7j)) for s in _basis_states(2)]
    assert build_span(states).real
    cplx = [random_mps(3, 2, 2, rng) for _ in range(2)]
    assert not build_span(cplx).real


def test_span_to_mps_roundtrip(rng):
    states = [random_mps(4, 2, 2, rng) for _ in range(4)]
    span = build_span(states)
    c = rng.normal(size=span.rank) + 1j * rng.normal(size=span.rank)
    v = span.to_mps(c)
    assert np.abs(to_dense(v) - span.dense_basis() @ c).max() <= 1e-10
    coords, resid = span.coords(v)
    assert np.abs(coords - c).max() <= 1e-9
    assert resid <= 1e-6


def test_hermitian_basis_orthonormal():
    b = hermitian_basis(3)
    assert len(b) == 9
    gram = np.array([[np.trace(x @ y).real for y in b] for x in b])
    assert np.abs(gram - np.eye(9)).max() <= 1e-12


def _trim_setup(B=1):
    H = make_model("tfi", 4, {"h": 0.4})
    part = partition(H, 3)
    span = build_span(_basis_states(3), {"HL": part.left_mpo})
    return span, span.ops["HL"], B


def test_trim_zero_objective():
    span, HL, B = _trim_setup()
    prog = make_trim_program(span, B, np.zeros((span.rank, span.rank)), HL)
    X = np.eye(2) / 2
    sol = solve_trim_program(prog, X, 10.0, 0.5)
    assert sol.feasible
    assert sol.objective == pytest.approx(0.0, abs=1e-7)
    assert max(sol.residuals.values()) <= 1e-7


def test_trim_witness_point_is_feasible(rng):
    span, HL, B = _trim_setup()
    Pi = rng.normal(size=(8, 8))
    Pi = Pi @ Pi.T / 8
    prog = make_trim_program(span, B, Pi, HL)
    w = rng.normal(size=8) + 1j * rng.normal(size=8)
    w /= np.linalg.norm(w)
    rho = np.outer(w, w.conj())
    X = prog.phi(rho)
    Y = float(np.vdot(w, HL @ w).real)
    sol = solve_trim_program(prog, X, Y + 1e-9, 0.1)
    assert sol.feasible
    assert sol.objective <= float(np.vdot(w, Pi @ w).real) + 1e-6


def test_trim_infeasible_far_point():
    span, HL, B = _trim_setup()
    prog = make_trim_program(span, B, np.zeros((8, 8)), HL)
    sol = solve_trim_program(prog, 10 * np.eye(2), 10.0, 0.1)
    assert not sol.feasible
    assert sol.status in ("infeasible", "failed")


def test_gsa_program_unconstrained():
    H = make_model("heisenberg", 3)
    span = build_span(_basis_states(3), {"H": H.mpo})
    sol = solve_gsa_program(span, [])
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(H.dense())[0], abs=1e-10)


def test_gsa_program_ising_second_state():
    H = make_model("ising", 6)
    spec = diagonalize(H)
    span = build_span(_basis_states(6), {"H": H.mpo})
    g1 = from_dense(spec.eigenvectors[:, 0], 6)
    sol = solve_gsa_program(span, [g1])
    assert float(np.trace(sol.sigma @ span.ops["H"]).real) == pytest.approx(
        spec.eps0, abs=1e-7
    )
    lead = span.dense_basis() @ leading_eigenvector(sol.sigma, span.ops["H"])
    assert abs(np.vdot(spec.eigenvectors[:, 0], lead)) <= 1e-7


def test_gsa_program_sdp_agrees():
    H = make_model("tfi", 3, {"h": 0.6})
    span = build_span(_basis_states(3), {"H": H.mpo})
    _vals, vecs = np.linalg.eigh(H.dense())
    prev = [from_dense(vecs[:, 0], 3)]
    exact = solve_gsa_program(span, prev)
    sdp = solve_gsa_program_sdp(span, prev)
    assert sdp.feasible
    assert sdp.objective == pytest.approx(exact.objective, abs=1e-6)


def test_gsa_program_rejects_outside_state(rng):
    H = make_model("ising", 4)
    span = build_span(_basis_states(4)[:3], {"H": H.mpo})
    with pytest.raises(SpanError):
        solve_gsa_program(span, [random_mps(4, 2, 2, rng)])


def _solution(sigma):
    return ProgramSolution(sigma, None, {}, "optimal")


def test_demix_pure_and_mixture():
    Hs = np.diag([0.0, 1.0, 1.0])
    pure = np.zeros((3, 3))
    pure[0, 0] = 1.0
    v = demix(_solution(pure), Hs, 0.0, 1.0, 0.2, 1)
    assert abs(v[0]) == pytest.approx(1.0)
    mix = np.diag([0.95, 0.05, 0.0])
    v = demix(_solution(mix), Hs, 0.0, 1.0, 1 / 3, 1)
    assert abs(v[0]) == pytest.approx(1.0)


def test_demix_preconditions():
    Hs = np.diag([0.0, 1.0])
    with pytest.raises(PreconditionError):
        demix(_solution(np.diag([0.5, 0.5])), Hs, 0.0, 1.0, 0.1, 1)
    with pytest.raises(PreconditionError):
        demix(_solution(np.diag([1.0, 0.0])), Hs, 0.0, 1.0, 0.5, 1)


def test_leading_eigenvector_tie_break():
    sigma = np.diag([0.5, 0.5, 0.0])
    H = np.diag([1.0, 0.2, 0.0])
    v = leading_eigenvector(sigma, H)
    assert abs(v[1]) == pytest.approx(1.0)


def test_orthogonalize_examples(rng):
    g = product_state([0, 0, 0])
    e = product_state([1, 0, 1])
    out = orthogonalize(e, [g])
    assert abs(abs(np.vdot(to_dense(out), to_dense(e))) - 1) <= 1e-12
    mixed = linear_combine([g, e], [1 / np.sqrt(2), 1 / np.sqrt(2)])
    out = orthogonalize(mixed, [g])
    assert abs(abs(np.vdot(to_dense(out), to_dense(e))) - 1) <= 1e-12
    prev = [random_mps(4, 2, 2, rng) for _ in range(2)]
    out = orthogonalize(random_mps(4, 2, 2, rng), prev)
    assert max(abs(np.vdot(to_dense(p), to_dense(out))) for p in prev) <= 1e-10
    with pytest.raises(SpanError):
        orthogonalize(prev[0], prev)
