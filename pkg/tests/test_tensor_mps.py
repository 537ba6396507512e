"""Tests for the MPS/MPO primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgsa.errors import ComplexResultError, DegenerateStateError, ShapeMismatchError
from dgsa.model import make_model
from dgsa.tensor_mps import (
    MPO,
    MPS,
    apply_mpo,
    canonicalize,
    expectation,
    from_dense,
    linear_combine,
    mpo_identity,
    mpo_to_dense,
    norm,
    operator_schmidt,
    overlap,
    product_state,
    random_mps,
    schmidt_decompose,
    to_dense,
    truncate_all_bonds,
    truncate_at_cut,
)


def _ghz(n):
    v = np.zeros(2**n, dtype=complex)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return from_dense(v, n)


def _isometry_errors(state):
    c = state.center
    errs = []
    for k, t in enumerate(state.tensors):
        l, d, r = t.shape
        if k < c:
            m = t.reshape(l * d, r)
            errs.append(np.abs(m.conj().T @ m - np.eye(r)).max())
        elif k > c:
            m = t.reshape(l, d * r)
            errs.append(np.abs(m @ m.conj().T - np.eye(l)).max())
    return max(errs, default=0.0)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------


def test_bond_mismatch_rejected():
    a = np.zeros((1, 2, 2))
    b = np.zeros((3, 2, 1))
    with pytest.raises(ShapeMismatchError):
        MPS((a, b))


def test_boundary_bonds_must_be_one():
    with pytest.raises(ShapeMismatchError):
        MPS((np.zeros((2, 2, 1)),))


def test_mpo_hermitian_flag_checked():
    w = np.zeros((1, 2, 2, 1), dtype=complex)
    w[0, 0, 1, 0] = 1.0
    with pytest.raises(ValueError):
        MPO((w,), hermitian=True)


def test_dense_agrees_with_contraction(rng):
    a, b = random_mps(6, 3, 4, rng), random_mps(6, 3, 4, rng)
    dense = np.vdot(to_dense(a), to_dense(b))
    assert abs(overlap(a, b) - dense) <= 1e-10 * max(1.0, abs(dense))


# ---------------------------------------------------------------------------
# canonicalize
# ---------------------------------------------------------------------------


def test_canonicalize_product_state():
    c = canonicalize(product_state([0, 0, 0]), 1)
    assert c.bond_dims == [1, 1]
    assert norm(c) == pytest.approx(1.0, abs=1e-14)


def test_canonicalize_preserves_vector(rng):
    s = random_mps(4, 2, 3, rng)
    c = canonicalize(s, 2)
    assert np.abs(to_dense(s) - to_dense(c)).max() <= 1e-10
    assert _isometry_errors(c) <= 1e-10


def test_canonicalize_idempotent(rng):
    c1 = canonicalize(random_mps(5, 2, 3, rng), 2)
    c2 = canonicalize(c1, 2)
    for a, b in zip(c1.tensors, c2.tensors):
        assert np.abs(a - b).max() <= 1e-12


def test_canonicalize_zero_state():
    zero = MPS(tuple(np.zeros((1, 2, 1)) for _ in range(3)))
    with pytest.raises(DegenerateStateError):
        canonicalize(zero, 0)


# ---------------------------------------------------------------------------
# Schmidt decomposition and truncation
# ---------------------------------------------------------------------------


def test_schmidt_product():
    sd = schmidt_decompose(product_state([0, 0]), 1)
    assert np.allclose(sd.coefficients, [1.0])


def test_schmidt_bell():
    sd = schmidt_decompose(_ghz(2), 1)
    assert np.allclose(sd.coefficients, [1 / np.sqrt(2)] * 2, atol=1e-12)


def test_schmidt_matches_dense_svd(rng):
    s = random_mps(6, 2, 8, rng)
    v = to_dense(s)
    for cut in range(1, 6):
        sd = schmidt_decompose(s, cut)
        sv = np.linalg.svd(v.reshape(2**cut, -1), compute_uv=False)
        sv = sv[sv > 1e-12 * sv[0]]
        assert np.abs(sd.coefficients - sv).max() <= 1e-10


def test_schmidt_reconstruction_and_orthonormality(rng):
    s = random_mps(6, 2, 4, rng)
    sd = schmidt_decompose(s, 3)
    L = np.stack([to_dense(a) for a in sd.left_vectors], axis=1)
    R = np.stack([to_dense(b) for b in sd.right_vectors], axis=1)
    assert np.abs(L.conj().T @ L - np.eye(sd.rank)).max() <= 1e-10
    assert np.abs(R.conj().T @ R - np.eye(sd.rank)).max() <= 1e-10
    rebuilt = (L * sd.coefficients[None, :]) @ R.T
    assert np.abs(rebuilt.reshape(-1) - to_dense(s)).max() <= 1e-10
    assert abs(np.sum(sd.coefficients**2) - 1) <= 1e-10


def test_schmidt_unnormalized_flag(rng):
    s = random_mps(4, 2, 2, rng, normalize=False)
    assert "renormalized" in schmidt_decompose(s, 2).flags


def test_schmidt_tie_break_deterministic():
    a = schmidt_decompose(_ghz(4), 2)
    b = schmidt_decompose(_ghz(4), 2)
    for x, y in zip(a.left_vectors, b.left_vectors):
        assert np.array_equal(to_dense(x), to_dense(y))


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 7),
    d=st.integers(2, 3),
    bond=st.integers(1, 6),
    seed=st.integers(0, 2**31 - 1),
)
def test_schmidt_equals_svd_property(n, d, bond, seed):
    rng = np.random.default_rng(seed)
    s = random_mps(n, d, bond, rng)
    v = to_dense(s)
    cut = int(rng.integers(1, n))
    sv = np.linalg.svd(v.reshape(d**cut, -1), compute_uv=False)
    sv = sv[sv > 1e-12 * sv[0]]
    assert np.abs(schmidt_decompose(s, cut).coefficients - sv).max() <= 1e-10


def test_truncate_noop_when_rank_fits(rng):
    s = random_mps(5, 2, 2, rng)
    t = truncate_at_cut(s, 2, 4)
    assert abs(abs(overlap(s, t)) - 1) <= 1e-12


def test_truncate_ghz_tie():
    g = _ghz(4)
    t = truncate_at_cut(g, 2, 1)
    assert abs(overlap(t, g)) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert np.array_equal(to_dense(t), to_dense(truncate_at_cut(g, 2, 1)))


def test_truncate_overlap_formula(rng):
    s = random_mps(7, 2, 6, rng)
    for cut in (2, 3, 4):
        lam = schmidt_decompose(s, cut).coefficients
        for D in (1, 2, 3):
            t = truncate_at_cut(s, cut, D)
            assert abs(abs(overlap(t, s)) - np.sqrt(np.sum(lam[:D] ** 2))) <= 1e-10
            assert t.bond_dims[cut - 1] <= D


def test_truncate_beats_random_competitors(rng):
    s = random_mps(6, 2, 4, rng)
    v = to_dense(s)
    best = abs(overlap(truncate_at_cut(s, 3, 2), s))
    a = rng.normal(size=(10_000, 8, 2)) + 1j * rng.normal(size=(10_000, 8, 2))
    b = rng.normal(size=(10_000, 2, 8)) + 1j * rng.normal(size=(10_000, 2, 8))
    w = np.einsum("kij,kjl->kil", a, b).reshape(10_000, -1)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    assert best >= np.abs(w.conj() @ v).max()


def test_truncate_rejects_bad_D(rng):
    with pytest.raises(ValueError):
        truncate_at_cut(random_mps(4, 2, 2, rng), 2, 0)


def test_truncate_all_bonds_cases(rng):
    p = product_state([1, 0, 1, 1])
    assert abs(overlap(truncate_all_bonds(p, 1), p)) == pytest.approx(1.0)
    s2 = random_mps(6, 2, 2, rng)
    assert abs(abs(overlap(truncate_all_bonds(s2, 2), s2)) - 1) <= 1e-12
    s4 = random_mps(6, 2, 4, rng)
    t, weights = truncate_all_bonds(s4, 2, return_weights=True)
    assert t.max_bond <= 2
    assert abs(overlap(t, s4)) >= 1 - sum(weights) - 1e-12


def test_truncation_of_low_rank_part(rng):
    # |<Trunc_{R/delta}(u)|v>| >= |<u|v>| - delta for a rank-R state u.
    for _ in range(20):
        u = random_mps(6, 2, 4, rng)
        v = random_mps(6, 2, 8, rng)
        R = schmidt_decompose(u, 3).rank
        for delta in (0.5, 1.0):
            D = max(1, int(R / delta))
            t = truncate_at_cut(u, 3, D)
            assert abs(overlap(t, v)) >= abs(overlap(u, v)) - delta - 1e-12


# ---------------------------------------------------------------------------
# overlaps, expectations and operator application
# ---------------------------------------------------------------------------


def test_overlap_basics(rng):
    s = random_mps(5, 2, 3, rng)
    assert overlap(s, s) == pytest.approx(1.0, abs=1e-12)
    assert overlap(product_state([0, 1]), product_state([1, 1])) == 0
    with pytest.raises(ShapeMismatchError):
        overlap(product_state([0, 1]), product_state([0, 1, 0]))


def test_expectation_cases(rng):
    assert expectation(product_state([0, 0, 0]), mpo_identity(3)) == pytest.approx(1.0)
    H = make_model("ising", 5)
    assert expectation(product_state([0] * 5), H.mpo) == pytest.approx(0.0, abs=1e-14)
    s = random_mps(5, 2, 3, rng)
    v = to_dense(s)
    assert expectation(s, H.mpo) == pytest.approx(
        np.vdot(v, H.dense() @ v).real, abs=1e-10
    )
    w = np.zeros((1, 2, 2, 1), dtype=complex)
    with pytest.raises(ComplexResultError):
        expectation(product_state([0]), MPO((w,)))


def test_apply_mpo_cases(rng):
    s = random_mps(5, 2, 3, rng)
    assert np.abs(to_dense(apply_mpo(mpo_identity(5), s)) - to_dense(s)).max() <= 1e-12
    H = make_model("tfi", 5, {"h": 0.4})
    vals, vecs = np.linalg.eigh(H.dense())
    e = from_dense(vecs[:, 3], 5)
    out = to_dense(apply_mpo(H.mpo, e))
    assert np.abs(out - vals[3] * vecs[:, 3]).max() <= 1e-10
    raw = apply_mpo(H.mpo, s)
    assert raw.bond_dims == [a * b for a, b in zip(H.mpo.bond_dims, s.bond_dims)]
    c = apply_mpo(H.mpo, s, compress_tol=1e-12)
    assert np.abs(to_dense(c) - H.dense() @ to_dense(s)).max() <= 1e-10


def test_linear_combine_cases(rng):
    s = random_mps(5, 2, 3, rng)
    assert np.abs(to_dense(linear_combine([s], [1.0])) - to_dense(s)).max() <= 1e-12
    z = linear_combine([s, s], [1.0, -1.0])
    assert "zero-norm" in z.flags
    states = [random_mps(5, 2, 2, rng) for _ in range(3)]
    w = [0.3, -1.2j, 0.7 + 0.1j]
    comb = linear_combine(states, w)
    dense = sum(c * to_dense(x) for c, x in zip(w, states))
    assert np.abs(to_dense(comb) - dense).max() <= 1e-10
    bound = [sum(x.bond_dims[k] for x in states) for k in range(4)]
    assert all(b <= c for b, c in zip(comb.bond_dims, bound))


def test_operator_schmidt_reconstructs():
    H = make_model("heisenberg", 5)
    full = mpo_to_dense(H.mpo)
    for cut in (1, 2, 4):
        os_ = operator_schmidt(H.mpo, cut)
        total = sum(
            np.kron(mpo_to_dense(os_.left_factor(j)), mpo_to_dense(os_.right_factor(j)))
            for j in range(os_.n_terms)
        )
        assert np.abs(total - full).max() <= 1e-10
        assert os_.n_terms <= 5
