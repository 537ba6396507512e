"""Tests for viable sets, nets, boundary contractions and the stepping pipeline."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgsa.agsp import AgspOperator, approx_agsp, make_schedule
from dgsa.errors import StageError
from dgsa.model import make_model
from dgsa.oracle import diagonalize
from dgsa.tensor_mps import (
    from_dense,
    mpo_identity,
    product_state,
    random_mps,
    schmidt_decompose,
    to_dense,
)
from dgsa.viable import (
    PassContext,
    PipelineConfig,
    ViableSet,
    big_lambda,
    boundary_contraction,
    contraction_net,
    contraction_net_size,
    delta_high,
    delta_low,
    dense_contraction,
    energy_net,
    extend,
    f_of_g,
    final_reduce,
    final_step,
    initial_set,
    reduce,
    round_up_to_net,
    span_dense_basis,
    step,
    truncate_set,
)


def _in_span(vectors, basis, tol=1e-9):
    resid = vectors - basis @ (basis.conj().T @ vectors)
    return np.abs(resid).max() <= tol


# ---------------------------------------------------------------------------
# sets and extension
# ---------------------------------------------------------------------------


def test_initial_and_extend_counts(rng):
    S0 = initial_set(1, 2)
    S1 = extend(S0)
    assert S1.size == 2 and S1.i == 1 and S1.stage == "S1"
    three = ViableSet(
        1,
        3,
        tuple(random_mps(3, 2, 2, rng) for _ in range(3)),
        3,
        2,
        "delta",
        0.01,
        "S3",
    )
    ext = extend(three)
    assert ext.size == 6
    assert ext.s_bound == 6
    assert ext.b_bound == three.b_bound
    assert ext.error == three.error


def test_viable_set_bounds_checked(rng):
    s = random_mps(3, 2, 2, rng)
    with pytest.raises(ValueError):
        ViableSet(1, 3, (s, s), 1, 2, "delta", 0.0, "S1")
    with pytest.raises(ValueError):
        ViableSet(1, 3, (s,), 1, 1, "delta", 0.0, "S1")
    with pytest.raises(ValueError):
        ViableSet(1, 4, (s,), 1, 2, "delta", 0.0, "S1")


def test_extend_keeps_witness_schmidt_vectors():
    spec = diagonalize(make_model("ising", 4))
    for col in range(spec.g):
        w = from_dense(spec.ground_vectors[:, col], 4)
        for cut in (1, 2):
            left = schmidt_decompose(w, cut).left_vectors
            S = ViableSet(
                1,
                cut,
                tuple(left),
                len(left),
                max(v.max_bond for v in left),
                "delta",
                0.0,
                "S3",
            )
            E = span_dense_basis(extend(S).states)
            nxt = np.stack(
                [to_dense(v) for v in schmidt_decompose(w, cut + 1).left_vectors],
                axis=1,
            )
            assert _in_span(nxt, E)


# ---------------------------------------------------------------------------
# boundary contractions
# ---------------------------------------------------------------------------


def test_boundary_contraction_product():
    bc = boundary_contraction(product_state([0, 1, 1, 0]), 2)
    assert np.linalg.matrix_rank(bc.matrix, tol=1e-12) == 1
    assert np.trace(bc.matrix).real == pytest.approx(1.0)


def test_boundary_contraction_dense_formula(rng):
    for _ in range(10):
        v = random_mps(6, 2, 4, rng)
        for cut in range(1, 7):
            bc = boundary_contraction(v, cut)
            if cut == 6:
                ls = to_dense(v).reshape(-1, 1)
            else:
                sd = schmidt_decompose(v, cut)
                ls = np.stack(
                    [c * to_dense(a) for c, a in zip(sd.coefficients, sd.left_vectors)],
                    axis=1,
                )
            assert np.abs(bc.matrix - dense_contraction(ls, 2)).max() <= 1e-10
            assert np.trace(bc.matrix).real == pytest.approx(1.0, abs=1e-10)
            assert np.linalg.eigvalsh(bc.matrix)[0] >= -1e-12


def test_boundary_contraction_padding(rng):
    v = random_mps(5, 2, 2, rng)
    bc = boundary_contraction(v, 2, B=3)
    assert bc.matrix.shape == (6, 6)
    assert np.trace(bc.matrix).real == pytest.approx(1.0)
    with pytest.raises(ValueError):
        boundary_contraction(v, 0)
    with pytest.raises(ValueError):
        boundary_contraction(v, 6)


# ---------------------------------------------------------------------------
# nets
# ---------------------------------------------------------------------------


def test_energy_net_examples():
    assert energy_net(1.0) == [-1.0, 0.0, 1.0, 2.0]
    assert np.allclose(energy_net(0.5), [-1, -0.5, 0, 0.5, 1, 1.5])
    with pytest.raises(ValueError):
        energy_net(0.0)


@pytest.mark.parametrize("eta", [1.0, 0.5, 0.3, 0.05])
def test_energy_net_one_sided(eta):
    net = np.array(energy_net(eta))
    xs = np.linspace(-1 - eta, 1 + eta, 10_000)
    gaps = net[None, :] - xs[:, None]
    ok = (gaps >= -1e-12) & (gaps <= eta + 1e-12)
    assert ok.any(axis=1).all()


def test_round_up_to_net():
    net = energy_net(0.5)
    assert round_up_to_net(0.2, net) == (0.5, False)
    assert round_up_to_net(-0.5, net) == (-0.5, False)
    y, clamped = round_up_to_net(3.0, net)
    assert clamped and y == net[-1]


def test_contraction_net_single_entry():
    pts = [X for X, _ in contraction_net(2.0, 1, 1)]
    assert sorted(float(X[0, 0].real) for X in pts) == [-1.0, 0.0, 1.0]
    assert contraction_net_size(2.0, 1, 1) == 3


@pytest.mark.parametrize("xi", [2.0, 1.0, 0.7, 0.3])
def test_zero_matrix_in_net(xi):
    assert any(np.abs(X).max() == 0 for X, _ in contraction_net(xi, 1, 1))


def test_contraction_net_covers_densities(rng):
    xi = 2.0
    pts = np.stack([X for X, _ in contraction_net(xi, 2, 1, cap=10**5)])
    for _ in range(20):
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        rho = m @ m.conj().T
        rho *= rng.uniform(0, 1) / np.trace(rho).real
        dist = np.abs(np.linalg.eigvalsh(pts - rho[None])).sum(axis=1)
        assert dist.min() <= xi / 2 + 1e-12


def test_contraction_net_modes():
    with pytest.raises(ValueError):
        list(contraction_net(0.02, 2, 2, cap=100))
    with pytest.raises(ValueError):
        list(contraction_net(-1.0, 1, 1))
    cands = [(np.eye(2) / 2, "c")]
    assert (
        list(contraction_net(0.5, 2, 1, mode="candidates", candidates=cands)) == cands
    )


# ---------------------------------------------------------------------------
# theory helpers
# ---------------------------------------------------------------------------


def test_low_high_monotone():
    Ds = np.linspace(1e-6, 0.05, 50)
    lows = [delta_low(D, 2) for D in Ds]
    highs = [delta_high(D, 2) for D in Ds]
    assert all(b >= a for a, b in itertools.pairwise(lows))
    assert all(b <= a for a, b in itertools.pairwise(highs))
    assert big_lambda(1) == pytest.approx(1 - 1 / 15000)


def test_eig_threshold_keeps_expected_vectors():
    H = make_model("ising", 2)
    ctx = PassContext(H, 1.0, 1, 1, [], PipelineConfig())
    vals = np.array([0.7, 0.3 - 1e-10, 1e-10, 0.0])
    assert list(np.flatnonzero(vals >= ctx.eig_threshold)) == [0, 1]


# ---------------------------------------------------------------------------
# truncate, reduce, final reduce
# ---------------------------------------------------------------------------


def test_truncate_set_leaves_small_members(rng):
    members = tuple(random_mps(4, 2, 2, rng) for _ in range(3))
    S2 = ViableSet(1, 4, members, 3, 2, "delta", 0.01, "S2")
    S3 = truncate_set(S2, [], 4)
    assert all(a is b for a, b in zip(S3.states, members))
    big = ViableSet(1, 6, (random_mps(6, 2, 8, rng),), 1, 8, "delta", 0.01, "S2")
    assert truncate_set(big, [], 3).max_bond <= 3


def test_reduce_with_identity(rng):
    L = [random_mps(2, 2, 2, rng)]
    members = tuple(random_mps(2, 2, 2, rng) for _ in range(3))
    S3 = ViableSet(1, 2, members, 3, 2, "delta", 0.2, "S3")
    K = AgspOperator("mpo", make_schedule(0.5, 1.0, 4), 0.0, mpo=mpo_identity(4))
    S4 = reduce(S3, K, L)
    assert S4.size == 4
    for a, b in zip(S4.states, list(members) + L):
        assert abs(abs(np.vdot(to_dense(a), to_dense(b))) - 1) <= 1e-12
    assert K.decompose(2).n_terms == 1


def test_reduce_term_count_matches_bond(rng):
    H = make_model("tfi", 4, {"h": 0.3})
    sch = make_schedule(0.25, 0.5, 4, "desk", budget=0.01)
    K = approx_agsp(H, 0.0, sch, propagator="exact")
    members = (random_mps(2, 2, 2, rng),)
    S4 = reduce(ViableSet(1, 2, members, 1, 2, "delta", 0.2, "S3"), K, [])
    assert S4.s_bound == K.mpo.bond_dims[1]


def test_final_reduce_counts(rng):
    H = make_model("ising", 4)
    sch = make_schedule(0.5, 1.0, 4, "desk", budget=0.01)
    K = approx_agsp(H, 0.0, sch, propagator="exact")
    members = tuple(random_mps(4, 2, 2, rng) for _ in range(3))
    S3 = ViableSet(2, 4, members, 3, 2, "delta", 0.2, "S3")
    assert final_reduce(S3, K, []).size == 3
    prev = [random_mps(4, 2, 2, rng)]
    assert final_reduce(S3, K, prev).size == 4


# ---------------------------------------------------------------------------
# whole passes
# ---------------------------------------------------------------------------


def _context(H, g, prev=(), filters=True, eta=0.2):
    spec = diagonalize(H)
    cfg = PipelineConfig()
    K = Kf = None
    if filters:
        K = approx_agsp(
            H,
            spec.eps0,
            make_schedule(
                cfg.zeta_reduce, spec.gap, H.n, "desk", budget=cfg.reduce_budget
            ),
            propagator="exact",
        )
        zf = eta**2 / (4 * f_of_g(g))
        Kf = approx_agsp(
            H,
            spec.eps0,
            make_schedule(zf, spec.gap, H.n, "desk", budget=cfg.final_budget),
            propagator="exact",
        )
    return PassContext(
        H, spec.gap, g, len(prev) + 1, list(prev), cfg, K=K, K_final=Kf, spec=spec
    ), spec


def test_two_site_step_spans_ground_space():
    H = make_model("tfi", 2, {"h": 0.5})
    ctx, spec = _context(H, 1, filters=False)
    S = step(initial_set(1, 2), [], ctx)
    S = final_step(S, ctx)
    E = span_dense_basis(S.states)
    assert np.linalg.norm(E.conj().T @ spec.ground_vectors[:, 0]) >= 0.99


def test_ising_pass_meets_stage_targets():
    H = make_model("ising", 6)
    ctx, spec = _context(H, 2)
    S = initial_set(1, 2)
    sizes = []
    for i in range(1, 6):
        S = step(S, [], ctx)
        sizes.append((S.s_bound, S.b_bound))
    S = final_step(S, ctx)
    rows = ctx.rows
    for r in rows:
        if r["stage"] in ("S2", "S3"):
            assert r["measured_error"] <= dict(ctx.cfg.targets)[r["stage"]] + 1e-12
    trims = [r["trim"] for r in rows if "trim" in r]
    assert all(t["witness_point_feasible"] for t in trims)
    # Cardinalities follow the recorded flow: extend multiplies by d, trim
    # and truncate never grow the set, reduce multiplies by the number of
    # operator Schmidt terms of K at the cut.
    by_stage = {(r["i"], r["stage"]): r for r in rows}
    for i in range(1, 6):
        s1, s2, s3, s4 = (by_stage[(i, f"S{k}")] for k in range(1, 5))
        prev = by_stage[(i - 1, "S4")]["size"] if i > 1 else 1
        assert s1["size"] == 2 * prev
        assert s3["size"] == s2["size"] <= s1["size"]
        terms = ctx.K.decompose(i, ctx.cfg.reduce_rel_tol).n_terms
        assert s4["size"] == terms * s3["size"]
        assert sizes[i - 1][0] == s4["size"]
    # The bond-dimension bound settles once the bulk of the chain is reached.
    assert sizes[-1][1] <= sizes[-2][1]
    E = span_dense_basis(S.states)
    assert np.linalg.norm(E.conj().T @ spec.ground_vectors, 2) >= 0.99


def test_stage_error_on_unreachable_target():
    H = make_model("ising", 4)
    ctx, _ = _context(H, 2, filters=False)
    ctx.cfg = PipelineConfig(targets=(("S2", -1.0),))
    with pytest.raises(StageError):
        step(initial_set(1, 2), [], ctx)


@settings(max_examples=10, deadline=None)
@given(bits=st.lists(st.integers(0, 1), min_size=2, max_size=5))
def test_product_boundary_contraction_pure(bits):
    bc = boundary_contraction(product_state(bits), 1)
    m = bc.matrix
    assert np.abs(m @ m - m).max() <= 1e-12
    assert m[bits[0], bits[0]].real == pytest.approx(1.0)
