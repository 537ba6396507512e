"""Acceptance suite.

Each test checks one acceptance criterion at its stated tolerance and
prints a single ``PASS``/``FAIL`` line with the measured values, so the
suite doubles as a readable report under ``pytest -v``. Run it alone with
``pytest tests/test_acceptance.py -v``.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from dgsa.agsp import (
    approx_agsp,
    exact_agsp,
    gaussian_filter_values,
    make_schedule,
    shrink_report,
)
from dgsa.driver import RunConfig, degenerate_gsa, dumps_report, load_config
from dgsa.model import make_model
from dgsa.oracle import diagonalize
from dgsa.properties import DEFAULT_INSTANCES, run_suite

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
WALL_LIMIT_S = 600.0


def report_line(capsys, criterion: str, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} [{criterion}] {detail}")


@pytest.fixture(scope="module")
def ising_runs():
    out = {}
    for n in (6, 8):
        cfg = load_config(CONFIGS / f"ising_n{n}.yaml")
        t0 = time.perf_counter()
        result = degenerate_gsa(cfg)
        out[n] = (cfg, result, time.perf_counter() - t0)
    return out


# ---------------------------------------------------------------------------
# 1. end-to-end degenerate run
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [6, 8])
def test_c1_ising_ground_space(ising_runs, capsys, n):
    cfg, r, wall = ising_runs[n]
    fro = r.metrics["frobenius_error"]
    ortho = r.orthonormality_residual
    ok = fro <= cfg.eta and ortho <= 1e-8 and wall <= WALL_LIMIT_S
    report_line(
        capsys,
        f"1 ising n={n}",
        ok,
        f"||G-U||_F={fro:.3e} (<= {cfg.eta}), orthonormality={ortho:.1e} (<= 1e-8), wall={wall:.1f}s (<= {WALL_LIMIT_S:.0f}s)",
    )
    assert fro <= cfg.eta
    assert ortho <= 1e-8
    assert wall <= WALL_LIMIT_S


# ---------------------------------------------------------------------------
# 2. non-degenerate regression
# ---------------------------------------------------------------------------


def test_c2_tfi_nondegenerate(capsys):
    cfg = load_config(CONFIGS / "tfi_n8.yaml")
    assert cfg.g == 1 and cfg.params["h"] == 0.3 and cfg.n == 8
    r = degenerate_gsa(cfg)
    fro = r.metrics["frobenius_error"]
    report_line(
        capsys, "2 tfi n=8 g=1", fro <= cfg.eta, f"||G-U||_F={fro:.3e} (<= {cfg.eta})"
    )
    assert fro <= cfg.eta


# ---------------------------------------------------------------------------
# 3. exact filter bounds
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("zeta", [0.5, 0.1, 0.01])
def test_c3_exact_filter(capsys, zeta):
    worst_shrink, worst_keep, worst_formula = 0.0, 1.0, 0.0
    for name, params in (
        ("ising", {}),
        ("tfi", {"h": 0.3}),
        ("heisenberg", {"J": 1.0}),
    ):
        H = make_model(name, 6, params)
        spec = diagonalize(H)
        op = exact_agsp(H.dense(), spec.eps0, spec.gap, zeta)
        rep = shrink_report(op, spec)
        expected = gaussian_filter_values(
            spec.eigenvalues, spec.eps0, spec.gap, op.schedule.x
        )
        worst_formula = max(
            worst_formula, float(np.abs(np.array(rep["norms"]) - expected).max())
        )
        worst_shrink = max(worst_shrink, rep["max_excited_shrink"])
        worst_keep = min(worst_keep, rep["min_ground_retention"])
    tol = 1e-9
    ok = (
        worst_shrink <= zeta / 2 + tol
        and worst_keep >= 19 / 20 - tol
        and worst_formula <= tol
    )
    report_line(
        capsys,
        f"3 exact filter zeta={zeta}",
        ok,
        f"max excited shrink={worst_shrink:.3e} (<= {zeta / 2}), min ground retention={worst_keep:.12f} (>= 0.95), "
        f"formula deviation={worst_formula:.1e} (<= 1e-9)",
    )
    assert worst_shrink <= zeta / 2 + tol
    assert worst_keep >= 19 / 20 - tol
    assert worst_formula <= tol


# ---------------------------------------------------------------------------
# 4. approximate filter budget
# ---------------------------------------------------------------------------


def test_c4_desk_budget(capsys):
    H = make_model("ising", 4)
    spec = diagonalize(H)
    target = 0.01
    sched = make_schedule(0.25, spec.gap, H.n, mode="desk", budget=target)
    K = approx_agsp(H, spec.eps0, sched, propagator="trotter")
    d = K.diagnostics
    parts = ", ".join(
        f"{k}={d[k]:.3e}"
        for k in ("delta_T", "delta_D", "propagator_error", "compression_error")
    )
    ok = d["measured_error"] <= d["measured_budget"] <= target
    report_line(
        capsys,
        "4 desk filter n=4",
        ok,
        f"||A-K||={d['measured_error']:.3e} <= measured budget={d['measured_budget']:.3e} <= target={target} ({parts})",
    )
    assert d["measured_error"] <= d["measured_budget"] <= target


# ---------------------------------------------------------------------------
# 5. randomized inequality suites
# ---------------------------------------------------------------------------

INEQUALITY_SUITES = {
    "interchangeability": ["interchangeability"],
    "omnibus overlap": [
        "overlap_triangle",
        "overlap_expectation",
        "overlap_transfer",
        "overlap_pairs",
    ],
    "orthogonalising": ["orthogonalising"],
    "demixing": ["demixing"],
    "boundary contraction": ["boundary_contraction"],
    "truncation": ["truncation"],
    "eckart-young": ["eckart_young"],
    "approximate basis": ["basis_overlap", "basis_projection", "basis_fullness"],
    "frustration": ["frustration"],
}


@pytest.mark.parametrize("family", list(INEQUALITY_SUITES))
def test_c5_inequality_suites(capsys, family):
    lines, ok = [], True
    for name in INEQUALITY_SUITES[family]:
        res = run_suite(name, seed=0, instances=DEFAULT_INSTANCES)
        counted = res.details.get("instances_n_le_8", res.instances)
        good = counted >= 1000 and res.violations == 0
        ok &= good
        lines.append(
            f"{name}: {counted} instances at n<=8, {res.violations} violations, min slack {res.min_slack:.3e}"
        )
    report_line(capsys, f"5 {family}", ok, "; ".join(lines))
    assert ok


# ---------------------------------------------------------------------------
# 6. trim feasibility at every cut
# ---------------------------------------------------------------------------


def test_c6_trim_every_cut(ising_runs, capsys):
    _, r, _ = ising_runs[6]
    trims = [row for row in r.stages if row["stage"] == "S2"]
    cuts = {(row["h"], row["i"]) for row in trims}
    expected = {(h, i) for h in (1, 2) for i in range(1, 7)}
    feasible = all(row["trim"]["witness_point_feasible"] for row in trims)
    worst = max(row["measured_error"] for row in trims)
    ok = cuts == expected and feasible and 1 - worst >= 0.99
    report_line(
        capsys,
        "6 trim n=6",
        ok,
        f"{len(trims)} trims over passes 1-2 and cuts 1-6, witness point feasible at all: {feasible}, "
        f"min trimmed-span ground overlap={1 - worst:.6f} (>= 0.99)",
    )
    assert cuts == expected
    assert feasible
    assert 1 - worst >= 0.99


# ---------------------------------------------------------------------------
# 7. overcount herald
# ---------------------------------------------------------------------------


def test_c7_overcount(capsys):
    cfg = load_config(CONFIGS / "ising_n6_overcount.yaml")
    assert cfg.g == 3
    r = degenerate_gsa(cfg)
    spec = diagonalize(make_model("ising", 6))
    eps = r.report["eps"]
    third = r.energies[2]
    ok = third >= spec.eps0 + eps / 2 and 3 in r.herald["flagged"]
    report_line(
        capsys,
        "7 overcount g=3",
        ok,
        f"third energy={third:.6f} (>= {spec.eps0 + eps / 2}), flagged states={r.herald['flagged']}",
    )
    assert third >= spec.eps0 + eps / 2
    assert 3 in r.herald["flagged"]


# ---------------------------------------------------------------------------
# 8. determinism
# ---------------------------------------------------------------------------


def test_c8_byte_identical(ising_runs, capsys):
    cfg, first, _ = ising_runs[6]
    again = degenerate_gsa(
        RunConfig(**{f: getattr(cfg, f) for f in cfg.__dataclass_fields__})
    )
    a, b = dumps_report(first.report), dumps_report(again.report)
    report_line(
        capsys,
        "8 determinism",
        a == b,
        f"two runs of ising n=6, report {len(a)} bytes, identical: {a == b}",
    )
    assert a == b
