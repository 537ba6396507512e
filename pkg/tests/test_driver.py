"""Tests for configuration, the ground-space driver and report serialization."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from dgsa.driver import (
    RunConfig,
    approx_ground_state,
    clean_report,
    config_from_dict,
    degenerate_gsa,
    dumps_report,
    load_config,
    nondegenerate_gsa,
    overcount_check,
    schmidt_vecs,
    spectrum_report,
    stages_csv,
)
from dgsa.errors import ConfigError
from dgsa.model import make_model
from dgsa.oracle import diagonalize
from dgsa.tensor_mps import from_dense, product_state, random_mps, to_dense
from dgsa.viable import PipelineConfig, ViableSet, f_of_g

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def ising4():
    return degenerate_gsa(RunConfig(model="ising", n=4, g=2, eps=1.0, eta=0.05))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_config_nested_and_flat_agree():
    a = config_from_dict(
        {"model": {"name": "tfi", "n": 5, "params": {"h": 0.2}}, "g": 1, "seed": 3}
    )
    b = config_from_dict(
        {"model": "tfi", "n": 5, "params": {"h": 0.2}, "g": 1, "seed": 3}
    )
    assert a == b
    assert a.pipeline.seed == 3


def test_config_errors():
    with pytest.raises(ConfigError):
        config_from_dict({"colour": "blue"})
    with pytest.raises(ConfigError):
        config_from_dict({"pipeline": {"speed": 2}})
    with pytest.raises(ConfigError):
        RunConfig(eta=0.5)
    with pytest.raises(ConfigError):
        RunConfig(g=0)
    with pytest.raises(ConfigError):
        RunConfig(oracle=False)
    with pytest.raises(ConfigError):
        RunConfig(pipeline=PipelineConfig(net_mode="grid"))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.n >= 4
    assert json.loads(json.dumps(cfg.to_dict())) == cfg.to_dict()


def test_targets_round_trip():
    cfg = config_from_dict({"pipeline": {"targets": {"S2": 0.02, "S3": 0.1}}})
    assert cfg.pipeline.target("S2") == 0.02
    assert cfg.to_dict()["pipeline"]["targets"] == {"S2": 0.02, "S3": 0.1}


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def test_schmidt_vecs_examples(rng):
    assert len(schmidt_vecs(2, [product_state([0, 1, 0, 1])])) == 1
    bell = np.zeros(16, dtype=complex)
    bell[0b0000] = bell[0b0110] = 1 / np.sqrt(2)
    assert len(schmidt_vecs(2, [from_dense(bell, 4)])) == 2
    states = [random_mps(6, 2, 3, rng) for _ in range(3)]
    out = schmidt_vecs(3, states)
    ranks = [
        np.linalg.matrix_rank(to_dense(s).reshape(8, 8), tol=1e-10) for s in states
    ]
    assert len(out) <= sum(ranks)
    assert all(v.length == 3 for v in out)


def _full_set(n, h):
    import itertools

    states = tuple(product_state(b) for b in itertools.product((0, 1), repeat=n))
    return ViableSet(h, n, states, len(states), 1, "Delta", 0.0, "S4")


def test_approx_ground_state_full_span():
    H = make_model("tfi", 4, {"h": 0.6})
    spec = diagonalize(H)
    _, info = approx_ground_state(_full_set(4, 1), H, [], spec.eps0, spec.gap, 0.2, 1)
    assert info["energy"] == pytest.approx(spec.eps0, abs=1e-7)
    assert info["energy"] <= info["program_energy"] + 1e-7


def test_approx_ground_state_second_ising_state():
    H = make_model("ising", 4)
    spec = diagonalize(H)
    g1 = from_dense(spec.ground_vectors[:, 0], 4)
    v, _ = approx_ground_state(_full_set(4, 2), H, [g1], spec.eps0, 1.0, 0.2, 2)
    vd = to_dense(v)
    assert abs(np.vdot(to_dense(g1), vd)) <= 1e-10
    assert np.linalg.norm(spec.ground_vectors.conj().T @ vd) >= 1 - 0.2**2 / (4 * 2)


def test_overcount_check_examples():
    silent = overcount_check([0.0, 1e-9], 0.0, 1.0)
    assert not silent["fired"]
    loud = overcount_check([0.0, 0.0, 1.0], 0.0, 1.0)
    assert loud["flagged"] == [3]
    assert overcount_check([0.0, 0.3], 0.0, 1.0, threshold=0.2)["threshold"] == 0.2
    assert overcount_check([0.0, 0.3], 0.0, 1.0, threshold=0.2)["fired"]


# ---------------------------------------------------------------------------
# end-to-end at small sizes
# ---------------------------------------------------------------------------


def test_nondegenerate_single_term():
    H = make_model("tfi", 2, {"h": 0.4})
    spec = diagonalize(H)
    _, info = nondegenerate_gsa(H, spec.gap, 0.05, PipelineConfig(), spec)
    assert info["pass"]["energy"] == pytest.approx(spec.eps0, abs=1e-7)


def test_nondegenerate_ising_overlap():
    H = make_model("ising", 6)
    spec = diagonalize(H)
    eta = 0.2
    v, _ = nondegenerate_gsa(H, 1.0, eta, PipelineConfig(), spec, g=2)
    assert np.linalg.norm(spec.ground_vectors.conj().T @ to_dense(v)) >= 1 - eta**2 / (
        4 * f_of_g(2)
    )


def test_g1_matches_nondegenerate():
    cfg = RunConfig(model="tfi", n=4, params={"h": 0.6}, g=1, eta=0.05)
    result = degenerate_gsa(cfg)
    H = make_model("tfi", 4, {"h": 0.6})
    spec = diagonalize(H)
    v, _ = nondegenerate_gsa(H, spec.gap, 0.05, cfg.pipeline, spec)
    assert np.array_equal(to_dense(result.states[0]), to_dense(v))


def test_ising4_result(ising4):
    r = ising4
    assert r.metrics["frobenius_error"] <= 0.05
    assert r.orthonormality_residual <= 1e-8
    assert r.metrics["trace_bound_holds"]
    assert r.metrics["identity_residual"] <= 1e-10
    assert not r.herald["fired"]
    assert len(r.states) == 2


def test_report_is_deterministic(ising4):
    again = degenerate_gsa(RunConfig(model="ising", n=4, g=2, eps=1.0, eta=0.05))
    assert dumps_report(again.report) == dumps_report(ising4.report)


def test_report_without_timings(ising4):
    assert all("wall_ms" not in row for row in ising4.report["stages"])
    text = stages_csv(ising4.stages)
    header = text.splitlines()[0].split(",")
    assert header == ["h", "i", "stage", "size", "max_bond", "measured_error"]
    assert len(text.splitlines()) == len(ising4.stages) + 1


def test_timings_add_wall_column():
    r = degenerate_gsa(
        RunConfig(model="ising", n=3, g=2, eps=1.0, eta=0.05), timings=True
    )
    assert all(row["wall_ms"] >= 0 for row in r.stages)
    assert stages_csv(r.stages, timings=True).splitlines()[0].endswith(",wall_ms")


def test_oracle_off_run():
    cfg = RunConfig(model="ising", n=4, g=2, eps=1.0, eta=0.05, oracle=False)
    r = degenerate_gsa(cfg)
    assert r.metrics == {}
    assert r.report["filter_centre_source"] == "first-state energy"
    spec = diagonalize(make_model("ising", 4))
    V = np.stack([to_dense(s) for s in r.states], axis=1)
    assert np.linalg.norm(spec.G - V @ V.conj().T) <= 0.05


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_clean_report_rounding():
    out = clean_report(
        {
            "a": np.float64(1 / 3),
            "b": [np.int64(2), np.bool_(True)],
            "c": math.nan,
            "d": 1j,
        }
    )
    assert out == {
        "a": 0.3333333333,
        "b": [2, True],
        "c": "nan",
        "d": {"re": 0.0, "im": 1.0},
    }
    assert dumps_report({"b": 1, "a": 2}).index('"a"') < dumps_report(
        {"b": 1, "a": 2}
    ).index('"b"')


def test_spectrum_report():
    rep = spectrum_report(RunConfig(model="ising", n=4))
    assert rep["spectrum"]["g"] == 2
    assert rep["spectrum"]["gap"] == 1.0
    assert [c["cut"] for c in rep["cuts"]] == [1, 2, 3]
    assert len(rep["eigenvalues_original_units"]) == 16
