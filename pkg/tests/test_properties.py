"""Tests for the randomized property-suite machinery (small instance counts)."""

import math

import pytest

from dgsa.properties import SUITE_NAMES, SuiteResult, run_suite, run_suites

QUICK = 40


def test_registry_covers_all_groups():
    groups = {
        r["group"]
        for r in run_suites(instances=1, names=["interchangeability", "basis_overlap"])[
            "suites"
        ]
    }
    assert groups == {"viability", "approximate_basis"}
    for name in (
        "interchangeability",
        "overlap_triangle",
        "orthogonalising",
        "demixing",
        "boundary_contraction",
        "truncation",
        "eckart_young",
        "basis_overlap",
        "basis_projection",
        "basis_fullness",
        "frustration",
        "filter_exact",
        "filter_budget",
    ):
        assert name in SUITE_NAMES


@pytest.mark.parametrize("name", SUITE_NAMES)
def test_suite_passes_quick(name):
    res = run_suite(name, seed=1, instances=QUICK)
    assert res.instances > 0
    assert res.violations == 0, res.worst
    assert res.passed


def test_failures_are_data():
    res = SuiteResult("x", "g", "s", 1e-9)
    res.add(0.5, k=1)
    res.add(-1e-3, k=2)
    res.add(math.nan, k=3)
    assert res.instances == 3
    assert res.violations == 2
    assert res.worst == {"k": 2}
    assert not res.passed
    assert not SuiteResult("y", "g", "s", 1e-9).passed


def test_suites_are_seeded():
    a = run_suite("overlap_pairs", seed=5, instances=QUICK).to_dict()
    b = run_suite("overlap_pairs", seed=5, instances=QUICK).to_dict()
    c = run_suite("overlap_pairs", seed=6, instances=QUICK).to_dict()
    assert a == b
    assert a["min_slack"] != c["min_slack"]


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nonsense")
