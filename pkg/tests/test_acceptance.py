"""Acceptance criteria 1-10. Each test records one pass/fail line, printed at the end of the run."""
import json
import sys
import time
from functools import lru_cache

import pytest

from towerkit import modcolim as mc
from towerkit import towers as tw
from towerkit import verify
from towerkit.ordinals import parse

SEED = 1


@lru_cache(maxsize=None)
def timed_suite(name: str, **kw):
    t0 = time.perf_counter()
    if name == "linalg_forms":
        rep = verify.suite_linalg(SEED, 0, count=1000, chains=0)
    elif name == "linalg_chains":
        rep = verify.suite_linalg(SEED, 0, count=0, chains=200)
    else:
        rep = verify.run_suite(name, SEED)
    return rep, time.perf_counter() - t0


def checks(rep, *names):
    by = {c["name"]: c for c in rep["checks"]}
    return [by[n] for n in names]


def _finish(record, number, ok, detail):
    record(number, ok, detail)
    assert ok, detail


def test_criterion_01_normal_forms(criterion):
    rep, secs = timed_suite("linalg_forms")
    ok = all(c["pass"] for c in checks(rep, "hnf", "snf")) and secs < 10
    _finish(criterion, 1, ok, f"1000 HNF/SNF samples, {secs:.1f}s")


def test_criterion_02_eventual_image(criterion):
    rep, secs = timed_suite("linalg_chains")
    c = checks(rep, "eventual_image_vs_chain", "eventual_image_diag_2_1")
    ok = all(x["pass"] for x in c) and c[0]["evidence"]["samples"] == 200 and secs < 30
    _finish(criterion, 2, ok, f"200 stabilizing chains plus diag(2,1), {secs:.1f}s")


def test_criterion_03_tower_invariants(criterion):
    rep, _ = timed_suite("towers")
    ok = rep["passed"] and rep["depth"] == 12
    _finish(criterion, 3, ok, f"x p tower, reduce(identity), direct sums to depth 12; failed={rep['failed']}")


def test_criterion_04_fishbone_closed_form(criterion):
    rep, _ = timed_suite("fishbone")
    names = {c["name"] for c in rep["checks"]}
    ok = rep["passed"] and {"closed_form_length2", "closed_form_length3"} <= names and rep["depth"] == 8
    _finish(criterion, 4, ok, f"lengths 2 and 3 at n <= 8; failed={rep['failed']}")


def test_criterion_05_index_trees(criterion):
    rep, _ = timed_suite("trees")
    c = checks(rep, "index_tree_ranks", "linearize_plain_2", "terminal_nodes_successor_labels")
    _finish(criterion, 5, all(x["pass"] for x in c), "ranks 1,2,3,w+1; I_2 labels; terminal successor labels")


def test_criterion_06_game_tree_rank(criterion):
    rep, secs = timed_suite("trees")
    (c,) = checks(rep, "game_rank_vs_tree_rank")
    ev = c["evidence"]
    ok = c["pass"] and secs < 20
    _finish(criterion, 6, ok, f"{ev['mismatching_trees']} of {ev['samples']} trees disagree for some alpha <= 10")


def test_criterion_07_ext_invariants(criterion):
    rep, _ = timed_suite("ext")
    names = ("localization_not_projective", "localization_plain_length_1", "split_inclusions_projective",
             "xi_coreduced", "xi_plain_length_1", "xi_well_pointed")
    ok = all(c["pass"] for c in checks(rep, *names)) and rep["config"]["digits"] == 64
    _finish(criterion, 7, ok, "Z[1/p], split inclusions, Xi(tau) with 64 seeded digits")


def test_criterion_08_gap_module(criterion):
    rep, _ = timed_suite("ext")
    c = checks(rep, "gap_tree_length_2", "gap_projective_length_1", "gap_not_plain")
    ok = all(x["pass"] for x in c) and c[2]["evidence"]["evidence"]["status"] == "Fails"
    _finish(criterion, 8, ok, "tree length bound 2, projective length 1, plain verdict certified")


def test_criterion_09_sigma_partial(criterion):
    rep, _ = timed_suite("sigma")
    ok = rep["passed"] and rep["depth"] == 10 and any(c["name"] == "xi_partial_1_is_zero" for c in rep["checks"])
    _finish(criterion, 9, ok, f"d_1 C against D_1 to depth 10; failed={rep['failed']}")


def test_criterion_10_determinism(criterion):
    differing = []
    for name in verify.SUITES:
        runs = []
        for _ in range(2):
            tw.clear_caches()
            mc.dual_tower.cache_clear()
            runs.append(json.dumps(verify.run_suite(name, SEED), sort_keys=True))
        if runs[0] != runs[1]:
            differing.append(name)
    _finish(criterion, 10, not differing, f"8 suites re-run with seed {SEED}; differing={differing}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
