import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerkit import towers as tw
from towerkit.exactlin import ZZ, BaseRing, ExactMatrix, Lattice, block_diag_lattice, eventual_image, map_image
from towerkit.ordinals import OMEGA, ONE, ZERO, parse
from towerkit.verify import sample_fishbones, sample_towers, times

M = ExactMatrix.of


def const(rows, ring=ZZ):
    return tw.TowerSpec.constant(M(rows), ring)


def test_compose_bond():
    t = times(2)
    assert tw.compose_bond(t, 0, 3) == M([[8]])
    assert tw.compose_bond(t, 2, 2) == ExactMatrix.identity(1)
    s = tw.TowerSpec.direct_sum(times(2), times(3))
    assert tw.bond(s, 0) == M([[2, 0], [0, 3]])
    with pytest.raises(tw.TowerError):
        tw.compose_bond(t, 3, 1)


def test_shape_validation():
    with pytest.raises(tw.TowerError):
        tw.TowerSpec(ZZ, (tw.Level(2, M([[1, 0]])),), tw.ConstantTail(1, M([[2]])))
    with pytest.raises(tw.TowerError):
        tw.TowerSpec.from_json({"prefix": [], "tail": {"kind": "nope"}})


def test_support_examples():
    assert all(tw.support(times(2), n).is_zero() for n in range(5))
    assert tw.support(times(1), 3).is_full()
    s = tw.TowerSpec.direct_sum(times(2), times(1))
    assert tw.support(s, 2) == Lattice.span(2, [(0, 1)])
    d = tw.infinite_chain_support(s, 4)
    assert d.exact and len(d.levels) == 5


def test_reduce_examples():
    assert tw.reduce(times(1), 6).is_zero()
    r = tw.reduce(times(2), 6)
    assert not r.is_zero() and all(rel.is_zero() for rel in r.relations)
    both = tw.reduce(tw.TowerSpec.direct_sum(times(2), times(1)), 4)
    assert [rel.to_json() for rel in both.relations] == [Lattice.span(2, [(0, 1)]).to_json()] * 5


def test_mittag_leffler_examples():
    v = tw.mittag_leffler(times(2), 8)
    assert v.status == "Fails" and v.evidence
    assert tw.mittag_leffler(const([[1, 1], [0, 1]]), 8).status == "Holds"
    assert tw.mittag_leffler(tw.TowerSpec.zero(), 8).status == "Holds"


def test_derived_examples():
    d = tw.derived_tower(times(2), ONE, 6)
    assert d.exact and all(a.lo.is_zero() for a in d.levels)
    t = sample_towers()["jordan2"]
    d0 = tw.derived_tower(t, ZERO, 4)
    assert all(a.best.is_full() for a in d0.levels)


def test_length_examples():
    assert tw.ml_length(tw.TowerSpec.zero(), OMEGA, 6).length == ZERO
    r = tw.ml_length(times(3), OMEGA, 10)
    assert r.length == ONE and r.plain == "yes" and not r.at_least


def test_essentially_monomorphic_examples():
    assert tw.essentially_monomorphic(times(2), 8).status == "Holds"
    assert tw.essentially_monomorphic(tw.TowerSpec.zero(), 8).status == "Holds"


def test_fishbone_build_and_verify():
    fbs = sample_fishbones(6)
    f2, f3 = fbs["length2"], fbs["length3"]
    rep = tw.check_straightness(f2.tail, 6)
    assert rep.straight and rep.length == parse("2")
    dims = [tw.dim(f2, n) for n in range(4)]
    fb = f2.tail
    assert dims == [sum(tw.dim(fb.rib(k), n - k) for k in range(n)) + tw.dim(fb.spine, n) for n in range(4)]
    v = tw.fishbone_verify(f2, depth=6, horizon=10)
    assert v.all_match
    rep3 = tw.check_straightness(f3.tail, 6)
    assert rep3.straight and rep3.length == parse("3") and [str(b) for b in rep3.betas] == ["1", "2"]


def test_fishbone_not_straight():
    fb, rep = tw.fishbone_build(times(2), [times(2)], depth=5)
    assert not rep.straight and rep.offending == (0, 1)
    with pytest.raises(tw.TowerError):
        tw.fishbone_verify(fb, depth=4)


def test_fishbone_spine_checked():
    with pytest.raises(tw.TowerError):
        tw.fishbone_build(times(1), [times(5)], depth=4)


def test_kernel_identity():
    assert tw.lim1_kernel_identity(times(2), 0, ZERO, 6)["holds"]
    rep = tw.lim1_kernel_identity(const([[2, 0], [0, 1]]), 0, ZERO, 10)
    assert rep["holds"]


def test_wedge_of_identity_arms_is_mittag_leffler():
    w = tw.WedgeDual(1, (times(1),), (M([[1]]),))
    t = tw.TowerSpec(ZZ, (), w)
    assert [tw.dim(t, j) for j in range(4)] == [1, 1, 1, 1]
    assert tw.mittag_leffler(t, 6).status == "Holds"


def test_wedge_of_localization_arms_has_zero_first_derived():
    w = tw.WedgeDual(0, (times(2),), (ExactMatrix.zeros(0, 1),))
    t = tw.TowerSpec(ZZ, (), w)
    assert [tw.dim(t, j) for j in range(4)] == [1, 2, 3, 4]
    d = tw.derived_tower(t, ONE, 5, reduced=True)
    assert d.exact and all(a.lo.is_zero() for a in d.levels)


@pytest.mark.parametrize("name", sorted(sample_towers()))
def test_json_roundtrip(name):
    t = sample_towers()[name]
    assert tw.TowerSpec.from_json(json.loads(json.dumps(t.to_json()))) == t


def test_fishbone_json_roundtrip():
    f3 = sample_fishbones(4)["length3"]
    assert tw.TowerSpec.from_json(json.loads(json.dumps(f3.to_json()))) == f3


small_bonds = st.lists(st.lists(st.integers(-3, 3), min_size=2, max_size=2), min_size=2, max_size=2)


@settings(max_examples=30, deadline=None)
@given(small_bonds)
def test_derived_levels_are_nested_subtowers(rows):
    t = const(rows)
    eng = tw.Engine(depth=5)
    for n in range(4):
        a0 = eng.tower_value(t, ZERO, n).best
        a1 = eng.tower_value(t, ONE, n).best
        a2 = eng.tower_value(t, parse("2"), n).best
        assert a2 <= a1 <= a0
        up = eng.tower_value(t, ONE, n + 1).best
        assert map_image(tw.bond(t, n), up) <= a1


@settings(max_examples=30, deadline=None)
@given(small_bonds)
def test_first_derived_of_constant_tower_is_eventual_image(rows):
    t = const(rows)
    d = tw.derived_tower(t, ONE, 3)
    ev = eventual_image(M(rows))
    assert d.exact and all(a.lo == ev for a in d.levels)


@settings(max_examples=20, deadline=None)
@given(small_bonds, small_bonds)
def test_direct_sum_additivity(a, b):
    ta, tb = const(a), const(b)
    s = tw.TowerSpec.direct_sum(ta, tb)
    for alpha in (ONE, OMEGA, parse("w+3")):
        da, db, ds = (tw.derived_tower(x, alpha, 4) for x in (ta, tb, s))
        for n in range(5):
            assert ds.levels[n].best == block_diag_lattice([da.levels[n].best, db.levels[n].best])


@settings(max_examples=30, deadline=None)
@given(small_bonds)
def test_mittag_leffler_agrees_with_length(rows):
    t = const(rows)
    v = tw.mittag_leffler(t, 6)
    r = tw.ml_length(t, OMEGA, 6, horizon=8)
    if v.status == "Holds":
        assert r.length == ZERO and not r.at_least
    elif v.status == "Fails":
        assert r.at_least or r.length >= ONE


def test_local_ring_tower():
    t = const([[3]], BaseRing.local(2))
    assert tw.mittag_leffler(t, 6).status == "Holds"
    assert tw.support(t, 0).is_full()
