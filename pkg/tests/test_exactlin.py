import itertools
from math import gcd

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy.matrices.normalforms import smith_normal_form

from towerkit.exactlin import (
    ZZ,
    BaseRing,
    DimensionError,
    ExactMatrix,
    Lattice,
    det,
    dual_map,
    eventual_image,
    hnf,
    image_chain,
    is_stable_onto,
    lattice_intersection,
    lattice_sum,
    map_image,
    map_kernel,
    map_preimage,
    quotient_shape,
    saturate,
    snf,
)
from towerkit.verify import is_canonical_hnf

M = ExactMatrix.of


def matrices(max_dim=4, bound=20):
    return st.integers(1, max_dim).flatmap(
        lambda r: st.integers(1, max_dim).flatmap(
            lambda c: st.lists(st.lists(st.integers(-bound, bound), min_size=c, max_size=c),
                               min_size=r, max_size=r).map(lambda rows: M(rows, c))))


def lattices(dim, max_gens=3, bound=12):
    return st.lists(st.lists(st.integers(-bound, bound), min_size=dim, max_size=dim),
                    max_size=max_gens).map(lambda g: Lattice.span(dim, g))


def members_in_box(lat, r=12):
    return {v for v in itertools.product(range(-r, r + 1), repeat=lat.dim) if lat.contains(v)}


# --------------------------------------------------------------------------
# normal forms


def test_hnf_example():
    h, u = hnf(M([[2, 6], [4, 8]]))
    assert h == M([[2, 2], [0, 4]])
    assert u @ M([[2, 6], [4, 8]]) == h and abs(det(u)) == 1


def test_hnf_identity_and_zero():
    h, u = hnf(ExactMatrix.identity(3))
    assert h == ExactMatrix.identity(3) and u == ExactMatrix.identity(3)
    h, u = hnf(ExactMatrix.zeros(2, 2))
    assert h.is_zero() and u == ExactMatrix.identity(2)


@pytest.mark.parametrize("m, diag", [([[2, 6], [4, 8]], [2, 4]), ([[6, 0], [0, 4]], [2, 12]),
                                     ([[1, 0], [0, 1]], [1, 1])])
def test_snf_examples(m, diag):
    s, u, v = snf(M(m))
    assert [s.rows[i][i] for i in range(2)] == diag
    assert u @ M(m) @ v == s


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_hnf_properties(m):
    h, u = hnf(m)
    assert u @ m == h and abs(det(u)) == 1 and is_canonical_hnf(h)


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_snf_matches_sympy(m):
    s, u, v = snf(m)
    assert u @ m @ v == s
    ours = [s.rows[i][i] for i in range(min(s.nrows, s.ncols))]
    ref = smith_normal_form(sympy.Matrix(m.rows), domain=sympy.ZZ)
    theirs = [abs(int(ref[i, i])) for i in range(min(s.nrows, s.ncols))]
    assert sorted(x for x in ours if x) == sorted(x for x in theirs if x)
    nz = [x for x in ours if x]
    assert all(b % a == 0 for a, b in zip(nz, nz[1:]))


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_det_matches_sympy(m):
    if m.nrows != m.ncols:
        with pytest.raises(DimensionError):
            det(m)
    else:
        assert det(m) == int(sympy.Matrix(m.rows).det())


def test_dual_map():
    assert dual_map(M([[1, 2], [3, 4]])) == M([[1, 3], [2, 4]])
    m = M([[1, 2, 0], [3, 4, 5]])
    assert dual_map(dual_map(m)) == m


def test_shape_validation():
    with pytest.raises(DimensionError):
        M([[1, 2], [3]])
    with pytest.raises(DimensionError):
        M([[1]]) @ M([[1, 2], [3, 4]])


# --------------------------------------------------------------------------
# lattices


def test_meet_example():
    a = Lattice.span(2, [(2, 0), (0, 1)])
    b = Lattice.span(2, [(1, 0), (0, 3)])
    assert lattice_intersection(a, b) == Lattice.span(2, [(2, 0), (0, 3)])
    assert lattice_intersection(a, a) == a
    assert lattice_sum(a, Lattice.zero(2)) == a


def test_saturate_examples():
    assert saturate(Lattice.span(2, [(2, 4)])) == Lattice.span(2, [(1, 2)])
    two = BaseRing.inverting(2)
    assert saturate(Lattice.span(2, [(2, 4)], two), two) == Lattice.span(2, [(1, 2)])
    sat = Lattice.span(2, [(1, 2)])
    assert saturate(sat) == sat


def test_kernel_and_image():
    assert map_image(M([[2]]), Lattice.full(1)) == Lattice.span(1, [(2,)])
    assert map_kernel(M([[1, 1]])) == Lattice.span(2, [(1, -1)])
    f = M([[1, 1], [2, 2]])
    assert map_preimage(f, Lattice.zero(2)) == map_kernel(f)


def test_quotient_shape_examples():
    full = Lattice.full(2)
    assert quotient_shape(full, Lattice.span(2, [(2, 0), (0, 4)])).to_json() == {"free_rank": 0,
                                                                                "invariant_factors": [2, 4]}
    assert quotient_shape(full, full).is_zero()
    q = quotient_shape(full, Lattice.span(2, [(2, 0)]))
    assert (q.free_rank, q.invariant_factors) == (1, (2,))


def test_localized_quotient_drops_units():
    r = BaseRing.inverting(2)
    q = quotient_shape(Lattice.full(2), Lattice.span(2, [(6, 0), (0, 1)], r), r)
    assert q.invariant_factors == (3,)


@settings(max_examples=60, deadline=None)
@given(lattices(2), lattices(2))
def test_meet_join_membership(a, b):
    ma, mb = members_in_box(a, 8), members_in_box(b, 8)
    meet = lattice_intersection(a, b)
    assert members_in_box(meet, 8) == ma & mb
    join = lattice_sum(a, b)
    assert a <= join and b <= join and meet <= a and meet <= b


@settings(max_examples=60, deadline=None)
@given(lattices(3))
def test_saturate_properties(lat):
    s = saturate(lat)
    assert lat <= s and saturate(s) == s and s.rank == lat.rank
    for v in s.basis:
        g = 0
        for x in v:
            g = gcd(g, x)
        assert g == 1 or not any(v)


@settings(max_examples=60, deadline=None)
@given(matrices(3, 6), st.data())
def test_preimage_image_adjunction(f, data):
    lat = data.draw(lattices(f.nrows))
    pre = map_preimage(f, lat)
    assert map_image(f, pre) <= lat
    src = data.draw(lattices(f.ncols))
    assert src <= map_preimage(f, map_image(f, src))


# --------------------------------------------------------------------------
# eventual image


def test_eventual_image_examples():
    assert eventual_image(ExactMatrix.diag([2, 1])) == Lattice.span(2, [(0, 1)])
    assert eventual_image(M([[1, 1], [0, 1]])) == Lattice.full(2)
    two = BaseRing.inverting(2)
    assert eventual_image(M([[2]]), two) == Lattice.full(1)
    assert eventual_image(M([[0, 1], [0, 0]])) == Lattice.zero(2)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.lists(st.integers(-4, 4), min_size=3, max_size=3), min_size=3, max_size=3))
def test_eventual_image_is_stable_and_below_the_chain(rows):
    m = M(rows)
    s = eventual_image(m)
    assert is_stable_onto(m, s)
    chain = image_chain(m, 12)
    assert all(s <= c for c in chain)
    if chain[11] == chain[12]:
        assert s == chain[12]


def test_eventual_image_local_ring():
    loc = BaseRing.local(3)
    # x^2 - 5 has constant term -5, a unit at 3
    m = M([[0, 5], [1, 0]])
    assert eventual_image(m, loc) == Lattice.full(2)
    assert eventual_image(M([[3, 0], [0, 2]]), loc) == Lattice.span(2, [(0, 1)])
    assert ZZ.is_unit(-1) and not ZZ.is_unit(2)
