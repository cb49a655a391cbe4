import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerkit import modcolim as mc
from towerkit import towers as tw
from towerkit.exactlin import ZZ, BaseRing, ExactMatrix, Lattice
from towerkit.ordinals import OMEGA, ONE, ZERO, OrdinalError, parse

M = ExactMatrix.of


@pytest.fixture(scope="module")
def xi():
    return mc.xi_module(mc.PAdicDigits.seeded(3, 20, 5), 19)


# --------------------------------------------------------------------------
# construction and validation


def test_padic_digits():
    d = mc.PAdicDigits.from_truncations(3, [1, 7, 16])
    assert d.digits == (1, 2, 1) and [d.truncation(n) for n in range(3)] == [1, 7, 16]
    with pytest.raises(mc.ColimError):
        mc.PAdicDigits.from_truncations(3, [1, 5])  # 5 != 1 mod 3
    with pytest.raises(mc.ColimError):
        mc.PAdicDigits(3, (2, 1))
    with pytest.raises(mc.ColimError):
        mc.PAdicDigits(4, (1,))
    assert mc.PAdicDigits(3, (2, 1), unit_mod_p=False).digits == (2, 1)
    a, b = mc.PAdicDigits.seeded(5, 30, 9), mc.PAdicDigits.seeded(5, 30, 9)
    assert a == b and a.digits[0] == 1


def test_xi_completion_is_irreducible():
    for p in (2, 3, 5, 7):
        a, b = mc.xi_completion(p)
        disc = a * a + 4 * b
        assert a % p and b % p == 0
        assert int(disc ** 0.5) ** 2 != disc and (int(disc ** 0.5) + 1) ** 2 != disc


def test_injectivity_and_shapes_checked():
    with pytest.raises(mc.ColimError):
        mc.constant(M([[1, 1], [1, 1]]))
    with pytest.raises(mc.ColimError):
        mc.ColimSpec(ZZ, (mc.Stage(1, M([[1], [1]])),), mc.ConstantPattern(1, M([[1]])))
    with pytest.raises(mc.ColimError):
        mc.ColimSpec(ZZ, (mc.Stage(2, M([[1, -1]])),), mc.ConstantPattern(1, M([[1]])))
    with pytest.raises(mc.ColimError):
        mc.wedge_sum(1, [mc.free_module(1)], [M([[0]])])
    with pytest.raises(mc.ColimError):
        mc.wedge_sum(2, [mc.free_module(1)], [M([[1, 0]])])


def test_purity_flags():
    assert mc.localization(2).purity(3) == (False,) * 4
    assert mc.split_inclusions().purity(3) == (True,) * 4
    assert mc.free_module(2).is_pure(0)


def test_dual_examples(xi):
    assert tw.bond(mc.dual_tower(mc.localization(5)), 0) == M([[5]])
    split = mc.dual_tower(mc.split_inclusions())
    for n in range(4):
        b = tw.bond(split, n)
        assert b.shape == (n + 1, n + 2) and b @ b.T() == ExactMatrix.identity(n + 1)
        assert sorted(x for row in b.rows for x in row) == [0] * ((n + 1) * (n + 2) - n - 1) + [1] * (n + 1)
    d = xi.tail.digits
    for n in range(5):
        assert tw.bond(mc.dual_tower(xi), n) == M([[1, 0], [d.digits[n + 1] * 3, 3]])


def test_double_transpose(xi):
    for c in (mc.localization(3), xi, mc.split_inclusions()):
        for n in range(4):
            assert c.transition(n).T().T() == c.transition(n)
            assert tw.bond(mc.dual_tower(c), n) == c.transition(n).T()


def test_colim_from_dual_roundtrip():
    c = mc.localization(7)
    back = mc.colim_from_dual(mc.dual_tower(c))
    assert back.transition(0) == c.transition(0) and back.rank(3) == 1


# --------------------------------------------------------------------------
# Ext invariants


def test_localization():
    c = mc.localization(2)
    assert mc.is_projective(c, 8).status == "Fails"
    assert mc.coreduced_check(c, 8).status == "Holds"
    r = mc.r_projective_length(c, OMEGA, 8, horizon=10)
    assert r.r_projective_length == ONE and r.plain == "yes" and r.projective == "Fails"


def test_projective_examples():
    for c in (mc.split_inclusions(), mc.free_module(2)):
        assert mc.is_projective(c, 8).status == "Holds"
        r = mc.r_projective_length(c, OMEGA, 8, horizon=10)
        assert r.r_projective_length == ZERO and not r.at_least
    assert mc.coreduced_check(mc.free_module(1), 6).status == "Fails"


def test_xi_module(xi):
    chk = mc.xi_check(xi)
    assert chk.relation_ok and chk.transitions_ok and chk.well_pointed
    r = mc.r_projective_length(xi, OMEGA, 8, horizon=10)
    assert r.coreduced == "Holds" and r.r_projective_length == ONE and r.plain == "yes"
    assert r.to_stage == 19 and r.to_json()["to_stage"] == 19


def test_xi_relation_in_rationals(xi):
    # e = (1, 0), f = (0, 1); g_n = p^-n (e - tau_n f); stage-n coordinates (a, b) mean a f + b g_n
    d = xi.tail.digits
    for n in range(6):
        a, b = mc.xi_e(xi, n)
        g = (Fraction(1, 3 ** n), Fraction(-d.truncation(n), 3 ** n))
        assert (b * g[0], a + b * g[1]) == (1, 0)


def test_xi_needs_digits():
    with pytest.raises(mc.ColimError):
        mc.xi_module(mc.PAdicDigits(2, (1, 0, 1)), 3)


def test_wedge_identity_arms():
    w = mc.wedge_sum(1, [mc.free_module(1)], [M([[1]])])
    assert [w.rank(j) for j in range(4)] == [1, 1, 1, 1]
    assert mc.is_projective(w, 8).status == "Holds"


def test_single_arm_wedge_is_the_arm(xi):
    one = mc.wedge_sum(2, [xi], [ExactMatrix.identity(2)], cyclic=False)
    assert [one.rank(j) for j in range(4)] == [2, 2, 2, 2]
    r = mc.r_projective_length(one, OMEGA, 8, horizon=10)
    assert r.r_projective_length == ONE and r.plain == "yes"


def test_gap_module():
    g = mc.gap_module(mc.PAdicDigits.seeded(2, 24, 4), 23)
    assert mc.tree_length_certificate(g) == parse("2")
    r = mc.r_projective_length(g, OMEGA, 8, horizon=10)
    assert r.r_projective_length == ONE and not r.at_least and r.plain == "no"
    assert r.coreduced == "Holds" and r.projective == "Fails"
    # psi_k = p^k e is impure once k >= 1
    assert mc.glue_purity(g) == (False,)


def test_tree_length_certificates(xi):
    assert mc.tree_length_certificate(mc.free_module(2)) == ZERO
    assert mc.tree_length_certificate(mc.localization(2)) == ONE
    assert mc.tree_length_certificate(xi) == ONE
    assert mc.tree_length_certificate(mc.direct_sum(xi, mc.localization(3, xi.ring))) == ONE
    rep = mc.sigma_partial(xi, ONE, 3)
    with pytest.raises(mc.ColimError):
        mc.tree_length_certificate(rep.partial)


def test_direct_sum_needs_same_ring(xi):
    with pytest.raises(mc.ColimError):
        mc.direct_sum(xi, mc.localization(2))


# --------------------------------------------------------------------------
# sigma and partial


def test_sigma_of_xi(xi):
    rep = mc.sigma_partial(xi, ONE, 6)
    assert rep.consistent == "yes" and rep.exact
    assert all(s.is_full() for s in rep.sigma)
    assert all(st.rank == 0 for st in rep.partial.stages)
    assert mc.partial_dual_matches(rep, xi, 6)


def test_sigma_zero_alpha_is_identity(xi):
    rep = mc.sigma_partial(xi, ZERO, 4)
    assert all(s.is_zero() for s in rep.sigma)
    assert [st.rank for st in rep.partial.stages] == [2] * 5
    assert mc.partial_dual_matches(rep, xi, 4)


def test_sigma_of_zero_module():
    rep = mc.sigma_partial(mc.free_module(0), ONE, 3)
    assert rep.consistent == "yes" and all(s.dim == 0 for s in rep.sigma)


def test_sigma_needs_coreduced():
    with pytest.raises(mc.ColimError):
        mc.sigma_partial(mc.free_module(1), ONE, 3)


# --------------------------------------------------------------------------
# resolutions


def test_resolution_zero():
    rep = mc.phantom_resolution(mc.localization(2), ZERO, 3, 4)
    assert [m.rank(0) for m in rep.modules] == [1, 1, 1] and rep.pure == ("Holds",) * 3


def test_resolution_single_arm(xi):
    m = mc.resolution_term(xi, ONE, 0, 1)
    assert [m.rank(j) for j in range(4)] == [2, 2, 2, 2]
    assert mc.is_projective(m, 6).status == "Holds"


def test_resolution_on_split_inclusions():
    f = mc.split_inclusions()
    for alpha in (ONE, parse("2")):
        rep = mc.phantom_resolution(f, alpha, 2, 4)
        assert rep.pure == ("Holds",) * 3 and rep.tree_bound == alpha
        assert all(mc.is_projective(m, 6).status == "Holds" for m in rep.modules)
        assert all(mc.tree_length_certificate(m) == alpha for m in rep.modules)


def test_resolution_purity_fails_for_impure_transitions():
    rep = mc.phantom_resolution(mc.localization(2), ONE, 3, 4)
    assert all(p.startswith("Fails") for p in rep.pure)


def test_resolution_needs_successor():
    with pytest.raises(OrdinalError):
        mc.resolution_term(mc.localization(2), OMEGA, 0, 2)


# --------------------------------------------------------------------------
# serialization


def test_json_roundtrip(xi):
    g = mc.gap_module(xi.tail.digits, 19)
    for c in (xi, g, mc.split_inclusions(), mc.direct_sum(xi, mc.localization(2, xi.ring)), mc.localization(3)):
        back = mc.ColimSpec.from_json(json.loads(json.dumps(c.to_json())))
        assert back == c and back.origin == c.origin


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(0, 10 ** 6), st.integers(4, 16))
def test_xi_invariants_for_any_digits(p, seed, n):
    d = mc.PAdicDigits.seeded(p, n, seed)
    c = mc.xi_module(d, n - 1)
    chk = mc.xi_check(c, extra=2)
    assert chk.relation_ok and chk.transitions_ok and chk.well_pointed
    assert mc.coreduced_check(c, 4).status == "Holds"
    r = mc.r_projective_length(c, OMEGA, 4, horizon=6)
    assert r.r_projective_length == ONE and r.plain == "yes"


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(st.integers(-4, 4), min_size=2, max_size=2), min_size=2, max_size=2))
def test_projective_iff_length_zero(rows):
    m = M(rows)
    if m.rows[0][0] * m.rows[1][1] - m.rows[0][1] * m.rows[1][0] == 0:
        return
    c = mc.constant(m)
    r = mc.r_projective_length(c, OMEGA, 5, horizon=6)
    ml = tw.ml_length(mc.dual_tower(c), OMEGA, 5, horizon=6)
    assert r.r_projective_length == ml.length and r.plain == ml.plain
    if r.projective == "Holds":
        assert r.r_projective_length == ZERO
    if r.projective == "Fails":
        assert r.at_least or r.r_projective_length >= ONE
