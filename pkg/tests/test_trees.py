import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from towerkit.ordinals import OMEGA, ONE, Ordinal, OrdinalError, parse
from towerkit.trees import (
    ESCAPE,
    FiniteTree,
    IndexTree,
    boundary_by_recursion,
    derivative,
    game_ranks,
    iterate_derivative,
    linearize,
    node_less,
    node_ranks,
    rank_finite,
    rank_index_tree,
    relation_ranks,
)
from towerkit.verify import random_tree


def chain(n):
    return FiniteTree.of([(0,) * k for k in range(n + 1)])


def test_derivative_examples():
    order = [(0, 1), (0, 2), (1, 2)]
    assert derivative(order, {0, 1, 2}) == {1, 2}
    assert derivative([], {0, 1}) == frozenset()
    run = iterate_derivative({0, 1}, [(0, 1), (1, 0)])
    assert not run.well_founded and run.residue == {0, 1}
    run = iterate_derivative({0, 1, 2}, order)
    assert run.well_founded and run.steps == 3


def test_relation_ranks():
    assert relation_ranks({0, 1, 2}, [(0, 1), (1, 2), (0, 2)]) == {0: 0, 1: 1, 2: 2}
    with pytest.raises(ValueError):
        relation_ranks({0, 1}, [(0, 1), (1, 0)])


def test_rank_finite_examples():
    assert rank_finite(FiniteTree.of([])) == 0
    assert rank_finite(FiniteTree.of([()])) == 1
    for n in range(6):
        assert rank_finite(chain(n)) == n + 1


def test_tree_must_be_closed():
    with pytest.raises(ValueError):
        FiniteTree.of([(), (0, 1)])


def _minimax(t, v, player, memo):
    """Independent restatement: sigma(v) = 1 + min over moves of pi, pi(v) = 1 + max over moves of sigma."""
    key = (v, player)
    if key in memo:
        return memo[key]
    moves = t.alphabet() + [ESCAPE]
    vals = []
    for z in moves:
        w = v + (z,)
        vals.append(_minimax(t, w, "sigma" if player == "pi" else "pi", memo) if w in t.nodes else 0)
    out = 1 + (min(vals) if player == "sigma" else max(vals))
    memo[key] = out
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_game_ranks_match_minimax(seed):
    t = random_tree(random.Random(seed), 40)
    g = game_ranks(t)
    memo = {}
    assert g.rho == _minimax(t, (), "pi", memo)
    assert g.sigma[()] == _minimax(t, (), "sigma", memo)


def test_empty_game():
    g = game_ranks(FiniteTree.of([]))
    assert g.rho == 0 and g.sigma == {(): 0}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_node_ranks_recursion(seed):
    t = random_tree(random.Random(seed), 60)
    r = node_ranks(t)
    for v in t.nodes:
        kids = t.children(v)
        assert r[v] == max((r[w] + 1 for w in kids), default=0)


# --------------------------------------------------------------------------
# index trees


def test_index_tree_shapes():
    i1 = IndexTree(ONE)
    assert i1.materialize(5) == [()]
    i2 = IndexTree(parse("2"))
    assert i2.materialize(5) == [(), (0,), (1,), (2,), (3,), (4,)]
    assert all(i2.is_terminal((n,)) for n in range(5))


@pytest.mark.parametrize("alpha", ["1", "2", "3", "w+1", "w*2+1", "w^2+1"])
def test_index_tree_rank(alpha):
    assert rank_index_tree(IndexTree(parse(alpha))) == parse(alpha)


def test_forest_rank():
    assert rank_index_tree(IndexTree(OMEGA, plain=False)) == OMEGA


def test_plain_needs_successor():
    with pytest.raises(OrdinalError):
        IndexTree(OMEGA)


def test_linearize_examples():
    i2 = IndexTree(parse("2"))
    assert str(linearize(i2, ())) == "w"
    assert [str(linearize(i2, (n,))) for n in range(4)] == ["1", "2", "3", "4"]
    for a in ("1", "2", "3", "4"):
        t = IndexTree(parse(a))
        assert linearize(t, ()) == Ordinal.omega_power(int(a) - 1)


@pytest.mark.parametrize("alpha", ["2", "3", "4"])
def test_linearize_is_order_preserving(alpha):
    t = IndexTree(parse(alpha))
    nodes = t.materialize(3)
    for x in nodes:
        for y in nodes:
            if node_less(x, y):
                assert linearize(t, x) < linearize(t, y)


def test_terminal_labels_are_successors():
    t = IndexTree(parse("3"))
    term = [v for v in t.materialize(4) if t.is_terminal(v)]
    assert term and all(linearize(t, v).is_successor() for v in term)


@pytest.mark.parametrize("alpha", ["3", "w+1", "w+2"])
def test_boundary_partition(alpha):
    t = IndexTree(parse(alpha))
    for gamma in ("0", "1", "2", "w"):
        g = parse(gamma)
        for v in t.materialize(3, 300):
            assert t.in_boundary(v, g) == boundary_by_recursion(t, v, g)


def test_labels():
    t = IndexTree(parse("3"))
    assert t.label(()) == "2"
    assert t.label((4,)) == "(1;4)"
