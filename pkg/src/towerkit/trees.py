"""Ranks of well-founded relations and trees, open-game ranks, and the index trees I_alpha."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Iterable, Iterator

from .ordinals import ONE, ZERO, Ordinal, OrdinalError, fundamental

Node = tuple[int, ...]


# --------------------------------------------------------------------------
# well-founded relations


def derivative(relation: Iterable[tuple[Hashable, Hashable]], subset: Iterable[Hashable]) -> frozenset:
    """D(A) = {y : some a in A has a < y}, for the relation given as pairs (a, y)."""
    a = set(subset)
    return frozenset(y for x, y in relation if x in a)


@dataclass(frozen=True)
class DerivativeRun:
    steps: int
    well_founded: bool
    residue: frozenset  # nonempty fixed point when ill-founded


def iterate_derivative(carrier: Iterable[Hashable], relation: Iterable[tuple[Hashable, Hashable]]) -> DerivativeRun:
    rel = list(relation)
    cur = frozenset(carrier)
    steps = 0
    while cur:
        nxt = derivative(rel, cur)
        if nxt == cur:
            return DerivativeRun(steps, False, cur)
        cur = nxt
        steps += 1
    return DerivativeRun(steps, True, frozenset())


def relation_ranks(carrier: Iterable[Hashable], relation: Iterable[tuple[Hashable, Hashable]]) -> dict:
    """rho(x) = sup{rho(a) + 1 : a < x} for a finite well-founded relation."""
    preds: dict = {x: [] for x in carrier}
    for a, y in relation:
        preds.setdefault(y, []).append(a)
        preds.setdefault(a, [])
    ranks: dict = {}
    state: dict = {}
    for root in preds:
        stack = [root]
        while stack:
            x = stack[-1]
            if x in ranks:
                stack.pop()
                continue
            if state.get(x) == "open":
                ranks[x] = max((ranks[a] + 1 for a in preds[x]), default=0)
                stack.pop()
                continue
            state[x] = "open"
            for a in preds[x]:
                if a in ranks:
                    continue
                if state.get(a) == "open":
                    raise ValueError("relation is not well-founded")
                stack.append(a)
    return ranks


# --------------------------------------------------------------------------
# finite trees


@dataclass(frozen=True)
class FiniteTree:
    nodes: frozenset[Node]

    def __post_init__(self):
        for v in self.nodes:
            if v and v[:-1] not in self.nodes:
                raise ValueError(f"tree is not closed under initial segments at {v}")

    @classmethod
    def of(cls, nodes: Iterable[Iterable[int]]) -> "FiniteTree":
        return cls(frozenset(tuple(int(x) for x in v) for v in nodes))

    @classmethod
    def from_json(cls, doc: dict) -> "FiniteTree":
        return cls.of(doc["nodes"])

    def to_json(self) -> dict:
        return {"nodes": [list(v) for v in sorted(self.nodes, key=lambda v: (len(v), v))]}

    def children(self, v: Node) -> list[Node]:
        return sorted(w for w in self.nodes if len(w) == len(v) + 1 and w[:-1] == v)

    def alphabet(self) -> list[int]:
        return sorted({x for v in self.nodes for x in v})


def node_ranks(t: FiniteTree) -> dict[Node, int]:
    """rho(v) = sup{rho(w) + 1 : w a proper extension of v}; leaves have rank 0."""
    ranks: dict[Node, int] = {}
    for v in sorted(t.nodes, key=len, reverse=True):
        kids = [ranks[w] + 1 for w in t.nodes if len(w) == len(v) + 1 and w[:-1] == v]
        ranks[v] = max(kids, default=0)
    return ranks


def rank_finite(t: FiniteTree) -> int:
    """rho(T) = rho(root) + 1, and 0 for the empty tree."""
    if not t.nodes:
        return 0
    return node_ranks(t)[()] + 1


# --------------------------------------------------------------------------
# open games


ESCAPE = "esc"


@dataclass(frozen=True)
class GameRanks:
    sigma: dict
    pi: dict
    rho: int


def game_ranks(t: FiniteTree) -> GameRanks:
    """sigma/pi ranks of the game whose closed payoff for Bob is the body of T.

    Positions outside T are winning for Alice (both ranks 0). Moves range over
    the integers occurring in T plus one escape symbol standing for every
    other move. sigma(x) <= a iff some move z has pi(xz) < a; pi(x) <= a iff
    every move z has sigma(xz) < a. rho(G) is the least a with pi(root) <= a.
    """
    sigma: dict = {}
    pi: dict = {}
    if not t.nodes:
        return GameRanks({(): 0}, {(): 0}, 0)
    moves = list(t.alphabet()) + [ESCAPE]
    for v in sorted(t.nodes, key=len, reverse=True):
        s_vals, p_vals = [], []
        for z in moves:
            w = v + (z,)
            if w in t.nodes:
                s_vals.append(pi[w])
                p_vals.append(sigma[w])
            else:
                s_vals.append(0)
                p_vals.append(0)
        sigma[v] = min(s_vals) + 1
        pi[v] = max(p_vals) + 1
    return GameRanks(sigma, pi, pi[()])


# --------------------------------------------------------------------------
# index trees I_alpha and I_alpha^plain


def _step(gamma: Ordinal, n: int) -> Ordinal:
    """Index of the plain tree rooted at child n of the root of I_gamma^plain."""
    return fundamental(gamma.predecessor(), n)


@lru_cache(maxsize=None)
def plain_root_rank(gamma: Ordinal) -> Ordinal:
    """Rank of the root of I_gamma^plain, by recursion on gamma."""
    if gamma == ONE:
        return ZERO
    below = gamma.predecessor()
    if below.is_successor():
        return plain_root_rank(below) + ONE
    # limit: the sup of rho(child_n) + 1 = lambda_n over a sequence cofinal in lambda
    return below


@dataclass(frozen=True)
class IndexTree:
    """I_alpha^plain (plain) or the forest I_alpha.

    Nodes are addressed by finite tuples of naturals: in the plain tree, ()
    is the root alpha-1 and (n,)+a is the node (a;n); in the forest, the first
    entry selects the component I_{alpha_n}^plain.
    """

    alpha: Ordinal
    plain: bool = True

    def __post_init__(self):
        if self.alpha.is_zero():
            raise OrdinalError("index trees need alpha >= 1")
        if self.plain and not self.alpha.is_successor():
            raise OrdinalError("I_alpha^plain is defined for successor alpha")

    def subtree_index(self, node: Node) -> Ordinal:
        """gamma such that the subtree at `node` is a copy of I_gamma^plain."""
        path = list(node)
        if self.plain:
            gamma = self.alpha
        else:
            if not path:
                raise ValueError("the forest I_alpha has no root node")
            gamma = fundamental(self.alpha, path.pop(0))
        for n in path:
            if gamma == ONE:
                raise KeyError(f"{node} is not a node")
            gamma = _step(gamma, n)
        return gamma

    def is_node(self, node: Node) -> bool:
        try:
            self.subtree_index(node)
            return True
        except (KeyError, ValueError):
            return False

    def label(self, node: Node) -> str:
        """The element name: the root of I_gamma^plain is gamma-1."""
        inner = str(self.subtree_index(node).predecessor())
        for n in reversed(node if self.plain else node[1:]):
            inner = f"({inner};{n})"
        if not self.plain:
            inner = f"({inner};{node[0]})"
        return inner

    def is_terminal(self, node: Node) -> bool:
        return self.subtree_index(node) == ONE

    def children(self, node: Node, breadth: int) -> list[Node]:
        if not self.plain and node == ():
            return [(n,) for n in range(breadth)]
        if self.is_terminal(node):
            return []
        return [node + (n,) for n in range(breadth)]

    def node_rank(self, node: Node) -> Ordinal:
        return plain_root_rank(self.subtree_index(node))

    def materialize(self, breadth: int, max_nodes: int = 10_000) -> list[Node]:
        """Nodes reachable with every child index < breadth (display only)."""
        out: list[Node] = []
        stack: list[Node] = [()] if self.plain else [(n,) for n in reversed(range(breadth))]
        while stack and len(out) < max_nodes:
            v = stack.pop()
            out.append(v)
            stack.extend(reversed(self.children(v, breadth)))
        return out

    def in_boundary(self, node: Node, gamma: Ordinal) -> bool:
        """True when the node lies in the partition piece d_gamma, False for s_gamma."""
        return self.node_rank(node) >= gamma

    def to_json(self) -> dict:
        return {"alpha": str(self.alpha), "plain": self.plain}


def rank_index_tree(t: IndexTree) -> Ordinal:
    """rho of I_alpha^plain (root rank + 1) or of the forest I_alpha (sup over components)."""
    if t.plain:
        return plain_root_rank(t.alpha) + ONE
    if t.alpha.is_successor():
        return plain_root_rank(t.alpha) + ONE
    # components I_{alpha_n}^plain have ranks alpha_n, cofinal in the limit alpha
    return t.alpha


def boundary_by_recursion(t: IndexTree, node: Node, gamma: Ordinal) -> bool:
    """Membership in d_gamma by unfolding the defining clauses (used to cross-check in_boundary)."""
    delta = t.alpha if t.plain else fundamental(t.alpha, node[0])
    path = list(node if t.plain else node[1:])
    while True:
        if delta <= gamma:
            return False  # s_gamma I_delta^plain is everything for delta <= gamma
        if not path:
            return True  # the root delta-1 >= gamma belongs to d_gamma
        if delta == gamma + ONE:
            return False  # s_gamma I_{gamma+1}^plain = I_gamma
        delta = _step(delta, path.pop(0))


def node_less(x: Node, y: Node) -> bool:
    """The linear order: x < y iff x is a proper descendant of y or x precedes y lexicographically."""
    if x == y:
        return False
    for a, b in zip(x, y):
        if a != b:
            return a < b
    return len(x) > len(y)


def linearize(t: IndexTree, node: Node) -> Ordinal:
    """Order-preserving label of a node of I_alpha^plain in w^(alpha-1) + 1; the root gets w^(alpha-1)."""
    if not t.plain:
        raise ValueError("linearize needs a plain index tree")
    if not t.alpha.is_finite():
        raise OrdinalError("labels of I_alpha^plain for infinite alpha exceed w^w")
    gamma = t.alpha
    offset = ZERO
    for n in node:
        child = _step(gamma, n)
        offset = offset + Ordinal.omega_power(child.finite_value() - 1, n) if n else offset
        gamma = child
    return offset + Ordinal.omega_power(gamma.finite_value() - 1)


def linearize_many(t: IndexTree, nodes: Iterable[Node]) -> dict[Node, Ordinal]:
    return {v: linearize(t, v) for v in nodes}


def iter_sample_nodes(t: IndexTree, breadth: int, limit: int) -> Iterator[Node]:
    yield from t.materialize(breadth, limit)
