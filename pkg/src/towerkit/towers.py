"""Finitely specified towers of lattices: limits, Mittag-Leffler verdicts, derived towers and lengths.

A tower is a finite prefix of explicit levels followed by a tail that
describes infinitely many levels. Level n is Z^dim(n) (or its localization
given by the ring) and bond(n) maps level n+1 to level n.

Derived levels are stored as lattices in the ambient level. When a tower is
reduced (quotiented by its limit support A_inf), a derived level is stored as
its preimage in the ambient lattice, so it always contains the relation
lattice A_inf at that level.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .exactlin import (
    ZZ,
    BaseRing,
    ExactMatrix,
    Lattice,
    block_diag_lattice,
    eventual_image,
    left_kernel,
    map_image,
    map_preimage,
    map_solve,
    matrix_power,
    quotient_shape,
    snf,
)
from .ordinals import (
    ONE,
    ZERO,
    Ordinal,
    OrdinalError,
    fundamental,
    ordinals_up_to,
)

DEFAULT_DEPTH = 16
DEFAULT_HORIZON = 24
WINDOW = 4


class TowerError(ValueError):
    pass


# --------------------------------------------------------------------------
# tower specifications


@dataclass(frozen=True)
class Level:
    dim: int
    bond: ExactMatrix  # dim(n) x dim(n+1)


@dataclass(frozen=True)
class ZeroTail:
    pass


@dataclass(frozen=True)
class ConstantTail:
    dim: int
    bond: ExactMatrix

    def __post_init__(self):
        if self.bond.shape != (self.dim, self.dim):
            raise TowerError(f"constant tail bond has shape {self.bond.shape}, expected {(self.dim, self.dim)}")


@dataclass(frozen=True)
class DirectSum:
    left: "TowerSpec"
    right: "TowerSpec"


@dataclass(frozen=True)
class Shift:
    base: "TowerSpec"
    k: int


@dataclass(frozen=True)
class Fishbone:
    """Spine A and cyclic ribs: rib k is ribs[k % len(ribs)] and its level 0 is glued to A at level k."""

    spine: "TowerSpec"
    ribs: tuple["TowerSpec", ...]

    def rib(self, k: int) -> "TowerSpec":
        return self.ribs[k % len(self.ribs)]


@dataclass(frozen=True)
class WedgeDual:
    """Levels {(s, r_0, .., r_j) : glue_k(r_k) = s}, arm k entering at level k as its level 0.

    This is the tower of functionals on the stages of a wedge colimit. Arm k is
    arms[k % len(arms)] when cyclic, and only the listed arms exist otherwise.
    glue_k is scale**k * glues[k % len(glues)] composed with the bonds of arm k
    down to its level 0.
    """

    base: int
    arms: tuple["TowerSpec", ...]
    glues: tuple[ExactMatrix, ...]  # base x dim(arm, 0)
    scale: int = 1
    cyclic: bool = True

    def arm(self, k: int) -> "TowerSpec":
        return self.arms[k % len(self.arms)]

    def glue(self, k: int) -> ExactMatrix:
        g = self.glues[k % len(self.glues)]
        return g if self.scale == 1 else ExactMatrix.scalar(self.base, self.scale ** k) @ g

    def present(self, j: int) -> range:
        """Indices of the arms present at level j."""
        return range(j + 1) if self.cyclic else range(min(j + 1, len(self.arms)))


Tail = Union[ZeroTail, ConstantTail, DirectSum, Shift, Fishbone, WedgeDual]


@dataclass(frozen=True)
class TowerSpec:
    ring: BaseRing
    prefix: tuple[Level, ...]
    tail: Tail
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.ring, self.prefix, self.tail)))
        for i, lv in enumerate(self.prefix):
            nxt = self.prefix[i + 1].dim if i + 1 < len(self.prefix) else tail_dim(self.tail, 0)
            if lv.bond.shape != (lv.dim, nxt):
                raise TowerError(f"bond at level {i} has shape {lv.bond.shape}, expected {(lv.dim, nxt)}")
        if isinstance(self.tail, Fishbone):
            if not self.tail.ribs:
                raise TowerError("a fishbone needs at least one rib")
            for k in range(max(len(self.tail.ribs), len(self.tail.spine.prefix) + len(self.tail.ribs))):
                if dim(self.tail.rib(k), 0) != dim(self.tail.spine, k):
                    raise TowerError(f"rib {k} level 0 has dimension {dim(self.tail.rib(k), 0)} "
                                     f"but the spine has dimension {dim(self.tail.spine, k)} at level {k}")
        if isinstance(self.tail, WedgeDual):
            w = self.tail
            if not w.arms or len(w.glues) != len(w.arms):
                raise TowerError("a wedge needs one glue map per arm")
            for a, g in zip(w.arms, w.glues):
                if g.shape != (w.base, dim(a, 0)):
                    raise TowerError(f"glue map has shape {g.shape}, expected {(w.base, dim(a, 0))}")
                if a.ring != self.ring:
                    raise TowerError("wedge arms must share the base ring")

    def __hash__(self):
        return self._hash

    @classmethod
    def constant(cls, bond: ExactMatrix, ring: BaseRing = ZZ, prefix=()) -> "TowerSpec":
        return cls(ring, tuple(prefix), ConstantTail(bond.nrows, bond))

    @classmethod
    def zero(cls, ring: BaseRing = ZZ) -> "TowerSpec":
        return cls(ring, (), ZeroTail())

    @classmethod
    def direct_sum(cls, left: "TowerSpec", right: "TowerSpec") -> "TowerSpec":
        return cls(left.ring, (), DirectSum(left, right))

    @classmethod
    def shift(cls, base: "TowerSpec", k: int) -> "TowerSpec":
        return cls(base.ring, (), Shift(base, k))

    def to_json(self) -> dict:
        return {
            "ring": self.ring.to_json(),
            "prefix": [{"dim": lv.dim, "bond": lv.bond.to_json()} for lv in self.prefix],
            "tail": _tail_to_json(self.tail),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TowerSpec":
        ring = BaseRing.from_json(doc.get("ring"))
        tail = _tail_from_json(doc.get("tail", {"kind": "zero"}), ring)
        raw = doc.get("prefix", [])
        levels = []
        for i, lv in enumerate(raw):
            nxt = int(raw[i + 1]["dim"]) if i + 1 < len(raw) else tail_dim(tail, 0)
            levels.append(Level(int(lv["dim"]), ExactMatrix.from_json(lv["bond"], nxt)))
        return cls(ring, tuple(levels), tail)


def _tail_to_json(t: Tail) -> dict:
    if isinstance(t, ZeroTail):
        return {"kind": "zero"}
    if isinstance(t, ConstantTail):
        return {"kind": "constant", "dim": t.dim, "bond": t.bond.to_json()}
    if isinstance(t, DirectSum):
        return {"kind": "sum", "left": t.left.to_json(), "right": t.right.to_json()}
    if isinstance(t, Shift):
        return {"kind": "shift", "base": t.base.to_json(), "k": t.k}
    if isinstance(t, WedgeDual):
        return {"kind": "wedge", "base": t.base, "arms": [a.to_json() for a in t.arms],
                "glues": [g.to_json() for g in t.glues], "scale": t.scale, "cyclic": t.cyclic}
    return {"kind": "fishbone", "spine": t.spine.to_json(), "ribs": [r.to_json() for r in t.ribs]}


def _tail_from_json(doc: dict, ring: BaseRing) -> Tail:
    kind = doc.get("kind")
    if kind == "zero":
        return ZeroTail()
    if kind == "constant":
        d = int(doc["dim"])
        return ConstantTail(d, ExactMatrix.from_json(doc["bond"], d))
    if kind == "sum":
        return DirectSum(TowerSpec.from_json(doc["left"]), TowerSpec.from_json(doc["right"]))
    if kind == "shift":
        return Shift(TowerSpec.from_json(doc["base"]), int(doc["k"]))
    if kind == "fishbone":
        return Fishbone(TowerSpec.from_json(doc["spine"]), tuple(TowerSpec.from_json(r) for r in doc["ribs"]))
    if kind == "wedge":
        arms = tuple(TowerSpec.from_json(a) for a in doc["arms"])
        glues = tuple(ExactMatrix.from_json(g, dim(a, 0)) for g, a in zip(doc["glues"], arms))
        return WedgeDual(int(doc["base"]), arms, glues, int(doc.get("scale", 1)), bool(doc.get("cyclic", True)))
    raise TowerError(f"unknown tail kind {kind!r}")


# --------------------------------------------------------------------------
# level evaluation

_dim_cache: dict = {}
_bond_cache: dict = {}
_compose_cache: dict = {}


def _fishbone_slots(fb: Fishbone, j: int) -> list[tuple[str, int, int, int]]:
    """Slots of fishbone level j as (kind, rib index, level inside that tower, dimension)."""
    slots = [("rib", k, j - k, dim(fb.rib(k), j - k)) for k in range(j)]
    slots.append(("spine", -1, j, dim(fb.spine, j)))
    return slots


def tail_dim(t: Tail, j: int) -> int:
    if isinstance(t, ZeroTail):
        return 0
    if isinstance(t, ConstantTail):
        return t.dim
    if isinstance(t, DirectSum):
        return dim(t.left, j) + dim(t.right, j)
    if isinstance(t, Shift):
        return dim(t.base, j + t.k)
    if isinstance(t, WedgeDual):
        return len(_wedge_basis(t, j))
    return sum(s[3] for s in _fishbone_slots(t, j))


def dim(t: TowerSpec, n: int) -> int:
    key = (t, n)
    if key not in _dim_cache:
        if n < 0:
            raise TowerError("negative level")
        _dim_cache[key] = t.prefix[n].dim if n < len(t.prefix) else tail_dim(t.tail, n - len(t.prefix))
    return _dim_cache[key]


def _tail_bond(t: Tail, j: int) -> ExactMatrix:
    if isinstance(t, ZeroTail):
        return ExactMatrix.zeros(0, 0)
    if isinstance(t, ConstantTail):
        return t.bond
    if isinstance(t, DirectSum):
        return ExactMatrix.block_diag([bond(t.left, j), bond(t.right, j)])
    if isinstance(t, Shift):
        return bond(t.base, j + t.k)
    if isinstance(t, WedgeDual):
        return _wedge_bond(t, j)
    lower, upper = _fishbone_slots(t, j), _fishbone_slots(t, j + 1)
    nr, nc = sum(s[3] for s in lower), sum(s[3] for s in upper)
    rows = [[0] * nc for _ in range(nr)]
    roff = [0]
    for s in lower:
        roff.append(roff[-1] + s[3])
    coff = [0]
    for s in upper:
        coff.append(coff[-1] + s[3])

    def put(block: ExactMatrix, r0: int, c0: int):
        for i, row in enumerate(block.rows):
            for jj, x in enumerate(row):
                rows[r0 + i][c0 + jj] += x

    for k in range(j):  # rib k: level j+1-k -> level j-k
        put(bond(t.rib(k), j - k), roff[k], coff[k])
    put(bond(t.rib(j), 0), roff[j], coff[j])  # rib j level 1 -> spine level j
    put(bond(t.spine, j), roff[j], coff[j + 1])
    return ExactMatrix(nr, nc, tuple(tuple(r) for r in rows))


def bond(t: TowerSpec, n: int) -> ExactMatrix:
    """The bonding map from level n+1 to level n."""
    key = (t, n)
    if key not in _bond_cache:
        if n < 0:
            raise TowerError("negative level")
        _bond_cache[key] = t.prefix[n].bond if n < len(t.prefix) else _tail_bond(t.tail, n - len(t.prefix))
    return _bond_cache[key]


def tower_eval(t: TowerSpec, n: int) -> tuple[int, ExactMatrix]:
    return dim(t, n), bond(t, n)


def compose_bond(t: TowerSpec, n: int, m: int) -> ExactMatrix:
    """p^(n,m): level m -> level n, with p^(n,n) the identity."""
    if n < 0 or m < n:
        raise TowerError(f"compose_bond needs 0 <= n <= m, got n={n}, m={m}")
    key = (t, n, m)
    if key not in _compose_cache:
        if m == n:
            _compose_cache[key] = ExactMatrix.identity(dim(t, n))
        else:
            _compose_cache[key] = compose_bond(t, n, m - 1) @ bond(t, m - 1)
    return _compose_cache[key]


# wedge levels --------------------------------------------------------------

_wedge_cache: dict = {}


def _wedge_ambient(w: WedgeDual, j: int) -> list[int]:
    """Block sizes of the ambient level: the base, then arm k at its level j-k."""
    return [w.base] + [dim(w.arm(k), j - k) for k in w.present(j)]


def _wedge_basis(w: WedgeDual, j: int) -> tuple[tuple[int, ...], ...]:
    """Canonical basis of level j inside the ambient direct sum."""
    key = ("basis", w, j)
    if key not in _wedge_cache:
        sizes = _wedge_ambient(w, j)
        amb = sum(sizes)
        rows = []
        off = w.base
        for k, sz in zip(w.present(j), sizes[1:]):
            g = w.glue(k) @ compose_bond(w.arm(k), 0, j - k)
            for i in range(w.base):
                row = [0] * amb
                row[i] = -1
                row[off:off + sz] = g.rows[i]
                rows.append(row)
            off += sz
        if rows:
            ker = left_kernel(ExactMatrix(len(rows), amb, tuple(tuple(r) for r in rows)).T().rows, amb)
        else:
            ker = ExactMatrix.identity(amb).rows
        _wedge_cache[key] = Lattice.span(amb, ker).basis
    return _wedge_cache[key]


def wedge_embedding(w: WedgeDual, j: int) -> ExactMatrix:
    """Columns are the basis of level j written in ambient coordinates."""
    basis = _wedge_basis(w, j)
    amb = sum(_wedge_ambient(w, j))
    return ExactMatrix(len(basis), amb, basis).T() if basis else ExactMatrix.zeros(amb, 0)


def _wedge_bond(w: WedgeDual, j: int) -> ExactMatrix:
    lower = Lattice(sum(_wedge_ambient(w, j)), _wedge_basis(w, j))
    cols = []
    for v in _wedge_basis(w, j + 1):
        out = list(v[:w.base])
        off = w.base
        for k in w.present(j + 1):
            sz = dim(w.arm(k), j + 1 - k)
            if k in w.present(j):
                out.extend(bond(w.arm(k), j - k).apply(v[off:off + sz]))
            off += sz
        c = lower.coordinates(out)
        if c is None:
            raise TowerError(f"wedge bond at level {j} leaves the fibre product")
        cols.append(c)
    nr, nc = lower.rank, len(cols)
    return ExactMatrix(nr, nc, tuple(tuple(cols[c][r] for c in range(nc)) for r in range(nr)))


def _wedge_base_support(w: WedgeDual, ring: BaseRing) -> Lattice:
    """Values on the base of functionals defined on every arm (the base part of A_inf)."""
    n = len(w.arms)
    if w.cyclic and n and not ring.is_unit(w.scale):
        return Lattice.zero(w.base)
    out = Lattice.full(w.base)
    for k in range(n):
        g = w.glue(k) if not w.cyclic else w.glues[k]
        out = out & map_image(g, support(w.arm(k), 0), ring)
    return out


def materialize_prefix(t: TowerSpec, n: int) -> TowerSpec:
    """The same tower with levels 0..n-1 written out explicitly and the rest as a shift of t."""
    levels = tuple(Level(dim(t, i), bond(t, i)) for i in range(n))
    return TowerSpec(t.ring, levels, Shift(t, n))


def clear_caches():
    _wedge_cache.clear()
    for c in (_dim_cache, _bond_cache, _compose_cache, _support_cache):
        c.clear()


# --------------------------------------------------------------------------
# approximations and verdicts


@dataclass(frozen=True)
class Approx:
    """A level known between lo and hi; `est` is the best available value when they differ."""

    lo: Lattice
    hi: Lattice
    cert: str
    est: Lattice | None = None

    @property
    def exact(self) -> bool:
        return self.lo == self.hi

    @property
    def best(self) -> Lattice:
        if self.exact:
            return self.lo
        return self.est if self.est is not None else self.hi

    @classmethod
    def of(cls, lat: Lattice, cert: str) -> "Approx":
        return cls(lat, lat, cert)

    def to_json(self) -> dict:
        out = {"exact": self.exact, "cert": self.cert}
        if self.exact:
            out["lattice"] = self.lo.to_json()
        else:
            out["lower"] = self.lo.to_json()
            out["upper"] = self.hi.to_json()
            if self.est is not None:
                out["estimate"] = self.est.to_json()
        return out


def _block(parts: list[Approx], cert: str) -> Approx:
    lo = block_diag_lattice([p.lo for p in parts])
    hi = block_diag_lattice([p.hi for p in parts])
    est = None
    if any(p.est is not None and not p.exact for p in parts):
        est = block_diag_lattice([p.best for p in parts])
    certs = sorted({p.cert for p in parts})
    return Approx(lo, hi, cert + "(" + ",".join(certs) + ")" if certs else cert, est)


@dataclass(frozen=True)
class Verdict:
    status: str  # Holds | Fails | Unknown
    evidence: dict

    def to_json(self) -> dict:
        return {"status": self.status, "evidence": self.evidence}


# --------------------------------------------------------------------------
# limit support A_inf

_support_cache: dict = {}


def support(t: TowerSpec, n: int) -> Lattice:
    """A_inf at level n: elements that start an infinite chain of bond preimages."""
    key = (t, n)
    if key in _support_cache:
        return _support_cache[key]
    p = len(t.prefix)
    if n < p:
        out = map_image(compose_bond(t, n, p), support(t, p), t.ring)
    else:
        j, tl = n - p, t.tail
        if isinstance(tl, ZeroTail):
            out = Lattice.zero(0)
        elif isinstance(tl, ConstantTail):
            out = eventual_image(tl.bond, t.ring)
        elif isinstance(tl, DirectSum):
            out = block_diag_lattice([support(tl.left, j), support(tl.right, j)])
        elif isinstance(tl, Shift):
            out = support(tl.base, j + tl.k)
        elif isinstance(tl, WedgeDual):
            # a functional on the colimit is a compatible family of arm functionals
            parts = [_wedge_base_support(tl, t.ring)] + [support(tl.arm(k), j - k) for k in tl.present(j)]
            out = map_preimage(wedge_embedding(tl, j), block_diag_lattice(parts), t.ring)
        else:
            # chains in a fishbone project to chains in each rib above its base and in the spine
            if any(not support(tl.rib(k), 1).is_zero() for k in range(len(tl.ribs))) or not support(tl.spine, j).is_zero():
                raise TowerError("fishbone limit support is only derived for reduced spine and ribs")
            out = Lattice.zero(dim(t, n))
    _support_cache[key] = out
    return out


@dataclass(frozen=True)
class DerivedLevels:
    alpha: str
    levels: tuple[Approx, ...]
    relations: tuple[Lattice, ...] = ()

    @property
    def exact(self) -> bool:
        return all(a.exact for a in self.levels)

    def to_json(self) -> dict:
        out = {
            "alpha": self.alpha,
            "levels": [a.to_json() for a in self.levels],
            "exactness": "Exact" if self.exact else f"LowerBoundOnly({len(self.levels) - 1})",
        }
        if self.relations:
            out["relations"] = [r.to_json() for r in self.relations]
        return out


def infinite_chain_support(t: TowerSpec, depth: int = DEFAULT_DEPTH) -> DerivedLevels:
    levels = tuple(Approx.of(support(t, n), "exact-chain-support") for n in range(depth + 1))
    return DerivedLevels("inf", levels)


# --------------------------------------------------------------------------
# derived towers


def stable_from(t: TowerSpec, engine: "Engine") -> Ordinal:
    """An ordinal s such that the levelwise derived lattices agree for all successor indices >= s."""
    tl = t.tail
    if isinstance(tl, (ZeroTail, ConstantTail)):
        base = ONE
    elif isinstance(tl, DirectSum):
        base = max(stable_from(tl.left, engine), stable_from(tl.right, engine))
    elif isinstance(tl, Shift):
        base = stable_from(tl.base, engine)
    elif isinstance(tl, WedgeDual):
        arms = [stable_from(a, engine) for a in tl.arms]
        if any(a is None for a in arms):
            return None
        base = max(arms)
    else:
        rep = engine.straightness(tl)
        base = max([rep.length] + [stable_from(r, engine) for r in tl.ribs]) if rep.straight else None
        if base is None:
            return None
    return base + Ordinal.of(len(t.prefix)) if t.prefix else base


def _window_limit(chain: list[Lattice], w: int, ring: BaseRing) -> tuple[Lattice, str]:
    """Estimate the intersection of a decreasing chain of lattices from its last window."""
    last, prev = chain[-1], chain[-1 - w]
    if last == prev:
        return last, f"window-stable({w})"
    if last.is_zero():
        return last, f"window-stable({w})"
    coords = ExactMatrix(last.rank, prev.rank, tuple(prev.coordinates(b) for b in last.basis))
    s, u, _ = snf(coords)
    moved = u @ last.matrix()
    keep = [moved.rows[i] for i in range(min(s.nrows, s.ncols)) if abs(s.rows[i][i]) == 1]
    return Lattice.span(last.dim, keep, ring), f"window-descending({w})"


class Engine:
    """Memoized derived-level computation.

    route: "auto" uses the fishbone closed form when straightness is verified
    and the truncation route otherwise; "truncation" forces the truncation
    route for every fishbone (used as an independent oracle).
    """

    def __init__(self, *, reduced: bool = False, horizon: int = DEFAULT_HORIZON, route: str = "auto",
                 depth: int = DEFAULT_DEPTH, window: int = WINDOW):
        self.reduced = reduced
        self.horizon = horizon
        self.route = route
        self.depth = depth
        self.window = window
        self._memo: dict = {}
        self._straight: dict = {}
        self._spine_memo: dict = {}

    # relations -----------------------------------------------------------
    def rel(self, t: TowerSpec, n: int) -> Lattice:
        return support(t, n) if self.reduced else Lattice.zero(dim(t, n))

    # public entry points -------------------------------------------------
    def tower_value(self, t: TowerSpec, alpha: Ordinal, n: int) -> Approx:
        """Level n of the alpha-th derived tower, which is A^(n)_{alpha_n}."""
        return self.value(t, fundamental(alpha, n), n)

    def value(self, t: TowerSpec, gamma: Ordinal, n: int) -> Approx:
        if gamma.is_limit():
            raise OrdinalError("levelwise derived lattices are indexed by successors and 0")
        key = (t, gamma, n)
        if key not in self._memo:
            self._memo[key] = self._value(t, gamma, n)
        return self._memo[key]

    # recursion -----------------------------------------------------------
    def _value(self, t: TowerSpec, gamma: Ordinal, n: int) -> Approx:
        d = dim(t, n)
        if gamma.is_zero():
            return Approx.of(Lattice.full(d), "level")
        below = gamma.predecessor()
        if below.is_limit():
            s = stable_from(t, self)
            if s is not None:
                k = 0
                while fundamental(below, k) < s and k <= self.horizon:
                    k += 1
                if fundamental(below, k) >= s:
                    v = self.value(t, fundamental(below, k), n)
                    return Approx(v.lo, v.hi, f"post-limit[{v.cert}]", v.est)
        p = len(t.prefix)
        if n >= p:
            return self._tail_value(t, gamma, n - p)
        return self._prefix_value(t, gamma, n)

    def _prefix_value(self, t: TowerSpec, gamma: Ordinal, n: int) -> Approx:
        p = len(t.prefix)
        ring = t.ring
        rel = self.rel(t, n)
        f = compose_bond(t, n, p)
        at_p = self.value(t, gamma, p)
        lo = map_image(f, at_p.lo, ring) + rel
        below = gamma.predecessor()
        hi = Lattice.full(dim(t, n))
        est = Lattice.full(dim(t, n))
        for k in range(p - n + self.horizon + 1):
            inner = self.value(t, fundamental(below, k), n + k)
            g = compose_bond(t, n, n + k)
            hi = hi & (map_image(g, inner.hi, ring) + rel)
            est = est & (map_image(g, inner.best, ring) + rel)
        if lo == hi:
            return Approx.of(lo, "prefix-sandwich")
        injective = not left_kernel(f.T().rows, f.ncols)
        if at_p.exact and injective:
            return Approx.of(lo, "injective-prefix")
        return Approx(lo, hi, "prefix-bounds", est)

    def _tail_value(self, t: TowerSpec, gamma: Ordinal, j: int) -> Approx:
        tl = t.tail
        if isinstance(tl, ZeroTail):
            return Approx.of(Lattice.zero(0), "zero-tail")
        if isinstance(tl, ConstantTail):
            return Approx.of(eventual_image(tl.bond, t.ring), "eventual-image")
        if isinstance(tl, DirectSum):
            return _block([self.value(tl.left, gamma, j), self.value(tl.right, gamma, j)], "blockwise")
        if isinstance(tl, Shift):
            return self.value(tl.base, gamma, j + tl.k)
        if isinstance(tl, WedgeDual):
            return self._wedge_value(t, tl, gamma, j)
        if self.route != "truncation":
            rep = self.straightness(tl)
            if rep.straight and rep.closed_form_ok:
                return self._fishbone_closed(tl, rep, gamma, j)
        return self._fishbone_truncation(tl, gamma, j)

    # wedges --------------------------------------------------------------
    def _wedge_value(self, t: TowerSpec, w: WedgeDual, gamma: Ordinal, j: int) -> Approx:
        """Bounds from the subtower inclusion into base + arms and from the limit support.

        The level sits inside the direct sum of a constant base and the arms, so
        its derived lattices lie inside the arms' derived lattices; the limit
        support is contained in every derived lattice.
        """
        ring = t.ring
        emb = wedge_embedding(w, j)
        base = Lattice.full(w.base)
        arms = [self.value(w.arm(k), gamma, j - k) for k in w.present(j)]
        hi = map_preimage(emb, block_diag_lattice([base] + [a.hi for a in arms]), ring)
        lo = support(t, j + len(t.prefix))
        if not self.reduced:
            hi = hi + lo
        if lo == hi:
            return Approx.of(lo, "wedge-squeeze")
        est = map_preimage(emb, block_diag_lattice([base] + [a.best for a in arms]), ring) + lo
        return Approx(lo, hi, "wedge-bounds", est)

    # fishbones -----------------------------------------------------------
    def straightness(self, fb: Fishbone) -> "StraightnessReport":
        if fb not in self._straight:
            self._straight[fb] = check_straightness(fb, self.depth, self)
        return self._straight[fb]

    def _fishbone_closed(self, fb: Fishbone, rep: "StraightnessReport", gamma: Ordinal, j: int) -> Approx:
        parts = [self.value(fb.rib(k), gamma, j - k) for k in range(j)]
        m = rep.first_rib_at_least(gamma, j)
        if m is None:
            spine = Lattice.zero(dim(fb.spine, j))
        else:
            spine = map_image(compose_bond(fb.spine, j, m), Lattice.full(dim(fb.spine, m)), fb.spine.ring)
        parts.append(Approx.of(spine, f"spine-image(m={m})"))
        return _block(parts, "fishbone-closed-form")

    def _fishbone_truncation(self, fb: Fishbone, gamma: Ordinal, j: int) -> Approx:
        parts = [self.value(fb.rib(k), gamma, j - k) for k in range(j)]
        est, cert = self._spine_truncation(fb, gamma, j)
        d = dim(fb.spine, j)
        parts.append(Approx(Lattice.zero(d), Lattice.full(d), cert, est) if not (est.is_zero() and d == 0)
                     else Approx.of(est, cert))
        return _block(parts, "fishbone-truncation")

    def _spine_truncation(self, fb: Fishbone, gamma: Ordinal, j: int) -> tuple[Lattice, str]:
        """Spine slot of the derived level, by the block decomposition and a window estimate."""
        key = (fb, gamma, j)
        if key in self._spine_memo:
            return self._spine_memo[key]
        ring = fb.spine.ring
        d = dim(fb.spine, j)
        if gamma.is_zero():
            out = (Lattice.full(d), "level")
        else:
            below = gamma.predecessor()
            chain = []
            cur = Lattice.full(d)
            for k in range(self.horizon + 1):
                delta = fundamental(below, k)
                term = map_image(compose_bond(fb.spine, j, j + k),
                                 self._spine_truncation(fb, delta, j + k)[0], ring)
                for i in range(j, j + k):
                    rib = fb.rib(i)
                    lift = self.value(rib, delta, j + k - i).best
                    g = compose_bond(fb.spine, j, i) @ compose_bond(rib, 0, j + k - i)
                    term = term + map_image(g, lift, ring)
                cur = cur & term
                chain.append(cur)
            out = _window_limit(chain, self.window, ring)
        self._spine_memo[key] = out
        return out


def derived_tower(t: TowerSpec, alpha: Ordinal, depth: int = DEFAULT_DEPTH, *, reduced: bool = False,
                  horizon: int = DEFAULT_HORIZON, engine: Engine | None = None) -> DerivedLevels:
    eng = engine or Engine(reduced=reduced, horizon=horizon, depth=depth)
    levels = tuple(eng.tower_value(t, alpha, n) for n in range(depth + 1))
    rels = tuple(eng.rel(t, n) for n in range(depth + 1)) if eng.reduced else ()
    return DerivedLevels(str(alpha), levels, rels)


# --------------------------------------------------------------------------
# reduction


@dataclass(frozen=True)
class ReducedTower:
    """The quotient A / A_inf, levels given as (ambient dimension, relation lattice)."""

    spec: TowerSpec
    relations: tuple[Lattice, ...]

    def shapes(self):
        return [quotient_shape(Lattice.full(r.dim), r, self.spec.ring) for r in self.relations]

    def is_zero(self) -> bool:
        return all(s.is_zero() for s in self.shapes())

    def induced_bond(self, n: int) -> ExactMatrix:
        return bond(self.spec, n)

    def to_json(self) -> dict:
        return {
            "levels": [{"dim": r.dim, "relations": r.to_json(), "quotient": s.to_json()}
                       for r, s in zip(self.relations, self.shapes())],
            "reduced": True,
        }


def reduce(t: TowerSpec, depth: int = DEFAULT_DEPTH) -> ReducedTower:
    """Quotient by the limit support. Refuses if A_inf is not known exactly (it always is for these tails)."""
    rels = []
    for n in range(depth + 1):
        try:
            rels.append(support(t, n))
        except TowerError as exc:
            raise TowerError(f"cannot reduce: A_inf is not exact at level {n}: {exc}") from exc
    return ReducedTower(t, tuple(rels))


# --------------------------------------------------------------------------
# Mittag-Leffler


def _ml_tail(t: TowerSpec, depth: int) -> Verdict:
    tl = t.tail
    p = len(t.prefix)
    if isinstance(tl, ZeroTail):
        return Verdict("Holds", {"reason": "eventually zero", "level": p})
    if isinstance(tl, ConstantTail):
        m = tl.bond
        d = tl.dim
        stab = map_image(matrix_power(m, d), Lattice.full(d))
        s = eventual_image(m, t.ring)
        ev = {"rational_image_rank": stab.rank, "eventual_image_rank": s.rank, "level": p}
        if stab.rank == s.rank:
            ev["stabilization_index"] = d
            return Verdict("Holds", ev)
        chain = []
        cur = Lattice.full(d)
        for k in range(1, d + 4):
            nxt = map_image(m, cur, t.ring)
            if nxt != cur:
                chain.append(k)
            cur = nxt
        ev["strict_descents_at"] = chain[-3:]
        return Verdict("Fails", ev)
    if isinstance(tl, DirectSum):
        vs = [_ml_tail(tl.left, depth), _ml_tail(tl.right, depth)]
        for v in vs:
            if v.status == "Fails":
                ev = dict(v.evidence)
                ev["level"] = ev.get("level", 0) + p
                return Verdict("Fails", ev)
        if all(v.status == "Holds" for v in vs):
            return Verdict("Holds", {"blocks": [v.evidence for v in vs], "level": p})
        return Verdict("Unknown", {"depth": depth})
    if isinstance(tl, Shift):
        v = _ml_tail(tl.base, depth)
        ev = dict(v.evidence)
        ev["level"] = max(0, ev.get("level", 0) - tl.k) + p
        return Verdict(v.status, ev)
    if isinstance(tl, WedgeDual):
        v = _ml_wedge(TowerSpec(t.ring, (), tl), depth)
        ev = dict(v.evidence)
        ev["level"] = ev.get("level", 0) + p
        return Verdict(v.status, ev)
    # fishbone: record the image indices observed at the base of the tail
    idx = []
    base = p
    for k in range(1, depth + 1):
        img = map_image(compose_bond(t, base, base + k), Lattice.full(dim(t, base + k)), t.ring)
        sh = quotient_shape(Lattice.full(dim(t, base)), img, t.ring)
        idx.append(sh.to_json())
    return Verdict("Unknown", {"depth": depth, "observed_image_quotients": idx[-3:]})


def _injective_bonds(t: TowerSpec) -> bool:
    """Whether t has constant rank and every bond is injective (decided for constant tails only)."""
    if not isinstance(t.tail, ConstantTail):
        return False
    d = t.tail.dim
    if any(lv.dim != d for lv in t.prefix):
        return False
    bonds = [t.tail.bond] + [lv.bond for lv in t.prefix]
    return all(not left_kernel(b.T().rows, b.ncols) for b in bonds)


def _ml_wedge(t: TowerSpec, depth: int, horizon: int = DEFAULT_HORIZON) -> Verdict:
    """ML for a wedge tail, decided level by level.

    Mittag-Leffler forces A_1 = A_inf, and then the images at level n must
    reach A_inf at a finite stage. A failure is certified by a subtower with
    injective bonds (functionals vanishing on the base and supported on the
    arms present at level n) that meets the exact A_1 trivially.
    """
    w = t.tail
    eng = Engine(horizon=horizon, depth=depth)
    stable = {}
    for n in range(depth + 1):
        sup = support(t, n)
        a1 = eng.value(t, ONE, n)
        if a1.exact and a1.lo != sup:
            return Verdict("Fails", {"level": n, "reason": "A_1 strictly contains A_inf"})
        found = None
        if a1.hi == sup:
            for m in range(n, n + horizon + 1):
                img = map_image(compose_bond(t, n, m), Lattice.full(dim(t, m)), t.ring)
                if img == sup:
                    found = m
                    break
        if found is not None:
            stable[str(n)] = found
            continue
        arms_ok = all(_injective_bonds(w.arm(k)) for k in w.present(n))
        emb = wedge_embedding(w, n)
        parts = [Lattice.zero(w.base)] + [Lattice.full(dim(w.arm(k), n - k)) for k in w.present(n)]
        sub = map_preimage(emb, block_diag_lattice(parts), t.ring)
        if arms_ok and not sub.is_zero() and (sub & a1.hi).is_zero():
            return Verdict("Fails", {"level": n, "reason": "injective subtower meets A_1 trivially",
                                     "subtower_rank": sub.rank})
        return Verdict("Unknown", {"level": n, "horizon": horizon})
    return Verdict("Holds", {"stable_at": stable, "checked_to": depth})


def mittag_leffler(t: TowerSpec, depth: int = DEFAULT_DEPTH) -> Verdict:
    """Whether the images of higher levels stabilize at every level (equivalently lim^1 = 0 here)."""
    v = _ml_tail(t, depth)
    ev = dict(v.evidence)
    ev["lim1_trivial"] = {"Holds": True, "Fails": False}.get(v.status)
    return Verdict(v.status, ev)


# --------------------------------------------------------------------------
# essential monomorphy and lengths


def _kernel_meets_image(t: TowerSpec, eng: Engine, alpha: Ordinal, n: int, m: int, big: int) -> bool:
    """Whether ker(p^(n,m)) meets p^(m,big)(A_alpha^(big)) only inside the relations at level m."""
    ring = t.ring
    lat_m = eng.tower_value(t, alpha, m).best
    lat_big = eng.tower_value(t, alpha, big).best
    rel_m = eng.rel(t, m)
    ker = map_preimage(compose_bond(t, n, m), eng.rel(t, n), ring) & lat_m
    img = map_image(compose_bond(t, m, big), lat_big, ring) + rel_m
    return (ker & img) <= rel_m


def essentially_monomorphic(t: TowerSpec, depth: int = DEFAULT_DEPTH, *, alpha: Ordinal = ZERO,
                            reduced: bool = True, engine: Engine | None = None, window: int = 6) -> Verdict:
    """Search level pairs (m, M) making the composed bonds injective on forwarded images."""
    eng = engine or Engine(reduced=reduced, depth=depth)
    witnesses = {}
    for n in range(depth + 1):
        found = None
        for m in range(n + 1, n + window + 1):
            for big in range(m, m + window + 1):
                if _kernel_meets_image(t, eng, alpha, n, m, big):
                    found = (m, big)
                    break
            if found:
                break
        if found is None:
            return Verdict("Fails", {"level": n, "obstruction_persists_to": n + 2 * window, "alpha": str(alpha)})
        witnesses[n] = found
    seq = [0]
    while True:
        m, big = witnesses[seq[-1]]
        nxt = max(m, big) if len(seq) == 1 else max(m, big, witnesses[seq[-2]][1])
        if nxt > depth:
            break
        seq.append(nxt)
    return Verdict("Holds", {"subsequence": seq, "alpha": str(alpha), "depth": depth,
                             "pairs": {str(k): list(v) for k, v in witnesses.items()}})


@dataclass(frozen=True)
class LengthReport:
    length: Ordinal
    at_least: bool
    plain: str  # yes | no | unknown
    certificate: dict

    def to_json(self) -> dict:
        return {
            "length": ("AtLeast(" + str(self.length) + ")") if self.at_least else str(self.length),
            "plain": self.plain,
            "certificate": self.certificate,
        }


def _pro_zero(t: TowerSpec, eng: Engine, alpha: Ordinal, depth: int) -> tuple[str, dict]:
    """'zero' with killing indices, 'persists' with a surviving level, or 'unknown'."""
    kills = {}
    persisting = None
    undecided = False
    ring = t.ring
    for n in range(depth + 1):
        rel = eng.rel(t, n)
        killed = None
        alive = True
        for k in range(eng.horizon + 1):
            v = eng.tower_value(t, alpha, n + k)
            g = compose_bond(t, n, n + k)
            if (map_image(g, v.hi, ring) + rel) <= rel:
                killed = k
                break
            if (map_image(g, v.lo, ring) + rel) <= rel:
                alive = False
        if killed is not None:
            kills[str(n)] = killed
        elif alive:
            persisting = persisting if persisting is not None else n
        else:
            undecided = True
    if len(kills) == depth + 1:
        return "zero", {"killed_after": kills}
    if persisting is not None:
        return "persists", {"level": persisting, "horizon": eng.horizon}
    return "unknown", {"undecided": undecided}


def ml_length(t: TowerSpec, max_alpha: Ordinal, depth: int = DEFAULT_DEPTH, *,
              horizon: int = DEFAULT_HORIZON, engine: Engine | None = None) -> LengthReport:
    """Least alpha with A_alpha pro-zero for the reduced tower, with the plain flag."""
    eng = engine or Engine(reduced=True, horizon=horizon, depth=depth)
    cap = max([4] + [c for _, c in max_alpha.terms])
    evidence = {"reduced_first": True, "depth": depth, "horizon": eng.horizon, "tested": {}}
    for alpha in ordinals_up_to(max_alpha, cap):
        state, ev = _pro_zero(t, eng, alpha, depth)
        evidence["tested"][str(alpha)] = {"state": state, **ev}
        if state == "zero":
            plain = "no"
            if alpha.is_successor():
                mono = essentially_monomorphic(t, depth, alpha=alpha.predecessor(), engine=eng)
                plain = {"Holds": "yes", "Fails": "no"}.get(mono.status, "unknown")
                evidence["plain_check"] = mono.to_json()
            return LengthReport(alpha, False, plain, evidence)
        if state == "unknown":
            return LengthReport(alpha, True, "unknown", evidence)
    return LengthReport(max_alpha + ONE, True, "unknown", evidence)


# --------------------------------------------------------------------------
# fishbones


@dataclass(frozen=True)
class StraightnessReport:
    straight: bool
    betas: tuple[Ordinal, ...]  # plain lengths of the ribs in the cycle
    length: Ordinal | None
    offending: tuple[int, int] | None
    checked_to: int
    spine_ok: bool
    closed_form_ok: bool
    same_level_form_ok: bool
    notes: tuple[str, ...] = ()

    def first_rib_at_least(self, gamma: Ordinal, j: int) -> int | None:
        """min{i >= j : beta[i] >= gamma} for the cyclic rib list."""
        c = len(self.betas)
        for i in range(j, j + c):
            if self.betas[i % c] >= gamma:
                return i
        return None

    def to_json(self) -> dict:
        return {
            "straight": self.straight,
            "betas": [str(b) for b in self.betas],
            "sup_beta": str(max(self.betas)) if self.betas else None,
            "length": str(self.length) if self.length is not None else None,
            "offending": list(self.offending) if self.offending else None,
            "checked_to": self.checked_to,
            "spine_ok": self.spine_ok,
            "closed_form_ok": self.closed_form_ok,
            "same_level_form_ok": self.same_level_form_ok,
            "notes": list(self.notes),
        }


RIB_LENGTH_CAP = Ordinal.omega_power(1, 2)


def check_straightness(fb: Fishbone, depth: int, eng: Engine | None = None) -> StraightnessReport:
    """Verify the straightness sum condition level by level, in the form used by the fishbone tower.

    For rib k and tower level N >= k the rib sits at its own level N-k; the
    condition checked is p^(0,N-k)(B[k]_{beta[k]-1}^(N-k)) + p^(k,N)(A^(N)) = A^(k).
    The same condition with rib and spine both at level N is recorded as same_level_form_ok.
    """
    notes = []
    inner = Engine(reduced=True, depth=depth, horizon=eng.horizon if eng else DEFAULT_HORIZON,
                   route=eng.route if eng else "auto")
    spine = fb.spine
    spine_ok = all(support(spine, n).is_zero() for n in range(depth + 1))
    mono = essentially_monomorphic(spine, depth, engine=inner)
    nontrivial = _pro_zero(spine, inner, ZERO, depth)[0] != "zero"
    spine_ok = spine_ok and mono.status == "Holds" and nontrivial
    if not spine_ok:
        notes.append("spine is not a nontrivial reduced essentially monomorphic tower")
    a1_zero = all(inner.value(spine, ONE, n).exact and inner.value(spine, ONE, n).lo.is_zero()
                  for n in range(depth + 1))
    if not a1_zero:
        notes.append("spine has nonzero first derived levels; closed form disabled")
    betas = []
    for rib in fb.ribs:
        if not all(support(rib, n).is_zero() for n in range(depth + 1)):
            notes.append("a rib is not reduced")
            return StraightnessReport(False, (), None, None, depth, spine_ok, False, False, tuple(notes))
        rep = ml_length(rib, RIB_LENGTH_CAP, depth, engine=Engine(reduced=True, depth=depth,
                                                                   horizon=inner.horizon, route=inner.route))
        if rep.at_least or rep.plain != "yes":
            notes.append(f"rib plain length undetermined ({rep.to_json()['length']}, plain={rep.plain})")
            return StraightnessReport(False, tuple(betas), None, None, depth, spine_ok, False, False, tuple(notes))
        betas.append(rep.length)
    length = max(betas) + ONE
    offending = None
    same_level_ok = True
    full_k = {}
    for k in range(depth + 1):
        rib = fb.rib(k)
        beta_k = betas[k % len(betas)]
        target = Lattice.full(dim(spine, k))
        for big in range(k, k + depth + 1):
            lvl = big - k
            rib_part = map_image(compose_bond(rib, 0, lvl), inner.tower_value(rib, beta_k.predecessor(), lvl).best,
                                 spine.ring)
            spine_part = map_image(compose_bond(spine, k, big), Lattice.full(dim(spine, big)), spine.ring)
            if rib_part + spine_part != target and offending is None:
                offending = (k, big)
            rib_same = map_image(compose_bond(rib, 0, big), inner.tower_value(rib, beta_k.predecessor(), big).best,
                                 spine.ring)
            if rib_same + spine_part != target:
                same_level_ok = False
        full_k[k] = True
    straight = offending is None and spine_ok
    return StraightnessReport(straight, tuple(betas), length, offending, depth, spine_ok,
                              straight and a1_zero, same_level_ok, tuple(notes))


def fishbone_build(spine: TowerSpec, ribs, check_straight: bool = True,
                   depth: int = 8) -> tuple[TowerSpec, StraightnessReport | None]:
    ribs = tuple(ribs)
    try:
        spec = TowerSpec(spine.ring, (), Fishbone(spine, ribs))
    except TowerError as exc:
        raise TowerError(f"gluing mismatch: {exc}") from exc
    if not check_straight:
        return spec, None
    rep = check_straightness(spec.tail, depth)
    if not rep.spine_ok:
        raise TowerError("spine must be a nontrivial reduced essentially monomorphic tower")
    return spec, rep


@dataclass(frozen=True)
class FishboneVerifyReport:
    length: Ordinal
    rows: tuple[dict, ...]

    @property
    def all_match(self) -> bool:
        return all(r["match"] for r in self.rows)

    def to_json(self) -> dict:
        return {"length": str(self.length), "all_match": self.all_match, "checks": list(self.rows)}


def fishbone_verify(spec: TowerSpec, depth: int = 8, horizon: int = 12) -> FishboneVerifyReport:
    """Compare the closed form against truncation-computed derived levels at each (beta, n)."""
    if not isinstance(spec.tail, Fishbone) or spec.prefix:
        raise TowerError("fishbone_verify needs a fishbone tower")
    closed = Engine(reduced=True, depth=depth, horizon=horizon)
    rep = closed.straightness(spec.tail)
    if not rep.closed_form_ok:
        raise TowerError("straightness is not verified: " + "; ".join(rep.notes or ("sum condition fails",)))
    trunc = Engine(reduced=True, depth=depth, horizon=horizon, route="truncation")
    rows = []
    for beta in ordinals_up_to(rep.length, 4):
        if beta >= rep.length:
            continue
        for n in range(depth + 1):
            a = closed.tower_value(spec, beta, n)
            b = trunc.tower_value(spec, beta, n)
            rows.append({"beta": str(beta), "n": n, "match": a.best == b.best,
                         "closed_form": a.best.to_json(), "truncation_cert": b.cert})
    return FishboneVerifyReport(rep.length, tuple(rows))


# --------------------------------------------------------------------------
# the kernel towers A_alpha[l]


def lim1_kernel_identity(t: TowerSpec, ell: int, alpha: Ordinal, depth: int = 10, *,
                         engine: Engine | None = None) -> dict:
    """Finite-depth check of the kernel-tower description of A_{alpha+1} at level ell.

    With Ran_i = p^(ell,i)(A_alpha^(i)) and A_alpha^(i)[ell] its kernel, checks
    that A_{alpha+1}^(ell) lies in every Ran_i, that the kernels form a
    subtower with rank(kernel) + rank(Ran_i) = rank(A_alpha^(i)), and that each
    generator x of A_{alpha+1}^(ell) has lifts c_i whose defects
    c_i - p(c_{i+1}) lie in the kernel tower.
    """
    eng = engine or Engine(reduced=False, depth=depth)
    ring = t.ring
    top = eng.tower_value(t, alpha + ONE, ell)
    failures = []
    lifts_ok = True
    levels = list(range(ell, ell + depth + 1))
    lat = {i: eng.tower_value(t, alpha, i).best for i in levels}
    kern = {i: map_preimage(compose_bond(t, ell, i), Lattice.zero(dim(t, ell)), ring) & lat[i] for i in levels}
    for i in levels:
        ran = map_image(compose_bond(t, ell, i), lat[i], ring)
        if not top.best <= ran:
            failures.append({"level": i, "reason": "A_{alpha+1} not inside Ran"})
        if kern[i].rank + ran.rank != lat[i].rank:
            failures.append({"level": i, "reason": "rank identity"})
        if i + 1 in kern and not map_image(bond(t, i), kern[i + 1], ring) <= kern[i]:
            failures.append({"level": i, "reason": "kernel towers are not a subtower"})
    for x in top.best.basis:
        cs = {}
        for i in levels:
            c = map_solve(compose_bond(t, ell, i), lat[i], x)
            if c is None:
                lifts_ok = False
                failures.append({"level": i, "reason": "no lift"})
                break
            cs[i] = c
        for i in levels[:-1]:
            if i in cs and i + 1 in cs:
                defect = tuple(a - b for a, b in zip(cs[i], bond(t, i).apply(cs[i + 1])))
                if not kern[i].contains(defect):
                    lifts_ok = False
                    failures.append({"level": i, "reason": "defect outside the kernel tower"})
    return {
        "holds": not failures,
        "ell": ell,
        "alpha": str(alpha),
        "depth": depth,
        "next_level": top.best.to_json(),
        "lifts_ok": lifts_ok,
        "failures": failures,
    }
