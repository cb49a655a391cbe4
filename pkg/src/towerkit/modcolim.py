"""Countable flat modules presented as colimits of finite free stages, and their Ext(-, R) invariants.

A module C = colim C_n is given by a finite list of explicit stages (rank r_n
and an injective transition C_n -> C_{n+1}, an r_{n+1} x r_n matrix acting on
column vectors) followed by a tail describing the remaining stages. The
dual tower Hom(C_n, R) has the transposed transitions as bonds; Ext(C, R)
is read off from it.

Xi(tau) is built from finitely many p-adic digits of tau. Past the last
digit the stream continues with p^(N+1) times a fixed quadratic irrational,
which gives a constant transition and keeps tau irrational. Every Xi
certificate therefore holds for the given digits "to stage N".
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import isqrt
from typing import Sequence, Union

from . import towers
from .exactlin import (
    ZZ,
    BaseRing,
    ExactMatrix,
    Lattice,
    _is_prime,
    det,
    left_kernel,
    saturate,
)
from .ordinals import FUNDAMENTAL_RULE_ID, ONE, ZERO, Ordinal, OrdinalError, minus_one_k, parse
from .towers import (
    DEFAULT_DEPTH,
    DEFAULT_HORIZON,
    ConstantTail,
    DirectSum,
    Level,
    LengthReport,
    TowerSpec,
    Verdict,
    WedgeDual,
)


class ColimError(ValueError):
    pass


# --------------------------------------------------------------------------
# colimit specifications


@dataclass(frozen=True)
class Stage:
    rank: int
    transition: ExactMatrix  # rank(n+1) x rank(n)


@dataclass(frozen=True)
class ConstantPattern:
    rank: int
    transition: ExactMatrix

    def __post_init__(self):
        if self.transition.shape != (self.rank, self.rank):
            raise ColimError(f"constant transition has shape {self.transition.shape}, expected {(self.rank,) * 2}")


@dataclass(frozen=True)
class PAdicDigits:
    """Base-p digits d_0, d_1, ... of a p-adic integer tau; tau_n = sum_{i<=n} d_i p^i."""

    p: int
    digits: tuple[int, ...]
    unit_mod_p: bool = True

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ColimError(f"{self.p} is not a prime")
        if not self.digits:
            raise ColimError("at least one digit is needed")
        for d in self.digits:
            if not 0 <= d < self.p:
                raise ColimError(f"digit {d} outside [0, {self.p})")
        if self.unit_mod_p and self.digits[0] != 1:
            raise ColimError("tau is flagged as 1 mod p but its first digit is not 1")

    @classmethod
    def from_truncations(cls, p: int, truncs: Sequence[int], unit_mod_p: bool = True) -> "PAdicDigits":
        digits = []
        prev = 0
        for n, t in enumerate(truncs):
            if not 0 <= t < p ** (n + 1):
                raise ColimError(f"tau_{n} = {t} is outside [0, p^{n + 1})")
            if (t - prev) % p ** n:
                raise ColimError(f"tau_{n} is not congruent to tau_{n - 1} mod p^{n}")
            digits.append((t - prev) // p ** n)
            prev = t
        return cls(p, tuple(digits), unit_mod_p)

    @classmethod
    def seeded(cls, p: int, count: int, seed: int) -> "PAdicDigits":
        rng = random.Random(seed)
        return cls(p, (1,) + tuple(rng.randrange(p) for _ in range(count - 1)), True)

    def truncation(self, n: int) -> int:
        return sum(d * self.p ** i for i, d in enumerate(self.digits[: n + 1]))

    def to_json(self) -> dict:
        return {"p": self.p, "digits": list(self.digits), "unit_mod_p": self.unit_mod_p}

    @classmethod
    def from_json(cls, doc: dict) -> "PAdicDigits":
        return cls(int(doc["p"]), tuple(int(d) for d in doc["digits"]), bool(doc.get("unit_mod_p", True)))


def xi_completion(p: int) -> tuple[int, int]:
    """(a, b) with x^2 - a x - b irreducible over Q, p not dividing a, p dividing b.

    Its root w with w = 0 mod p is the quadratic irrational appended after the
    last given digit.
    """
    t = 1
    while True:
        disc = 1 + 4 * p * t
        if isqrt(disc) ** 2 != disc:
            return 1, p * t
        t += 1


@dataclass(frozen=True)
class XiTail:
    """Stages beta^-k O of the quadratic completion, O = Z_(p)[w] with basis (1, w), beta = w - a."""

    digits: PAdicDigits
    a: int
    b: int

    @property
    def transition(self) -> ExactMatrix:
        return ExactMatrix.of([[-self.a, self.b], [1, 0]])


@dataclass(frozen=True)
class WedgeTail:
    """Wedge sum of arms along psi_k: M1 -> arm_k stage 0, with psi_k = scale^k psi[k % len(psi)]."""

    base: int
    arms: tuple["ColimSpec", ...]
    psi: tuple[ExactMatrix, ...]  # rank(arm, 0) x base
    scale: int = 1
    cyclic: bool = True


@dataclass(frozen=True)
class SumTail:
    left: "ColimSpec"
    right: "ColimSpec"


ColimTail = Union[ConstantPattern, XiTail, WedgeTail, SumTail]


@dataclass(frozen=True)
class ColimSpec:
    ring: BaseRing
    stages: tuple[Stage, ...]
    tail: ColimTail
    origin: str = "json"
    _hash: int = field(default=0, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.ring, self.stages, self.tail)))
        tail0 = towers.tail_dim(_dual_tail(self.tail, self.ring), 0)
        for i, st in enumerate(self.stages):
            nxt = self.stages[i + 1].rank if i + 1 < len(self.stages) else tail0
            if st.transition.shape != (nxt, st.rank):
                raise ColimError(f"transition at stage {i} has shape {st.transition.shape}, expected {(nxt, st.rank)}")
            if left_kernel(st.transition.T().rows, st.rank):
                raise ColimError(f"transition at stage {i} is not injective")
        if isinstance(self.tail, ConstantPattern) and left_kernel(self.tail.transition.T().rows, self.tail.rank):
            raise ColimError("constant transition is not injective")

    def __hash__(self):
        return self._hash

    def rank(self, n: int) -> int:
        return towers.dim(dual_tower(self), n)

    def transition(self, n: int) -> ExactMatrix:
        """C_n -> C_{n+1}, the transpose of the dual bond."""
        return towers.bond(dual_tower(self), n).T()

    def compose(self, n: int, m: int) -> ExactMatrix:
        """C_n -> C_m for n <= m."""
        return towers.compose_bond(dual_tower(self), n, m).T()

    def is_pure(self, n: int) -> bool:
        """Whether C_n is a pure submodule of C_{n+1}."""
        t = self.transition(n)
        img = Lattice.span(t.nrows, t.T().rows, self.ring)
        return img == saturate(img, self.ring)

    def purity(self, depth: int) -> tuple[bool, ...]:
        return tuple(self.is_pure(n) for n in range(depth + 1))

    def to_json(self) -> dict:
        return {
            "ring": self.ring.to_json(),
            "prefix": [{"dim": st.rank, "transition": st.transition.to_json()} for st in self.stages],
            "tail": _tail_json(self.tail),
            "origin": self.origin,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ColimSpec":
        ring = BaseRing.from_json(doc.get("ring"))
        tail = _tail_from_json(doc["tail"], ring)
        tail0 = towers.tail_dim(_dual_tail(tail, ring), 0)
        raw = doc.get("prefix", [])
        stages = []
        for i, st in enumerate(raw):
            nxt = int(raw[i + 1]["dim"]) if i + 1 < len(raw) else tail0
            r = int(st["dim"])
            stages.append(Stage(r, ExactMatrix.from_json(st["transition"], r)))
        return cls(ring, tuple(stages), tail, str(doc.get("origin", "json")))


def _tail_json(t: ColimTail) -> dict:
    if isinstance(t, ConstantPattern):
        return {"kind": "constant", "dim": t.rank, "transition": t.transition.to_json()}
    if isinstance(t, XiTail):
        return {"kind": "xi", "digits": t.digits.to_json(), "a": t.a, "b": t.b}
    if isinstance(t, WedgeTail):
        return {"kind": "wedge", "base": t.base, "arms": [a.to_json() for a in t.arms],
                "psi": [m.to_json() for m in t.psi], "scale": t.scale, "cyclic": t.cyclic}
    return {"kind": "sum", "left": t.left.to_json(), "right": t.right.to_json()}


def _tail_from_json(doc: dict, ring: BaseRing) -> ColimTail:
    kind = doc.get("kind")
    if kind == "constant":
        r = int(doc["dim"])
        return ConstantPattern(r, ExactMatrix.from_json(doc["transition"], r))
    if kind == "xi":
        d = PAdicDigits.from_json(doc["digits"])
        a, b = (int(doc["a"]), int(doc["b"])) if "a" in doc else xi_completion(d.p)
        return XiTail(d, a, b)
    if kind == "wedge":
        base = int(doc["base"])
        arms = tuple(ColimSpec.from_json(a) for a in doc["arms"])
        psi = tuple(ExactMatrix.from_json(m, base) for m in doc["psi"])
        return WedgeTail(base, arms, psi, int(doc.get("scale", 1)), bool(doc.get("cyclic", True)))
    if kind == "sum":
        return SumTail(ColimSpec.from_json(doc["left"]), ColimSpec.from_json(doc["right"]))
    raise ColimError(f"unknown tail kind {kind!r}")


# --------------------------------------------------------------------------
# dual towers


def _dual_tail(t: ColimTail, ring: BaseRing) -> towers.Tail:
    if isinstance(t, ConstantPattern):
        return ConstantTail(t.rank, t.transition.T())
    if isinstance(t, XiTail):
        return ConstantTail(2, t.transition.T())
    if isinstance(t, WedgeTail):
        return WedgeDual(t.base, tuple(dual_tower(a) for a in t.arms), tuple(m.T() for m in t.psi),
                         t.scale, t.cyclic)
    return DirectSum(dual_tower(t.left), dual_tower(t.right))


@lru_cache(maxsize=None)
def dual_tower(c: ColimSpec) -> TowerSpec:
    """Hom(C_n, R) with restriction along the transitions as bonds."""
    levels = tuple(Level(st.rank, st.transition.T()) for st in c.stages)
    return TowerSpec(c.ring, levels, _dual_tail(c.tail, c.ring))


def colim_from_dual(t: TowerSpec, origin: str = "dual") -> ColimSpec:
    """The colimit whose dual tower is t (constant and sum tails only)."""
    stages = tuple(Stage(lv.dim, lv.bond.T()) for lv in t.prefix)
    tl = t.tail
    if isinstance(tl, ConstantTail):
        tail = ConstantPattern(tl.dim, tl.bond.T())
    elif isinstance(tl, DirectSum):
        tail = SumTail(colim_from_dual(tl.left), colim_from_dual(tl.right))
    else:
        raise ColimError("only constant and sum tails can be transposed back")
    return ColimSpec(t.ring, stages, tail, origin)


# --------------------------------------------------------------------------
# constructors


def constant(transition: ExactMatrix, ring: BaseRing = ZZ, stages: Sequence[Stage] = ()) -> ColimSpec:
    return ColimSpec(ring, tuple(stages), ConstantPattern(transition.nrows, transition), "constant")


def localization(p: int, ring: BaseRing = ZZ) -> ColimSpec:
    """Z[1/p] as the colimit of Z -p-> Z -p-> ..."""
    return constant(ExactMatrix.of([[p]]), ring)


def free_module(rank: int, ring: BaseRing = ZZ) -> ColimSpec:
    return constant(ExactMatrix.identity(rank), ring)


def split_inclusions(ring: BaseRing = ZZ) -> ColimSpec:
    """R^(omega) as the colimit of the coordinate inclusions R^n -> R^(n+1)."""
    return wedge_sum(0, [free_module(1, ring)], [ExactMatrix.zeros(1, 0)])


def direct_sum(left: ColimSpec, right: ColimSpec) -> ColimSpec:
    if left.ring != right.ring:
        raise ColimError("summands must share the base ring")
    return ColimSpec(left.ring, (), SumTail(left, right), "sum")


def wedge_sum(m1_rank: int, arms: Sequence[ColimSpec], psi: Sequence[ExactMatrix], *,
              scale: int = 1, cyclic: bool = True) -> ColimSpec:
    """Wedge of the arms over M1 = R^m1_rank along injective psi_k: M1 -> arm_k stage 0.

    Stage n is (M1 + arm_0 stage n + ... + arm_n stage 0) modulo the pure hull of
    the relations (y, -psi_k y), one set per arm; arm k enters at stage k. With cyclic=False only the
    listed arms are used.
    """
    arms, psi = tuple(arms), tuple(psi)
    if not arms or len(arms) != len(psi):
        raise ColimError("a wedge needs one map psi_k per arm")
    if scale == 0:
        raise ColimError("scale must be nonzero")
    ring = arms[0].ring
    for a, m in zip(arms, psi):
        if a.ring != ring:
            raise ColimError("arms must share the base ring")
        if m.shape != (a.rank(0), m1_rank):
            raise ColimError(f"psi has shape {m.shape}, expected {(a.rank(0), m1_rank)}")
        if m1_rank and left_kernel(m.T().rows, m1_rank):
            raise ColimError("psi is not injective")
    return ColimSpec(ring, (), WedgeTail(m1_rank, arms, psi, scale, cyclic), "wedge")


def glue_purity(c: ColimSpec) -> tuple[bool, ...]:
    """For a wedge: whether each psi_k has pure image (then M1 is pure in the wedge)."""
    if not isinstance(c.tail, WedgeTail):
        raise ColimError("not a wedge")
    out = []
    for a, m in zip(c.tail.arms, c.tail.psi):
        img = Lattice.span(m.nrows, m.T().rows, c.ring)
        pure = img == saturate(img, c.ring)
        if c.tail.scale != 1 and not c.ring.is_unit(c.tail.scale) and c.tail.cyclic and c.tail.base:
            pure = False
        out.append(pure)
    return tuple(out)


def base_embedding(c: ColimSpec) -> ExactMatrix:
    """For a wedge: M1 -> stage 0, x -> (phi -> phi(x)) over the basis of the dual level."""
    if not isinstance(c.tail, WedgeTail) or c.stages:
        raise ColimError("base_embedding needs a wedge without explicit stages")
    w = dual_tower(c).tail
    emb = towers.wedge_embedding(w, 0)
    rows = emb.rows[: w.base]
    return ExactMatrix(len(rows), emb.ncols, rows).T() if rows else ExactMatrix.zeros(emb.ncols, 0)


# --------------------------------------------------------------------------
# Xi(tau)


def xi_module(d: PAdicDigits, n_stages: int) -> ColimSpec:
    """Xi(tau) on stages with basis (f, g_n), using tau_0 .. tau_N with N = n_stages.

    Transition n: (a, b) -> (a + b c_n p, b p) where tau_{n+1} = tau_n + c_n p^(n+1).
    Stage N+1 starts the quadratic completion (c_N = 0).
    """
    if n_stages < 0 or n_stages >= len(d.digits):
        raise ColimError(f"{n_stages} stages need {n_stages + 1} digits, {len(d.digits)} given")
    p = d.p
    stages = []
    for n in range(n_stages + 1):
        c = d.digits[n + 1] if n < n_stages else 0
        stages.append(Stage(2, ExactMatrix.of([[1, c * p], [0, p]])))
    a, b = xi_completion(p)
    return ColimSpec(BaseRing.local(p), tuple(stages), XiTail(d, a, b), "xi")


def _xi_data(c: ColimSpec) -> tuple[PAdicDigits, int]:
    if not isinstance(c.tail, XiTail):
        raise ColimError("not a Xi module")
    return c.tail.digits, len(c.stages) - 1


def xi_e(c: ColimSpec, n: int) -> tuple[int, int]:
    """Coordinates of e at stage n: (tau_n, p^n) up to N+1, then carried by the tail transition."""
    d, big = _xi_data(c)
    p = d.p
    if n <= big:
        return d.truncation(n), p ** n
    v = (d.truncation(big), p ** (big + 1))
    for _ in range(n - big - 1):
        v = c.tail.transition.apply(v)
    return v


@dataclass(frozen=True)
class XiReport:
    relation_ok: bool
    transitions_ok: bool
    well_pointed: bool
    checked_to: int
    witness: int | None

    def to_json(self) -> dict:
        return {"relation_e": self.relation_ok, "transitions_in_Q2": self.transitions_ok,
                "well_pointed": self.well_pointed, "to_stage": self.checked_to, "witness_stage": self.witness}


def xi_check(c: ColimSpec, extra: int = 4) -> XiReport:
    """The bookkeeping identities and the well-pointedness of e through the given digits.

    relation: e = p^n g_n + tau_n f in the (f, g_n) coordinates, carried along
    the transitions. transitions: p g_(n+1) = g_n - c_n p f inside Q^2, with
    e = (1, 0) and f = (0, 1). well-pointed: e/p lies in no stage.
    """
    d, big = _xi_data(c)
    p = d.p
    rel = all(c.transition(n).apply(xi_e(c, n)) == tuple(xi_e(c, n + 1)) for n in range(big + 1 + extra))

    def g(n):
        return (Fraction(1, p ** n), Fraction(-d.truncation(n), p ** n))

    trans = True
    for n in range(big):
        cn = d.digits[n + 1]
        lhs = tuple(p * x for x in g(n + 1))
        rhs = (g(n)[0], g(n)[1] - cn * p)
        trans = trans and lhs == rhs
    witness = None
    for n in range(big + 2 + extra):
        if all(x % p == 0 for x in xi_e(c, n)):
            witness = n
            break
    return XiReport(rel, trans, witness is None, big + 1 + extra, witness)


# --------------------------------------------------------------------------
# Ext(-, R) invariants


def is_projective(c: ColimSpec, depth: int = DEFAULT_DEPTH) -> Verdict:
    """Ext(C, R) = 0, i.e. the dual tower is Mittag-Leffler."""
    v = towers.mittag_leffler(dual_tower(c), depth)
    return Verdict(v.status, {**v.evidence, "via": "dual tower Mittag-Leffler"})


def coreduced_check(c: ColimSpec, depth: int = DEFAULT_DEPTH) -> Verdict:
    """Hom(C, R) = 0, read off the limit support of the dual tower."""
    t = dual_tower(c)
    for n in range(depth + 1):
        s = towers.support(t, n)
        if not s.is_zero():
            return Verdict("Fails", {"level": n, "functionals": s.to_json()})
    ev = {"checked_to": depth, "certificate": "exact limit support is zero"}
    if isinstance(c.tail, XiTail) or _has_xi(c):
        ev["to_stage"] = _xi_stage_count(c)
    return Verdict("Holds", ev)


def _has_xi(c: ColimSpec) -> bool:
    t = c.tail
    if isinstance(t, XiTail):
        return True
    if isinstance(t, WedgeTail):
        return any(_has_xi(a) for a in t.arms)
    if isinstance(t, SumTail):
        return _has_xi(t.left) or _has_xi(t.right)
    return False


def _xi_stage_count(c: ColimSpec) -> int | None:
    t = c.tail
    if isinstance(t, XiTail):
        return len(c.stages) - 1
    kids = []
    if isinstance(t, WedgeTail):
        kids = list(t.arms)
    elif isinstance(t, SumTail):
        kids = [t.left, t.right]
    vals = [v for v in (_xi_stage_count(k) for k in kids) if v is not None]
    return min(vals) if vals else None


@dataclass(frozen=True)
class ExtReport:
    r_projective_length: Ordinal
    at_least: bool
    plain: str
    coreduced: str
    projective: str
    dual: LengthReport
    depth: int
    horizon: int
    ring: str
    to_stage: int | None = None

    def to_json(self) -> dict:
        out = {
            "r_projective_length": ("AtLeast(" + str(self.r_projective_length) + ")") if self.at_least
            else str(self.r_projective_length),
            "plain": self.plain,
            "coreduced": self.coreduced,
            "projective": self.projective,
            "dual_length": self.dual.to_json(),
            "depth": self.depth,
            "horizon": self.horizon,
            "ring": self.ring,
            "rule": FUNDAMENTAL_RULE_ID,
        }
        if self.to_stage is not None:
            out["to_stage"] = self.to_stage
        return out


def r_projective_length(c: ColimSpec, max_alpha: Ordinal, depth: int = DEFAULT_DEPTH, *,
                        horizon: int = DEFAULT_HORIZON) -> ExtReport:
    """The Mittag-Leffler length of the reduced dual tower, with projectivity and coreducedness."""
    t = dual_tower(c)
    rep = towers.ml_length(t, max_alpha, depth, horizon=horizon)
    proj = is_projective(c, depth).status
    if proj == "Unknown" and not rep.at_least:
        # A_0 of the reduced dual is pro-zero exactly when the dual tower is Mittag-Leffler
        proj = "Holds" if rep.length == ZERO else "Fails"
    core = coreduced_check(c, depth).status
    if proj == "Holds" and not (rep.length == ZERO and not rep.at_least):
        raise ColimError("projective module with nonzero dual length: the two routes disagree")
    if proj == "Fails" and rep.length == ZERO and not rep.at_least:
        raise ColimError("non-projective module with zero dual length: the two routes disagree")
    return ExtReport(rep.length, rep.at_least, rep.plain, core, proj, rep, depth, horizon, str(c.ring),
                     _xi_stage_count(c))


# --------------------------------------------------------------------------
# sigma_alpha and the quotient d_alpha


@dataclass(frozen=True)
class SigmaReport:
    alpha: Ordinal
    sigma: tuple[Lattice, ...]  # sigma_alpha C intersected with C_n
    partial: ColimSpec  # d_alpha C on the compared stages
    consistent: str  # yes | no | unknown
    exact: bool
    evidence: dict

    def to_json(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "sigma": [s.to_json() for s in self.sigma],
            "partial_ranks": [st.rank for st in self.partial.stages],
            "consistent": self.consistent,
            "exact": self.exact,
            "evidence": self.evidence,
            "rule": FUNDAMENTAL_RULE_ID,
        }


def sigma_partial(c: ColimSpec, alpha: Ordinal, depth: int = 10, *,
                  horizon: int = DEFAULT_HORIZON) -> SigmaReport:
    """sigma_alpha C as common kernels of the alpha-th derived dual tower, and d_alpha C = C / sigma_alpha C.

    Stage n of d_alpha C is C_n modulo the common kernel of D_alpha^(n); its
    dual is the saturation of D_alpha^(n), which is compared with D_alpha^(n).
    """
    if coreduced_check(c, depth + 1).status != "Holds":
        raise ColimError("sigma_partial needs a coreduced module")
    t = dual_tower(c)
    dt = towers.derived_tower(t, alpha, depth + 1, reduced=True, horizon=horizon)
    sigma, duals, stages = [], [], []
    for n in range(depth + 2):
        lat = dt.levels[n].best
        r = c.rank(n)
        ker = left_kernel(lat.matrix().T().rows, r) if lat.rank else list(ExactMatrix.identity(r).rows)
        sigma.append(Lattice.span(r, ker, c.ring))
        duals.append(saturate(lat))
    for n in range(depth + 1):
        lo, hi = duals[n], duals[n + 1]
        tn = c.transition(n)
        cols = []
        for row in hi.basis:
            pulled = tn.T().apply(row)
            coords = lo.coordinates(pulled)
            if coords is None:
                raise ColimError(f"derived dual level {n + 1} does not restrict into level {n}")
            cols.append(coords)
        u = ExactMatrix(len(cols), lo.rank, tuple(cols)) if cols else ExactMatrix.zeros(0, lo.rank)
        stages.append(Stage(lo.rank, u))
    last = duals[depth + 1].rank
    stages_t = tuple(stages)
    try:
        partial = ColimSpec(c.ring, stages_t, ConstantPattern(last, ExactMatrix.identity(last)), "partial")
        injective = True
    except ColimError:
        partial = ColimSpec(c.ring, (), ConstantPattern(0, ExactMatrix.identity(0)), "partial")
        injective = False
    saturated = all(duals[n] == dt.levels[n].best for n in range(depth + 1))
    # the dual of d_alpha C embedded in Hom(C_n, R) is the saturated derived level
    if not dt.exact:
        consistent = "unknown"
    else:
        consistent = "yes" if (saturated and injective) else "no"
    ev = {"depth": depth, "horizon": horizon, "derived": dt.to_json()["exactness"],
          "saturated": saturated, "injective_transitions": injective}
    return SigmaReport(alpha, tuple(sigma[: depth + 1]), partial, consistent, dt.exact, ev)


def partial_dual_matches(rep: SigmaReport, c: ColimSpec, depth: int) -> bool:
    """Levelwise comparison: the reduced dual tower of d_alpha C against D_alpha, through the quotient maps."""
    if rep.partial.origin != "partial" or len(rep.partial.stages) < depth + 1:
        return False
    dt = towers.derived_tower(dual_tower(c), rep.alpha, depth, reduced=True)
    q = dual_tower(rep.partial)
    for n in range(depth + 1):
        target = dt.levels[n].best
        basis = saturate(target)
        # functionals on stage n of d_alpha C, pulled back to C_n
        pulled = Lattice.span(c.rank(n), basis.basis, c.ring) if basis.rank else Lattice.zero(c.rank(n))
        if towers.dim(q, n) != basis.rank or pulled != target:
            return False
        if n < depth:
            # bond of the quotient dual equals the restriction of the derived dual
            b = towers.bond(q, n)
            up = saturate(dt.levels[n + 1].best)
            for j, row in enumerate(up.basis):
                image = c.transition(n).T().apply(row)
                coords = basis.coordinates(image)
                if coords is None or tuple(b.T().rows[j]) != coords:
                    return False
    return True


# --------------------------------------------------------------------------
# phantom resolutions and tree length


@dataclass(frozen=True)
class ResolutionReport:
    alpha: Ordinal
    modules: tuple[ColimSpec, ...]  # P_n^alpha C for n = 0 .. levels-1
    pure: tuple[str, ...]
    tree_bound: Ordinal
    breadth: int
    depth: int

    def to_json(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "ranks": [[m.rank(j) for j in range(min(self.depth, 4) + 1)] for m in self.modules],
            "pure": list(self.pure),
            "plain_tree_length_bound": str(self.tree_bound),
            "breadth": self.breadth,
            "depth": self.depth,
            "rule": FUNDAMENTAL_RULE_ID,
        }


def _stage_module(c: ColimSpec, n: int) -> ColimSpec:
    r = c.rank(n)
    return ColimSpec(c.ring, (), ConstantPattern(r, ExactMatrix.identity(r)), "finite")


def _into_stage0(m: ColimSpec) -> ExactMatrix:
    """How the finite module a resolution term is built over sits in its stage 0."""
    if isinstance(m.tail, WedgeTail):
        return base_embedding(m)
    return ExactMatrix.identity(m.rank(0))


def resolution_term(c: ColimSpec, alpha: Ordinal, n: int, breadth: int) -> ColimSpec:
    """P_n^alpha C truncated to `breadth` arms per wedge."""
    if alpha.is_zero():
        return _stage_module(c, n)
    if not alpha.is_successor():
        raise OrdinalError("P_n^alpha is defined for successor alpha and 0")
    arms, psi = [], []
    for k in range(n, n + breadth):
        arm = resolution_term(c, minus_one_k(alpha, k), k, breadth)
        arms.append(arm)
        psi.append(_into_stage0(arm) @ c.compose(n, k))
    w = wedge_sum(c.rank(n), arms, psi, cyclic=False)
    return ColimSpec(w.ring, w.stages, w.tail, f"resolution:{alpha}")


def phantom_resolution(c: ColimSpec, alpha: Ordinal, breadth: int = 3, depth: int = 6,
                       levels: int = 3) -> ResolutionReport:
    """Truncated P_n^alpha C for n < levels, with a purity check of C_n inside on stages <= depth."""
    mods, pure = [], []
    for n in range(levels):
        m = resolution_term(c, alpha, n, breadth)
        mods.append(m)
        if alpha.is_zero():
            pure.append("Holds")
            continue
        emb = _into_stage0(m)
        ok = True
        for j in range(depth + 1):
            f = m.compose(0, j) @ emb
            img = Lattice.span(f.nrows, f.T().rows, c.ring)
            if img != saturate(img, c.ring):
                ok = False
                pure.append(f"Fails(stage {j})")
                break
        if ok:
            pure.append("Holds")
    return ResolutionReport(alpha, tuple(mods), tuple(pure), alpha, breadth, depth)


def tree_length_certificate(c: ColimSpec) -> Ordinal:
    """Plain tree length bound read off the construction.

    Finitely generated: 0. Finite rank (constant tails, Xi): 1. A wedge of
    arms with bounds b: max(b) + 1 (+1 more when max(b) is a limit). Sums: max.
    """
    if c.origin == "partial":
        raise ColimError("this presentation is a truncation and has no construction tree")
    if c.origin.startswith("resolution:"):
        return parse(c.origin.split(":", 1)[1])
    t = c.tail
    if isinstance(t, ConstantPattern):
        return ZERO if c.ring.is_unit(det(t.transition) if t.rank else 1) else ONE
    if isinstance(t, XiTail):
        return ONE
    if isinstance(t, SumTail):
        return max(tree_length_certificate(t.left), tree_length_certificate(t.right))
    top = max(tree_length_certificate(a) for a in t.arms)
    return top + ONE + ONE if top.is_limit() else top + ONE



def gap_module(d: PAdicDigits, n_stages: int) -> ColimSpec:
    """The wedge of copies of Xi(tau) over R along e, p e, p^2 e, ...

    Coreduced of projective length 1 whose dual tower is not essentially
    monomorphic: length 1 without being plain.
    """
    xi = xi_module(d, n_stages)
    e0 = xi_e(xi, 0)
    w = wedge_sum(1, [xi], [ExactMatrix.of([[e0[0]], [e0[1]]])], scale=d.p)
    return ColimSpec(w.ring, w.stages, w.tail, "gap")
