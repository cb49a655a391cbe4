"""Deterministic verification suites; each returns a JSON-ready summary with per-check evidence."""
from __future__ import annotations

import random
from math import gcd, prod

from . import modcolim as mc
from . import towers as tw
from .exactlin import (
    ZZ,
    BaseRing,
    ExactMatrix,
    Lattice,
    block_diag_lattice,
    det,
    eventual_image,
    hnf,
    image_chain,
    is_stable_onto,
    snf,
)
from .ordinals import (
    FUNDAMENTAL_RULE_ID,
    OMEGA,
    ONE,
    ZERO,
    Ordinal,
    compare,
    format_ordinal,
    fundamental,
    parse,
)
from .trees import FiniteTree, IndexTree, game_ranks, linearize, rank_finite, rank_index_tree

SUITES = ("linalg", "ordinals", "trees", "towers", "fishbone", "ext", "xi", "sigma")


class Suite:
    def __init__(self, name: str, seed: int, depth: int):
        self.name = name
        self.seed = seed
        self.depth = depth
        self.checks: list[dict] = []

    def check(self, name: str, ok: bool, **evidence):
        self.checks.append({"name": name, "pass": bool(ok), "evidence": evidence})
        return ok

    def summary(self, ring: str = "Z", **config) -> dict:
        failed = [c["name"] for c in self.checks if not c["pass"]]
        return {
            "suite": self.name,
            "ring": ring,
            "seed": self.seed,
            "depth": self.depth,
            "rule": FUNDAMENTAL_RULE_ID,
            "config": config,
            "total": len(self.checks),
            "failed": failed,
            "passed": not failed,
            "checks": self.checks,
        }


# --------------------------------------------------------------------------
# linalg


def is_canonical_hnf(h: ExactMatrix) -> bool:
    """Row echelon form, positive pivots, entries above each pivot reduced into [0, pivot)."""
    last = -1
    seen_zero = False
    for i, row in enumerate(h.rows):
        nz = [j for j, x in enumerate(row) if x]
        if not nz:
            seen_zero = True
            continue
        if seen_zero:
            return False
        j = nz[0]
        if j <= last or row[j] <= 0:
            return False
        for k in range(i):
            if not 0 <= h.rows[k][j] < row[j]:
                return False
        last = j
    return True


def _random_matrix(rng: random.Random, max_dim: int = 6, bound: int = 99) -> ExactMatrix:
    r, c = rng.randint(1, max_dim), rng.randint(1, max_dim)
    return ExactMatrix.of([[rng.randint(-bound, bound) for _ in range(c)] for _ in range(r)], c)


def _unimodular(rng: random.Random, n: int, steps: int = 6) -> tuple[ExactMatrix, ExactMatrix]:
    """A random product of elementary matrices and its inverse."""
    u, v = ExactMatrix.identity(n), ExactMatrix.identity(n)
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.randint(-2, 2)
        e = [[int(a == b) for b in range(n)] for a in range(n)]
        f = [row[:] for row in e]
        e[i][j], f[i][j] = c, -c
        u, v = ExactMatrix.of(e) @ u, v @ ExactMatrix.of(f)
    return u, v


def stabilizing_matrix(rng: random.Random, n: int = 3) -> ExactMatrix:
    """Conjugate of [[A, C], [0, N]] with det A = +-1 and N nilpotent, so the image chain stabilizes."""
    k = rng.randint(0, n)
    top, _ = _unimodular(rng, k, 3) if k > 1 else (ExactMatrix.diag([rng.choice([1, -1])] * k), None)
    rows = [[0] * n for _ in range(n)]
    for i in range(k):
        for j in range(k):
            rows[i][j] = top.rows[i][j]
        for j in range(k, n):
            rows[i][j] = rng.randint(-3, 3)
    for i in range(k, n):
        for j in range(i + 1, n):
            rows[i][j] = rng.randint(-3, 3)
    u, v = _unimodular(rng, n)
    return u @ ExactMatrix.of(rows) @ v


def suite_linalg(seed: int, depth: int, count: int = 1000, chains: int = 200) -> dict:
    s = Suite("linalg", seed, depth)
    rng = random.Random(seed)
    bad_hnf, bad_snf = [], []
    for i in range(count):
        m = _random_matrix(rng)
        h, u = hnf(m)
        if not (abs(det(u)) == 1 and u @ m == h and is_canonical_hnf(h)):
            bad_hnf.append(i)
        d, uu, vv = snf(m)
        diag = [d.rows[k][k] for k in range(min(d.nrows, d.ncols))]
        nz = [x for x in diag if x]
        ok = abs(det(uu)) == 1 and abs(det(vv)) == 1 and uu @ m @ vv == d
        ok = ok and all(d.rows[a][b] == 0 for a in range(d.nrows) for b in range(d.ncols) if a != b)
        ok = ok and all(x > 0 for x in nz) and all(nz[k + 1] % nz[k] == 0 for k in range(len(nz) - 1))
        ok = ok and diag[: len(nz)] == nz
        entries = [x for row in m.rows for x in row]
        g = 0
        for x in entries:
            g = gcd(g, x)
        ok = ok and (nz[0] if nz else 0) == g
        if m.nrows == m.ncols and det(m):
            ok = ok and prod(nz) == abs(det(m))
        if not ok:
            bad_snf.append(i)
    s.check("hnf", not bad_hnf, samples=count, failures=bad_hnf[:10])
    s.check("snf", not bad_snf, samples=count, failures=bad_snf[:10])

    bad, used = [], 0
    tries = 0
    while used < chains and tries < 20 * chains:
        tries += 1
        m = stabilizing_matrix(rng) if tries % 2 else ExactMatrix.of(
            [[rng.randint(-9, 9) for _ in range(3)] for _ in range(3)], 3)
        chain = image_chain(m, 40)
        if chain[39] != chain[40]:
            continue
        used += 1
        ev = eventual_image(m)
        if ev != chain[40] or not is_stable_onto(m, ev):
            bad.append(m.to_json())
    s.check("eventual_image_vs_chain", not bad and used == chains, samples=used, failures=bad[:5])
    d21 = eventual_image(ExactMatrix.diag([2, 1]))
    s.check("eventual_image_diag_2_1", d21 == Lattice.span(2, [(0, 1)]), result=d21.to_json())
    return s.summary(count=count, chains=chains)


# --------------------------------------------------------------------------
# ordinals


def _random_ordinal(rng: random.Random) -> Ordinal:
    terms = []
    for e in sorted(rng.sample(range(0, 5), rng.randint(0, 3)), reverse=True):
        terms.append((e, rng.randint(1, 4)))
    text = " + ".join(("w^%d*%d" % t) if t[0] else str(t[1]) for t in terms) or "0"
    return parse(text)


def suite_ordinals(seed: int, depth: int, count: int = 300) -> dict:
    s = Suite("ordinals", seed, depth)
    rng = random.Random(seed)
    samples = [_random_ordinal(rng) for _ in range(count)]
    s.check("format_parse_roundtrip", all(parse(format_ordinal(a)) == a for a in samples), samples=count)
    trich = all(
        (compare(a, b) == 0) == (a == b) and compare(a, b) == -compare(b, a)
        for a, b in zip(samples, samples[1:])
    )
    s.check("compare_antisymmetric", trich, samples=count - 1)
    fund_ok = []
    for a in samples:
        if a.is_limit():
            seq = [fundamental(a, n) for n in range(depth)]
            ok = all(x < a for x in seq) and all(x < y for x, y in zip(seq, seq[1:]))
        else:
            ok = all(fundamental(a, n) == a for n in range(3))
        fund_ok.append(ok)
    s.check("fundamental_sequences", all(fund_ok), samples=count, terms=depth)
    s.check("fundamental_w2_2", str(fundamental(parse("w^2"), 2)) == "w*3+1",
            result=str(fundamental(parse("w^2"), 2)))
    succ = all(a.successor().predecessor() == a for a in samples)
    s.check("successor_predecessor", succ, samples=count)
    return s.summary(count=count)


# --------------------------------------------------------------------------
# trees


def random_tree(rng: random.Random, max_nodes: int = 200) -> FiniteTree:
    target = rng.randint(1, max_nodes)
    nodes = [()]
    seen = {()}
    while len(nodes) < target:
        parent = rng.choice(nodes)
        if len(parent) >= 12:
            continue
        child = parent + (rng.randint(0, 3),)
        if child not in seen:
            seen.add(child)
            nodes.append(child)
    return FiniteTree.of(nodes)


def suite_trees(seed: int, depth: int, count: int = 100, max_alpha: int = 10) -> dict:
    s = Suite("trees", seed, depth)
    expect = {"1": "1", "2": "2", "3": "3", "w+1": "w+1"}
    got = {a: str(rank_index_tree(IndexTree(parse(a)))) for a in expect}
    s.check("index_tree_ranks", got == expect, ranks=got)
    i2 = IndexTree(parse("2"))
    labels = {str(list(v)): str(linearize(i2, v)) for v in i2.materialize(5)}
    ok = labels["[]"] == "w" and all(labels[str([n])] == str(n + 1) for n in range(5))
    s.check("linearize_plain_2", ok, labels=labels)
    i3 = IndexTree(parse("3"))
    term = [v for v in i3.materialize(4) if i3.is_terminal(v)]
    lab = {str(list(v)): str(linearize(i3, v)) for v in term}
    s.check("terminal_nodes_successor_labels", bool(term) and all(linearize(i3, v).is_successor() for v in term),
            labels=lab)
    rng = random.Random(seed)
    mismatches, above = [], []
    for i in range(count):
        t = random_tree(rng)
        rho_t = rank_finite(t)
        rho_g = game_ranks(t).rho
        if rho_g > rho_t:
            above.append({"tree": i, "tree_rank": rho_t, "game_rank": rho_g})
        for a in range(max_alpha + 1):
            if (rho_g <= a) != (rho_t <= a):
                mismatches.append({"tree": i, "nodes": len(t.nodes), "tree_rank": rho_t, "game_rank": rho_g,
                                   "alpha": a})
                break
    s.check("game_rank_vs_tree_rank", not mismatches, samples=count, max_alpha=max_alpha,
            mismatching_trees=len(mismatches), first=mismatches[:5])
    s.check("game_rank_at_most_tree_rank", not above, samples=count, violations=above[:5])
    return s.summary(count=count, max_alpha=max_alpha)


# --------------------------------------------------------------------------
# towers


def times(p: int, ring: BaseRing = ZZ) -> tw.TowerSpec:
    return tw.TowerSpec.constant(ExactMatrix.of([[p]]), ring)


def sample_towers() -> dict[str, tw.TowerSpec]:
    return {
        "x2": times(2),
        "x3": times(3),
        "id": times(1),
        "diag21": tw.TowerSpec.constant(ExactMatrix.diag([2, 1])),
        "jordan2": tw.TowerSpec.constant(ExactMatrix.of([[2, 1], [0, 2]])),
        "prefix_x2": tw.TowerSpec(ZZ, (tw.Level(2, ExactMatrix.of([[1], [0]])),), tw.ConstantTail(1, ExactMatrix.of([[2]]))),
    }


def suite_towers(seed: int, depth: int) -> dict:
    s = Suite("towers", seed, depth)
    xp = times(2)
    ml = tw.mittag_leffler(xp, depth)
    s.check("xp_not_mittag_leffler", ml.status == "Fails" and bool(ml.evidence), verdict=ml.to_json())
    rep = tw.ml_length(xp, OMEGA, depth)
    s.check("xp_length_1_plain", rep.length == ONE and not rep.at_least and rep.plain == "yes",
            report=rep.to_json())
    red = tw.reduce(times(1), depth)
    s.check("reduce_identity_zero", red.is_zero(), reduced=red.to_json())
    fam = sample_towers()
    names = sorted(fam)
    pairs = [(a, b) for i, a in enumerate(names) for b in names[i:]]
    rng = random.Random(seed)
    rng.shuffle(pairs)
    bad = []
    for a, b in pairs[:8]:
        ab = tw.TowerSpec.direct_sum(fam[a], fam[b])
        for alpha in (ONE, parse("2"), OMEGA, parse("w+1")):
            da = tw.derived_tower(fam[a], alpha, depth)
            db = tw.derived_tower(fam[b], alpha, depth)
            dab = tw.derived_tower(ab, alpha, depth)
            for n in range(depth + 1):
                want = block_diag_lattice([da.levels[n].best, db.levels[n].best])
                if not (dab.exact and da.exact and db.exact and dab.levels[n].best == want):
                    bad.append({"pair": [a, b], "alpha": str(alpha), "level": n})
                    break
    s.check("direct_sum_additivity", not bad, pairs=[list(p) for p in pairs[:8]], failures=bad[:5])
    return s.summary()


# --------------------------------------------------------------------------
# fishbones


def sample_fishbones(depth: int = 8) -> dict[str, tw.TowerSpec]:
    """Straight fishbones of length 2 (x2 spine, x5 rib) and 3 (nesting a length-2 fishbone as a rib)."""
    f2, _ = tw.fishbone_build(times(2), [times(5)], depth=depth)
    inner, _ = tw.fishbone_build(times(3), [times(5)], depth=depth)
    f3, _ = tw.fishbone_build(times(2), [times(5), inner], depth=depth)
    return {"length2": f2, "length3": f3}


def suite_fishbone(seed: int, depth: int, alpha: Ordinal = parse("3"), horizon: int = 12) -> dict:
    s = Suite("fishbone", seed, depth)
    fbs = sample_fishbones(depth)
    for name, spec in fbs.items():
        rep = tw.check_straightness(spec.tail, depth)
        if rep.length is not None and alpha < rep.length:
            continue
        v = tw.fishbone_verify(spec, depth=depth, horizon=horizon)
        bad = [{"beta": r["beta"], "n": r["n"]} for r in v.rows if not r["match"]]
        s.check(f"closed_form_{name}", v.all_match and rep.straight, length=str(v.length),
                compared=len(v.rows), mismatches=bad[:5], straightness=rep.to_json())
        rl = tw.ml_length(spec, parse("5"), depth, horizon=horizon)
        s.check(f"plain_length_{name}", rl.length == v.length and rl.plain == "yes" and not rl.at_least,
                length=rl.to_json()["length"], plain=rl.plain)
    return s.summary(alpha=str(alpha), horizon=horizon)


# --------------------------------------------------------------------------
# Ext invariants


def _digits(p: int, count: int, seed: int) -> mc.PAdicDigits:
    return mc.PAdicDigits.seeded(p, count, seed)


def suite_ext(seed: int, depth: int, p: int = 2, horizon: int = 16, digits: int = 64) -> dict:
    s = Suite("ext", seed, depth)
    zp = mc.localization(p)
    rep = mc.r_projective_length(zp, OMEGA, depth, horizon=horizon)
    s.check("localization_not_projective", mc.is_projective(zp, depth).status == "Fails",
            verdict=mc.is_projective(zp, depth).to_json())
    s.check("localization_plain_length_1", rep.r_projective_length == ONE and not rep.at_least and rep.plain == "yes",
            report=rep.to_json())
    fr = mc.split_inclusions()
    v = mc.is_projective(fr, depth)
    s.check("split_inclusions_projective", v.status == "Holds", verdict=v.to_json())
    d = _digits(p, digits, seed)
    xi = mc.xi_module(d, digits - 1)
    xr = mc.r_projective_length(xi, OMEGA, depth, horizon=horizon)
    xc = mc.xi_check(xi)
    s.check("xi_coreduced", xr.coreduced == "Holds", report=xr.to_json())
    s.check("xi_plain_length_1", xr.r_projective_length == ONE and not xr.at_least and xr.plain == "yes",
            length=str(xr.r_projective_length), plain=xr.plain)
    s.check("xi_well_pointed", xc.well_pointed, check=xc.to_json(), digits=d.to_json())
    g = mc.gap_module(d, digits - 1)
    cert = mc.tree_length_certificate(g)
    gr = mc.r_projective_length(g, OMEGA, depth, horizon=horizon)
    s.check("gap_tree_length_2", cert == parse("2"), certificate=str(cert))
    s.check("gap_projective_length_1", gr.r_projective_length == ONE and not gr.at_least, report=gr.to_json())
    s.check("gap_not_plain", gr.plain == "no", plain=gr.plain,
            evidence=gr.dual.certificate.get("plain_check"))
    return s.summary(ring=f"Z, {xi.ring}", p=p, horizon=horizon, digits=digits)


def suite_xi(seed: int, depth: int, horizon: int = 12) -> dict:
    s = Suite("xi", seed, depth)
    rng = random.Random(seed)
    for p in (2, 3, 5):
        n = rng.randint(8, 24)
        d = _digits(p, n, rng.randrange(10 ** 6))
        x = mc.xi_module(d, n - 1)
        rep = mc.xi_check(x)
        s.check(f"p{p}_relations", rep.relation_ok and rep.transitions_ok, check=rep.to_json())
        s.check(f"p{p}_well_pointed", rep.well_pointed, check=rep.to_json())
        dual = mc.dual_tower(x)
        bonds_ok = all(
            tw.bond(dual, k) == ExactMatrix.of([[1, 0], [d.digits[k + 1] * p, p]]) for k in range(n - 1)
        )
        s.check(f"p{p}_dual_bonds", bonds_ok, digits=d.to_json())
        r = mc.r_projective_length(x, OMEGA, depth, horizon=horizon)
        s.check(f"p{p}_coreduced_plain_1", r.coreduced == "Holds" and r.r_projective_length == ONE
                and r.plain == "yes" and not r.at_least, report=r.to_json())
    return s.summary(ring="Z_(2), Z_(3), Z_(5)", horizon=horizon)


def sigma_family(seed: int, p: int = 2, digits: int = 24) -> dict[str, mc.ColimSpec]:
    d = _digits(p, digits, seed)
    xi = mc.xi_module(d, digits - 1)
    gap = mc.gap_module(d, digits - 1)
    return {
        "zero": mc.free_module(0),
        "localization": mc.localization(p),
        "xi": xi,
        "gap": gap,
        "localization_plus_gap": mc.direct_sum(mc.localization(p, gap.ring), gap),
    }


def suite_sigma(seed: int, depth: int, p: int = 2) -> dict:
    s = Suite("sigma", seed, depth)
    for name, c in sigma_family(seed, p).items():
        rep = mc.sigma_partial(c, ONE, depth)
        match = mc.partial_dual_matches(rep, c, depth)
        s.check(f"{name}_partial_1", rep.consistent == "yes" and match, report=rep.to_json(), levelwise=match)
        if name == "xi":
            zero = all(st.rank == 0 for st in rep.partial.stages)
            s.check("xi_partial_1_is_zero", zero, ranks=[st.rank for st in rep.partial.stages])
        rep0 = mc.sigma_partial(c, ZERO, min(depth, 4))
        same = all(rep0.partial.stages[n].rank == c.rank(n) for n in range(min(depth, 4) + 1))
        s.check(f"{name}_partial_0_identity", same and rep0.consistent == "yes",
                ranks=[st.rank for st in rep0.partial.stages])
    return s.summary(ring=f"Z, Z_({p})", p=p)


def run_suite(name: str, seed: int = 1, depth: int | None = None, alpha: Ordinal | None = None) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {', '.join(SUITES)}")
    defaults = {"linalg": 0, "ordinals": 8, "trees": 0, "towers": 12, "fishbone": 8, "ext": 10, "xi": 8,
                "sigma": 10}
    depth = defaults[name] if depth is None else depth
    if name == "fishbone":
        return suite_fishbone(seed, depth, alpha or parse("3"))
    return globals()[f"suite_{name}"](seed, depth)
