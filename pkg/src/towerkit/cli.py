"""Command-line front end: `towerkit <group> <command> [input] [options]`.

Inputs are JSON documents given as a path, inline text starting with `{` or
`[`, or `-` for stdin. Output is JSON with --json (or TOWERKIT_FORMAT=json),
otherwise a plain table on a terminal.

Exit codes: 0 success, 1 failed verify suite, 2 unparsable input, 3 violated
precondition, 4 Unknown verdict under --require-exact.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import modcolim as mc
from . import towers as tw
from . import verify
from .exactlin import (
    BaseRing,
    DimensionError,
    ExactMatrix,
    Lattice,
    eventual_image,
    hnf,
    lattice_intersection,
    lattice_sum,
    saturate,
    snf,
)
from .ordinals import FUNDAMENTAL_RULE_ID, OrdinalError, compare, fundamental, parse
from .trees import FiniteTree, IndexTree, game_ranks, linearize, rank_finite, rank_index_tree

FORMAT_ENV = "TOWERKIT_FORMAT"


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# input helpers


def load_doc(src: str | None):
    if src is None:
        raise InputError("an input document is required")
    try:
        if src == "-":
            return json.load(sys.stdin)
        if src.lstrip().startswith(("{", "[")):
            return json.loads(src)
        with open(src, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from exc


def parse_with(fn, *args):
    try:
        return fn(*args)
    except (tw.TowerError, mc.ColimError):
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"{type(exc).__name__}: {exc}") from exc


def _matrix(doc) -> ExactMatrix:
    if isinstance(doc, dict) and "matrix" in doc:
        doc = doc["matrix"]
    return ExactMatrix.from_json(doc)


def _ring(doc) -> BaseRing:
    return BaseRing.from_json(doc.get("ring") if isinstance(doc, dict) else None)


def _lattice(doc, ring: BaseRing) -> Lattice:
    return Lattice.from_json(doc, ring)


def _ordinal(text: str):
    try:
        return parse(text)
    except OrdinalError as exc:
        raise InputError(str(exc)) from exc


# --------------------------------------------------------------------------
# handlers: each returns (report, unknown)


def cmd_lin(args):
    doc = load_doc(args.input)
    op = args.op
    if op in ("hnf", "snf"):
        m = parse_with(_matrix, doc)
        if op == "hnf":
            h, u = hnf(m)
            return {"h": h.to_json(), "u": u.to_json()}, False
        s, u, v = snf(m)
        return {"s": s.to_json(), "u": u.to_json(), "v": v.to_json()}, False
    ring = parse_with(_ring, doc)
    if op in ("meet", "join"):
        a = parse_with(_lattice, doc.get("a"), ring)
        b = parse_with(_lattice, doc.get("b"), ring)
        out = lattice_intersection(a, b, ring) if op == "meet" else lattice_sum(a, b, ring)
        return {"lattice": out.to_json(), "ring": str(ring)}, False
    if op == "saturate":
        lat = parse_with(_lattice, doc.get("lattice", doc), ring)
        return {"lattice": saturate(lat, ring).to_json(), "ring": str(ring)}, False
    m = parse_with(_matrix, doc)
    return {"eventual_image": eventual_image(m, ring).to_json(), "ring": str(ring)}, False


def cmd_ord(args):
    if args.op == "fundamental":
        a = _ordinal(args.a)
        try:
            n = int(args.b)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        return {"alpha": str(a), "n": n, "result": str(fundamental(a, n)), "rule": FUNDAMENTAL_RULE_ID}, False
    a, b = _ordinal(args.a), _ordinal(args.b)
    return {"a": str(a), "b": str(b), "compare": compare(a, b)}, False


def cmd_tree(args):
    if args.op in ("rank", "game"):
        t = parse_with(FiniteTree.from_json, load_doc(args.input))
        if args.op == "rank":
            return {"rank": rank_finite(t), "nodes": len(t.nodes)}, False
        g = game_ranks(t)
        return {"game_rank": g.rho, "tree_rank": rank_finite(t), "nodes": len(t.nodes)}, False
    alpha = _ordinal(args.alpha)
    t = IndexTree(alpha, plain=not args.forest)
    if args.op == "index":
        nodes = t.materialize(args.breadth, args.max_nodes)
        return {"alpha": str(alpha), "plain": t.plain, "rank": str(rank_index_tree(t)),
                "nodes": {str(list(v)): t.label(v) for v in nodes}, "breadth": args.breadth}, False
    nodes = t.materialize(args.breadth, args.max_nodes)
    return {"alpha": str(alpha), "labels": {str(list(v)): str(linearize(t, v)) for v in nodes},
            "breadth": args.breadth}, False


def _tower(args) -> tw.TowerSpec:
    return parse_with(tw.TowerSpec.from_json, load_doc(args.input))


def cmd_tower(args):
    op = args.op
    if op == "fishbone-build":
        doc = load_doc(args.input)
        spine = parse_with(tw.TowerSpec.from_json, doc.get("spine", {}))
        ribs = [parse_with(tw.TowerSpec.from_json, r) for r in doc.get("ribs", [])]
        spec, rep = tw.fishbone_build(spine, ribs, not args.no_check, args.depth)
        return {"tower": spec.to_json(), "straightness": rep.to_json() if rep else None}, \
            bool(rep and not rep.straight)
    t = _tower(args)
    if op == "derive":
        d = tw.derived_tower(t, _ordinal(args.alpha), args.depth, reduced=args.reduced, horizon=args.horizon)
        return d.to_json(), not d.exact
    if op == "length":
        r = tw.ml_length(t, _ordinal(args.max_alpha), args.depth, horizon=args.horizon)
        return r.to_json(), r.at_least or r.plain == "unknown"
    if op == "ml":
        v = tw.mittag_leffler(t, args.depth)
        return v.to_json(), v.status == "Unknown"
    if op == "fishbone-verify":
        r = tw.fishbone_verify(t, args.depth, args.horizon)
        return r.to_json(), False
    r = tw.reduce(t, args.depth)
    return r.to_json(), False


def _colim(args) -> mc.ColimSpec:
    return parse_with(mc.ColimSpec.from_json, load_doc(args.input))


def _digits(args) -> mc.PAdicDigits:
    if args.digits:
        ds = tuple(int(x) for x in args.digits.split(","))
        return parse_with(mc.PAdicDigits, args.p, ds, True)
    return mc.PAdicDigits.seeded(args.p, args.count, args.seed)


def cmd_mod(args):
    op = args.op
    alpha = _ordinal(args.alpha)
    if op == "xi":
        d = _digits(args)
        c = mc.xi_module(d, len(d.digits) - 1)
        chk = mc.xi_check(c)
        rep = mc.r_projective_length(c, _ordinal(args.max_alpha), args.depth, horizon=args.horizon)
        return {"digits": d.to_json(), "check": chk.to_json(), "ext": rep.to_json(),
                "module": c.to_json() if args.emit else None}, rep.at_least or rep.plain == "unknown"
    if op == "wedge":
        if args.input is None:
            d = _digits(args)
            c = mc.gap_module(d, len(d.digits) - 1)
        else:
            doc = load_doc(args.input)
            arms = [parse_with(mc.ColimSpec.from_json, a) for a in doc.get("arms", [])]
            base = int(doc.get("base", 0))
            psi = [parse_with(ExactMatrix.from_json, m, base) for m in doc.get("psi", [])]
            c = mc.wedge_sum(base, arms, psi, scale=int(doc.get("scale", 1)), cyclic=bool(doc.get("cyclic", True)))
        rep = mc.r_projective_length(c, _ordinal(args.max_alpha), args.depth, horizon=args.horizon)
        return {"tree_length_bound": str(mc.tree_length_certificate(c)), "glue_pure": list(mc.glue_purity(c)),
                "ext": rep.to_json(), "module": c.to_json() if args.emit else None}, \
            rep.at_least or rep.plain == "unknown"
    c = _colim(args)
    if op == "dual":
        return mc.dual_tower(c).to_json(), False
    if op == "projective":
        v = mc.is_projective(c, args.depth)
        return v.to_json(), v.status == "Unknown"
    if op == "length":
        rep = mc.r_projective_length(c, _ordinal(args.max_alpha), args.depth, horizon=args.horizon)
        return rep.to_json(), rep.at_least or rep.plain == "unknown"
    if op == "sigma-partial":
        rep = mc.sigma_partial(c, alpha, args.depth, horizon=args.horizon)
        out = rep.to_json()
        out["levelwise_match"] = mc.partial_dual_matches(rep, c, args.depth)
        return out, rep.consistent == "unknown"
    rep = mc.phantom_resolution(c, alpha, args.breadth, args.depth)
    return rep.to_json(), False


def cmd_verify(args):
    rep = verify.run_suite(args.suite, args.seed, args.depth, _ordinal(args.alpha) if args.alpha else None)
    return rep, False


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="towerkit", description=__doc__.splitlines()[0])
    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--json", action="store_true", help="emit JSON")
    output.add_argument("--require-exact", action="store_true", help="exit 4 on Unknown verdicts")
    common = argparse.ArgumentParser(add_help=False, parents=[output])
    common.add_argument("--depth", type=int, default=tw.DEFAULT_DEPTH)
    common.add_argument("--horizon", type=int, default=tw.DEFAULT_HORIZON)
    sub = p.add_subparsers(dest="group", required=True)

    s = sub.add_parser("lin", parents=[common], help="lattice and normal-form operations")
    s.add_argument("op", choices=["hnf", "snf", "meet", "join", "saturate", "eventual-image"])
    s.add_argument("input", nargs="?")
    s.set_defaults(func=cmd_lin)

    s = sub.add_parser("ord", parents=[common], help="ordinal operations")
    s.add_argument("op", choices=["fundamental", "compare"])
    s.add_argument("a")
    s.add_argument("b")
    s.set_defaults(func=cmd_ord)

    s = sub.add_parser("tree", parents=[common], help="well-founded trees and index trees")
    s.add_argument("op", choices=["rank", "index", "linearize", "game"])
    s.add_argument("input", nargs="?")
    s.add_argument("--alpha", default="2")
    s.add_argument("--forest", action="store_true", help="the forest I_alpha instead of I_alpha^plain")
    s.add_argument("--breadth", type=int, default=3)
    s.add_argument("--max-nodes", type=int, default=200)
    s.set_defaults(func=cmd_tree)

    s = sub.add_parser("tower", parents=[common], help="towers and derived towers")
    s.add_argument("op", choices=["derive", "length", "ml", "fishbone-build", "fishbone-verify", "reduce"])
    s.add_argument("input", nargs="?")
    s.add_argument("--alpha", default="1")
    s.add_argument("--max-alpha", default="w")
    s.add_argument("--reduced", action="store_true")
    s.add_argument("--no-check", action="store_true", help="skip the straightness check")
    s.set_defaults(func=cmd_tower)

    s = sub.add_parser("mod", parents=[common], help="colimit modules and Ext(-, R)")
    s.add_argument("op", choices=["dual", "projective", "length", "xi", "wedge", "sigma-partial", "resolution"])
    s.add_argument("input", nargs="?")
    s.add_argument("--alpha", default="1")
    s.add_argument("--max-alpha", default="w")
    s.add_argument("--breadth", type=int, default=3)
    s.add_argument("--p", type=int, default=2)
    s.add_argument("--digits", help="comma-separated base-p digits of tau, first digit 1")
    s.add_argument("--count", type=int, default=64, help="number of seeded digits")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--emit", action="store_true", help="include the module document")
    s.set_defaults(func=cmd_mod)

    s = sub.add_parser("verify", parents=[output], help="run a verification suite")
    s.add_argument("suite", choices=list(verify.SUITES))
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--depth", type=int, help="suite-specific default when omitted")
    s.add_argument("--alpha")
    s.set_defaults(func=cmd_verify)
    return p


def _table(report, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    if isinstance(report, dict):
        for k, v in report.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.extend(_table(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {json.dumps(v)}")
    elif isinstance(report, list):
        for v in report:
            if isinstance(v, (dict, list)):
                lines.append(f"{pad}-")
                lines.extend(_table(v, indent + 1))
            else:
                lines.append(f"{pad}- {json.dumps(v)}")
    else:
        lines.append(pad + json.dumps(report))
    return lines


def emit(report: dict, as_json: bool):
    if as_json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print("\n".join(_table(report)))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    as_json = args.json or os.environ.get(FORMAT_ENV, "").lower() == "json" or not sys.stdout.isatty()
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json")}
    try:
        report, unknown = args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (tw.TowerError, mc.ColimError, DimensionError, OrdinalError, ArithmeticError, ValueError) as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 3
    if args.group == "verify":
        emit(report, as_json)
        return 0 if report["passed"] else 1
    out = {"config": config, "rule": FUNDAMENTAL_RULE_ID, "result": report}
    emit(out, as_json)
    if unknown and args.require_exact:
        print("verdict is not exact", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
