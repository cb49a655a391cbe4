"""Ordinals below w^w in Cantor normal form, with a fixed fundamental-sequence rule."""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering

EXPONENT_CAP = 10
FUNDAMENTAL_RULE_ID = "cnf-peel/succ-v1"
FUNDAMENTAL_RULE = (
    "successors and 0 map to themselves; beta + w^e maps n to "
    "beta + w^(e-1)*(n+1) + 1 when e >= 2 and to beta + (n+1) when e = 1"
)


class OrdinalError(ValueError):
    pass


@total_ordering
@dataclass(frozen=True)
class Ordinal:
    """Sum of w^e * c over `terms`, exponents strictly decreasing, coefficients >= 1."""

    terms: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        prev = None
        for e, c in self.terms:
            if e < 0 or c < 1:
                raise OrdinalError(f"bad term w^{e}*{c}")
            if prev is not None and e >= prev:
                raise OrdinalError("exponents must strictly decrease")
            if e >= EXPONENT_CAP:
                raise OrdinalError(f"exponent {e} reaches the cap w^{EXPONENT_CAP}")
            prev = e

    @classmethod
    def of(cls, n: int) -> "Ordinal":
        if n < 0:
            raise OrdinalError("negative ordinal")
        return cls(((0, n),)) if n else cls()

    @classmethod
    def omega_power(cls, e: int, c: int = 1) -> "Ordinal":
        return cls(((e, c),))

    def __lt__(self, other: "Ordinal") -> bool:
        if not isinstance(other, Ordinal):
            return NotImplemented
        return self.terms < other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def is_successor(self) -> bool:
        return bool(self.terms) and self.terms[-1][0] == 0

    def is_limit(self) -> bool:
        return bool(self.terms) and self.terms[-1][0] > 0

    def is_finite(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0] == 0)

    def finite_value(self) -> int:
        if not self.is_finite():
            raise OrdinalError(f"{self} is infinite")
        return self.terms[0][1] if self.terms else 0

    def successor(self) -> "Ordinal":
        return self + ONE

    def predecessor(self) -> "Ordinal":
        if not self.is_successor():
            raise OrdinalError(f"{self} has no predecessor")
        *head, (_, c) = self.terms
        return Ordinal(tuple(head) + (((0, c - 1),) if c > 1 else ()))

    def __add__(self, other: "Ordinal") -> "Ordinal":
        if not other.terms:
            return self
        lead = other.terms[0][0]
        kept = [t for t in self.terms if t[0] > lead]
        same = [t for t in self.terms if t[0] == lead]
        if same:
            first = (lead, same[0][1] + other.terms[0][1])
            return Ordinal(tuple(kept) + (first,) + other.terms[1:])
        return Ordinal(tuple(kept) + other.terms)

    def __str__(self) -> str:
        return format_ordinal(self)

    def __repr__(self) -> str:
        return f"Ordinal({format_ordinal(self)!r})"

    def to_json(self) -> dict:
        return {"cnf": [[e, c] for e, c in self.terms]}

    @classmethod
    def from_json(cls, doc) -> "Ordinal":
        if isinstance(doc, str):
            return parse(doc)
        if isinstance(doc, int):
            return cls.of(doc)
        return cls(tuple((int(e), int(c)) for e, c in doc["cnf"]))


ZERO = Ordinal()
ONE = Ordinal.of(1)
OMEGA = Ordinal.omega_power(1)

_TERM = re.compile(r"^(?:w(?:\^(\d+))?(?:\*(\d+))?|(\d+))$")


def parse(text: str) -> Ordinal:
    """Parse `0 | w^E*C (+ w^E*C)* (+ C)?`; `w` is w^1 and a coefficient 1 may be omitted."""
    s = text.replace(" ", "")
    if s == "0":
        return ZERO
    if not s:
        raise OrdinalError("empty ordinal string")
    terms: list[tuple[int, int]] = []
    parts = s.split("+")
    for i, part in enumerate(parts):
        m = _TERM.match(part)
        if not m:
            raise OrdinalError(f"malformed ordinal term {part!r} in {text!r}")
        if m.group(3) is not None:
            if i != len(parts) - 1:
                raise OrdinalError(f"constant term must come last in {text!r}")
            e, c = 0, int(m.group(3))
            if c == 0:
                raise OrdinalError(f"zero constant term in {text!r}")
        else:
            e = int(m.group(1)) if m.group(1) is not None else 1
            c = int(m.group(2)) if m.group(2) is not None else 1
            if e == 0 or c == 0:
                raise OrdinalError(f"malformed ordinal term {part!r} in {text!r}")
        terms.append((e, c))
    return Ordinal(tuple(terms))


def format_ordinal(a: Ordinal) -> str:
    if not a.terms:
        return "0"
    out = []
    for e, c in a.terms:
        if e == 0:
            out.append(str(c))
            continue
        base = "w" if e == 1 else f"w^{e}"
        out.append(base if c == 1 else f"{base}*{c}")
    return "+".join(out)


def compare(a: Ordinal, b: Ordinal) -> int:
    return (a > b) - (a < b)


def fundamental(alpha: Ordinal, n: int) -> Ordinal:
    """The n-th term of the canonical fundamental sequence; successors and 0 are fixed."""
    if n < 0:
        raise OrdinalError("negative index")
    if not alpha.is_limit():
        return alpha
    *head, (e, c) = alpha.terms
    beta = Ordinal(tuple(head) + (((e, c - 1),) if c > 1 else ()))
    if e == 1:
        return beta + Ordinal.of(n + 1)
    return beta + Ordinal.omega_power(e - 1, n + 1) + ONE


def minus_one_k(alpha: Ordinal, k: int) -> Ordinal:
    """(alpha - 1)_k for a successor alpha: the index used by successor-stage recursions."""
    return fundamental(alpha.predecessor(), k)


def ordinals_up_to(bound: Ordinal, coeff_cap: int = 4) -> list[Ordinal]:
    """Ordinals <= bound whose CNF coefficients are all <= coeff_cap, in increasing order."""
    top = bound.terms[0][0] if bound.terms else 0
    out: list[Ordinal] = []

    def rec(terms: tuple[tuple[int, int], ...], max_e: int):
        o = Ordinal(terms)
        if o > bound:
            return
        out.append(o)
        for e in range(max_e, -1, -1):
            for c in range(1, coeff_cap + 1):
                t = terms + ((e, c),)
                if Ordinal(t) > bound:
                    break
                rec(t, e - 1)

    rec((), top)
    return sorted(set(out))
