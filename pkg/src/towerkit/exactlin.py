"""Exact integer linear algebra over Z and its localizations.

Matrices act on column vectors; lattices are stored as row bases in
canonical row Hermite normal form, so equality of lattices is equality of
their bases.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Sequence

Row = tuple[int, ...]


class DimensionError(ValueError):
    pass


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class ExactMatrix:
    nrows: int
    ncols: int
    rows: tuple[Row, ...]

    def __post_init__(self):
        if len(self.rows) != self.nrows or any(len(r) != self.ncols for r in self.rows):
            raise DimensionError("entries do not match the declared shape")

    @classmethod
    def of(cls, rows: Sequence[Sequence[int]], ncols: int | None = None) -> "ExactMatrix":
        rows = tuple(tuple(int(x) for x in r) for r in rows)
        if ncols is None:
            if not rows:
                raise DimensionError("cannot infer the column count of an empty matrix")
            ncols = len(rows[0])
        return cls(len(rows), ncols, rows)

    @classmethod
    def identity(cls, n: int) -> "ExactMatrix":
        return cls(n, n, tuple(tuple(int(i == j) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "ExactMatrix":
        return cls(nrows, ncols, tuple((0,) * ncols for _ in range(nrows)))

    @classmethod
    def scalar(cls, n: int, c: int) -> "ExactMatrix":
        return cls(n, n, tuple(tuple(c if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def diag(cls, entries: Sequence[int]) -> "ExactMatrix":
        n = len(entries)
        return cls(n, n, tuple(tuple(entries[i] if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def block_diag(cls, blocks: Sequence["ExactMatrix"]) -> "ExactMatrix":
        nr = sum(b.nrows for b in blocks)
        nc = sum(b.ncols for b in blocks)
        out = []
        c0 = 0
        for b in blocks:
            for r in b.rows:
                out.append((0,) * c0 + r + (0,) * (nc - c0 - b.ncols))
            c0 += b.ncols
        return cls(nr, nc, tuple(out))

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def T(self) -> "ExactMatrix":
        return ExactMatrix(self.ncols, self.nrows, tuple(tuple(r[j] for r in self.rows) for j in range(self.ncols)))

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        if self.ncols != other.nrows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        cols = other.T().rows
        return ExactMatrix(
            self.nrows,
            other.ncols,
            tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows),
        )

    def apply(self, v: Sequence[int]) -> Row:
        if len(v) != self.ncols:
            raise DimensionError("vector length does not match")
        return tuple(sum(a * b for a, b in zip(r, v)) for r in self.rows)

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.rows for x in r)

    def to_json(self) -> dict:
        return {"rows": [list(r) for r in self.rows]}

    @classmethod
    def from_json(cls, doc, ncols: int | None = None) -> "ExactMatrix":
        rows = doc["rows"] if isinstance(doc, dict) else doc
        if ncols is None and isinstance(doc, dict) and "cols" in doc:
            ncols = int(doc["cols"])
        if not rows and ncols is None:
            ncols = 0
        return cls.of(rows, ncols)


def det(m: ExactMatrix) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    n = m.nrows
    if n != m.ncols:
        raise DimensionError("determinant of a non-square matrix")
    if n == 0:
        return 1
    a = [list(r) for r in m.rows]
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def dual_map(f: ExactMatrix) -> ExactMatrix:
    """Hom(-, R) on finite free modules: the transpose."""
    return f.T()


# --------------------------------------------------------------------------
# Hermite and Smith normal forms


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def _hnf_in_place(a: list[list[int]], u: list[list[int]] | None) -> int:
    """Row-reduce `a` to canonical HNF; returns the rank. Row ops mirror into `u`."""
    m = len(a)
    n = len(a[0]) if m else 0
    r = 0
    for c in range(n):
        if r == m:
            break
        for i in range(r + 1, m):
            if a[i][c] == 0:
                continue
            if a[r][c] == 0:
                a[r], a[i] = a[i], a[r]
                if u is not None:
                    u[r], u[i] = u[i], u[r]
                continue
            g, x, y = _xgcd(a[r][c], a[i][c])
            p, q = a[r][c] // g, a[i][c] // g
            ar, ai = a[r], a[i]
            a[r] = [x * s + y * t for s, t in zip(ar, ai)]
            a[i] = [p * t - q * s for s, t in zip(ar, ai)]
            if u is not None:
                ur, ui = u[r], u[i]
                u[r] = [x * s + y * t for s, t in zip(ur, ui)]
                u[i] = [p * t - q * s for s, t in zip(ur, ui)]
        if a[r][c] == 0:
            continue
        if a[r][c] < 0:
            a[r] = [-s for s in a[r]]
            if u is not None:
                u[r] = [-s for s in u[r]]
        piv = a[r][c]
        for i in range(r):
            q = a[i][c] // piv
            if q:
                a[i] = [s - q * t for s, t in zip(a[i], a[r])]
                if u is not None:
                    u[i] = [s - q * t for s, t in zip(u[i], u[r])]
        r += 1
    return r


def hnf(m: ExactMatrix) -> tuple[ExactMatrix, ExactMatrix]:
    """Row HNF h with unimodular u such that h = u @ m. Zero rows sit at the bottom."""
    a = [list(r) for r in m.rows]
    u = [list(r) for r in ExactMatrix.identity(m.nrows).rows]
    _hnf_in_place(a, u)
    return ExactMatrix.of(a, m.ncols), ExactMatrix.of(u, m.nrows)


def _hnf_rows(rows: Iterable[Sequence[int]], ncols: int) -> tuple[Row, ...]:
    a = [list(r) for r in rows if any(r)]
    if not a:
        return ()
    rank = _hnf_in_place(a, None)
    return tuple(tuple(r) for r in a[:rank])


def snf(m: ExactMatrix) -> tuple[ExactMatrix, ExactMatrix, ExactMatrix]:
    """Smith normal form s = u @ m @ v with u, v unimodular and d1 | d2 | ..."""
    nr, nc = m.nrows, m.ncols
    a = [list(r) for r in m.rows]
    u = [list(r) for r in ExactMatrix.identity(nr).rows]
    v = [list(r) for r in ExactMatrix.identity(nc).rows]

    def row_combo(i, j, x, y, p, q):
        # rows (i, j) <- (x*ri + y*rj, p*rj - q*ri)
        for mat in (a, u):
            ri, rj = mat[i], mat[j]
            mat[i] = [x * s + y * t for s, t in zip(ri, rj)]
            mat[j] = [p * t - q * s for s, t in zip(ri, rj)]

    def col_combo(i, j, x, y, p, q):
        for mat in (a, v):
            for r in mat:
                s, t = r[i], r[j]
                r[i] = x * s + y * t
                r[j] = p * t - q * s

    t = 0
    while t < min(nr, nc):
        # choose a nonzero pivot of smallest magnitude in the remaining block
        best = None
        for i in range(t, nr):
            for j in range(t, nc):
                if a[i][j] and (best is None or abs(a[i][j]) < abs(a[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        i, j = best
        if i != t:
            a[t], a[i] = a[i], a[t]
            u[t], u[i] = u[i], u[t]
        if j != t:
            for mat in (a, v):
                for r in mat:
                    r[t], r[j] = r[j], r[t]
        while True:
            done = True
            for i in range(t + 1, nr):
                if a[i][t]:
                    g, x, y = _xgcd(a[t][t], a[i][t])
                    row_combo(t, i, x, y, a[t][t] // g, a[i][t] // g)
                    done = False
            for j in range(t + 1, nc):
                if a[t][j]:
                    g, x, y = _xgcd(a[t][t], a[t][j])
                    col_combo(t, j, x, y, a[t][t] // g, a[t][j] // g)
                    done = False
            if done:
                break
        # enforce divisibility of the remaining block by the pivot
        bad = None
        for i in range(t + 1, nr):
            for j in range(t + 1, nc):
                if a[i][j] % a[t][t]:
                    bad = i
                    break
            if bad is not None:
                break
        if bad is not None:
            for mat in (a, u):
                mat[t] = [s + w for s, w in zip(mat[t], mat[bad])]
            continue
        if a[t][t] < 0:
            a[t] = [-s for s in a[t]]
            u[t] = [-s for s in u[t]]
        t += 1
    return ExactMatrix.of(a, nc), ExactMatrix.of(u, nr), ExactMatrix.of(v, nc)


def smith_diagonal(m: ExactMatrix) -> list[int]:
    s, _, _ = snf(m)
    return [s.rows[i][i] for i in range(min(s.nrows, s.ncols)) if s.rows[i][i]]


# --------------------------------------------------------------------------
# rings


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class BaseRing:
    """Z with the primes in `inverted_primes` made units.

    `local_at=p` models Z localized at p: every prime other than p is a unit.
    """

    inverted_primes: frozenset[int] = frozenset()
    local_at: int | None = None

    def __post_init__(self):
        for q in self.inverted_primes:
            if not _is_prime(q):
                raise ValueError(f"{q} is not prime")
        if self.local_at is not None:
            if not _is_prime(self.local_at):
                raise ValueError(f"{self.local_at} is not prime")
            if self.inverted_primes:
                raise ValueError("a local ring takes no explicit inverted primes")

    @classmethod
    def integers(cls) -> "BaseRing":
        return cls()

    @classmethod
    def inverting(cls, *primes: int) -> "BaseRing":
        return cls(frozenset(primes))

    @classmethod
    def local(cls, p: int) -> "BaseRing":
        return cls(frozenset(), p)

    @property
    def is_integers(self) -> bool:
        return not self.inverted_primes and self.local_at is None

    def nonunit_part(self, n: int) -> int:
        """The part of |n| that is not a unit of the ring (0 stays 0)."""
        n = abs(n)
        if n == 0:
            return 0
        if self.local_at is not None:
            p, out = self.local_at, 1
            while n % p == 0:
                n //= p
                out *= p
            return out
        for q in self.inverted_primes:
            while n % q == 0:
                n //= q
        return n

    def is_unit(self, n: int) -> bool:
        return self.nonunit_part(n) == 1

    def to_json(self) -> dict:
        if self.local_at is not None:
            return {"inverted_primes": [], "local_at": self.local_at}
        return {"inverted_primes": sorted(self.inverted_primes)}

    @classmethod
    def from_json(cls, doc: dict | None) -> "BaseRing":
        if not doc:
            return cls()
        if doc.get("local_at") is not None:
            return cls.local(int(doc["local_at"]))
        primes = [int(q) for q in doc.get("inverted_primes", [])]
        if len(set(primes)) != len(primes):
            raise ValueError("inverted primes must be distinct")
        return cls(frozenset(primes))

    def __str__(self) -> str:
        if self.local_at is not None:
            return f"Z_({self.local_at})"
        if not self.inverted_primes:
            return "Z"
        return "Z[1/" + ",1/".join(str(q) for q in sorted(self.inverted_primes)) + "]"


ZZ = BaseRing()


# --------------------------------------------------------------------------
# lattices


@dataclass(frozen=True)
class Lattice:
    dim: int
    basis: tuple[Row, ...] = field(default=())

    @classmethod
    def span(cls, dim: int, gens: Iterable[Sequence[int]], ring: BaseRing = ZZ) -> "Lattice":
        gens = [tuple(int(x) for x in g) for g in gens]
        for g in gens:
            if len(g) != dim:
                raise DimensionError(f"generator of length {len(g)} in ambient dimension {dim}")
        lat = cls(dim, _hnf_rows(gens, dim))
        if not ring.is_integers:
            lat = _ring_hull(lat, ring)
        return lat

    @classmethod
    def full(cls, dim: int) -> "Lattice":
        return cls(dim, ExactMatrix.identity(dim).rows)

    @classmethod
    def zero(cls, dim: int) -> "Lattice":
        return cls(dim, ())

    @property
    def rank(self) -> int:
        return len(self.basis)

    def is_zero(self) -> bool:
        return not self.basis

    def is_full(self) -> bool:
        return self.rank == self.dim and all(self.basis[i][i] == 1 for i in range(self.dim))

    def matrix(self) -> ExactMatrix:
        return ExactMatrix(len(self.basis), self.dim, self.basis)

    def coordinates(self, v: Sequence[int]) -> tuple[int, ...] | None:
        """Integer coordinates of v in the basis, or None when v is not in the lattice."""
        rest = list(v)
        coords = []
        for row in self.basis:
            c = next(i for i, x in enumerate(row) if x)
            if rest[c] % row[c]:
                return None
            q = rest[c] // row[c]
            coords.append(q)
            if q:
                rest = [a - q * b for a, b in zip(rest, row)]
        if any(rest):
            return None
        return tuple(coords)

    def contains(self, v: Sequence[int]) -> bool:
        return self.coordinates(v) is not None

    def issubset(self, other: "Lattice") -> bool:
        _same_dim(self, other)
        return all(other.contains(b) for b in self.basis)

    def __add__(self, other: "Lattice") -> "Lattice":
        return lattice_sum(self, other)

    def __and__(self, other: "Lattice") -> "Lattice":
        return lattice_intersection(self, other)

    def __le__(self, other: "Lattice") -> bool:
        return self.issubset(other)

    def to_json(self) -> dict:
        return {"dim": self.dim, "basis": [list(r) for r in self.basis]}

    @classmethod
    def from_json(cls, doc: dict, ring: BaseRing = ZZ) -> "Lattice":
        return cls.span(int(doc["dim"]), doc.get("basis", []), ring)

    def __str__(self) -> str:
        return "span{" + ", ".join("(" + ",".join(map(str, r)) + ")" for r in self.basis) + "}"


def _same_dim(a: Lattice, b: Lattice):
    if a.dim != b.dim:
        raise DimensionError(f"ambient dimensions differ: {a.dim} vs {b.dim}")


def left_kernel(rows: Sequence[Sequence[int]], nrows: int) -> list[Row]:
    """Basis of {y : y @ G = 0} for the matrix G with the given rows."""
    if nrows == 0:
        return []
    a = [list(r) for r in rows]
    u = [list(r) for r in ExactMatrix.identity(nrows).rows]
    if not a or not a[0]:
        return [tuple(r) for r in u]
    rank = _hnf_in_place(a, u)
    return [tuple(r) for r in u[rank:]]


def lattice_sum(a: Lattice, b: Lattice, ring: BaseRing = ZZ) -> Lattice:
    _same_dim(a, b)
    return Lattice.span(a.dim, a.basis + b.basis, ring)


def lattice_intersection(a: Lattice, b: Lattice, ring: BaseRing = ZZ) -> Lattice:
    _same_dim(a, b)
    if a.is_zero() or b.is_zero():
        return Lattice.zero(a.dim)
    if a.is_full():
        return b
    if b.is_full():
        return a
    stacked = list(a.basis) + [tuple(-x for x in r) for r in b.basis]
    ker = left_kernel(stacked, len(stacked))
    ra = len(a.basis)
    gens = []
    for y in ker:
        coeff = y[:ra]
        gens.append(tuple(sum(c * row[j] for c, row in zip(coeff, a.basis)) for j in range(a.dim)))
    return Lattice.span(a.dim, gens, ring)


def saturate(lat: Lattice, ring: BaseRing = ZZ) -> Lattice:
    """Pure hull: Z^d intersected with the rational span (the same for every localization)."""
    if lat.is_zero() or lat.rank == lat.dim:
        return Lattice.full(lat.dim) if lat.rank == lat.dim else lat
    perp = left_kernel(ExactMatrix(lat.rank, lat.dim, lat.basis).T().rows, lat.dim)
    # vectors orthogonal to every row of `perp`
    back = left_kernel(ExactMatrix(len(perp), lat.dim, tuple(perp)).T().rows, lat.dim)
    return Lattice.span(lat.dim, back)


def _ring_hull(lat: Lattice, ring: BaseRing) -> Lattice:
    """{x in Z^d : s*x in lat for some unit s of the ring}."""
    if ring.is_integers or lat.is_zero():
        return lat
    diag = smith_diagonal(lat.matrix())
    exponent = diag[-1] if diag else 1
    if ring.is_unit(exponent):
        return saturate(lat)
    n = ring.nonunit_part(exponent)
    if n == exponent:
        return lat
    sat = saturate(lat)
    return Lattice(lat.dim, _hnf_rows(list(lat.basis) + [tuple(n * x for x in r) for r in sat.basis], lat.dim))


def ring_hull(lat: Lattice, ring: BaseRing) -> Lattice:
    return _ring_hull(lat, ring)


def map_image(f: ExactMatrix, lat: Lattice, ring: BaseRing = ZZ) -> Lattice:
    if f.ncols != lat.dim:
        raise DimensionError(f"map with {f.ncols} columns applied to a lattice in dimension {lat.dim}")
    return Lattice.span(f.nrows, (f.apply(b) for b in lat.basis), ring)


def map_kernel(f: ExactMatrix, ring: BaseRing = ZZ) -> Lattice:
    return Lattice.span(f.ncols, left_kernel(f.T().rows, f.ncols), ring)


def map_preimage(f: ExactMatrix, lat: Lattice, ring: BaseRing = ZZ) -> Lattice:
    if f.nrows != lat.dim:
        raise DimensionError(f"map with {f.nrows} rows pulled back from dimension {lat.dim}")
    stacked = list(f.T().rows) + [tuple(-x for x in r) for r in lat.basis]
    ker = left_kernel(stacked, len(stacked))
    return Lattice.span(f.ncols, (y[: f.ncols] for y in ker), ring)


@dataclass(frozen=True)
class QuotientShape:
    free_rank: int
    invariant_factors: tuple[int, ...]

    def is_zero(self) -> bool:
        return self.free_rank == 0 and not self.invariant_factors

    def to_json(self) -> dict:
        return {"free_rank": self.free_rank, "invariant_factors": list(self.invariant_factors)}


def quotient_shape(big: Lattice, small: Lattice, ring: BaseRing = ZZ) -> QuotientShape:
    _same_dim(big, small)
    coords = []
    for b in small.basis:
        c = big.coordinates(b)
        if c is None:
            raise ValueError("quotient_shape needs small to be contained in big")
        coords.append(c)
    diag = smith_diagonal(ExactMatrix(len(coords), big.rank, tuple(coords))) if coords else []
    factors = tuple(ring.nonunit_part(d) for d in diag)
    return QuotientShape(big.rank - small.rank, tuple(d for d in factors if d > 1))


# --------------------------------------------------------------------------
# eventual image


def _mat_poly(coeffs: Sequence[int], m: ExactMatrix) -> ExactMatrix:
    """Evaluate a polynomial (coefficients from the leading term down) at m."""
    n = m.nrows
    acc = ExactMatrix.zeros(n, n)
    for c in coeffs:
        acc = acc @ m
        if c:
            acc = ExactMatrix(n, n, tuple(tuple(x + (c if i == j else 0) for j, x in enumerate(r)) for i, r in enumerate(acc.rows)))
    return acc


def restricted_matrix(m: ExactMatrix, lat: Lattice) -> ExactMatrix | None:
    """Matrix of m on an m-stable lattice in its basis (rows are images), or None if not stable."""
    out = []
    for b in lat.basis:
        c = lat.coordinates(m.apply(b))
        if c is None:
            return None
        out.append(c)
    return ExactMatrix(lat.rank, lat.rank, tuple(out))


def eventual_image(m: ExactMatrix, ring: BaseRing = ZZ) -> Lattice:
    """The largest sublattice S with m(S) = S, i.e. the intersection of all images of m^k.

    S is the saturated kernel of h(m), where h collects the rational irreducible
    factors of the characteristic polynomial whose constant term is a unit of
    the ring, with full multiplicity.
    """
    import sympy

    d = m.nrows
    if d != m.ncols:
        raise DimensionError("eventual_image needs a square matrix")
    if d == 0:
        return Lattice.zero(0)
    if ring.is_unit(det(m)):
        return Lattice.full(d)
    x = sympy.Symbol("x")
    chi = sympy.Matrix(m.rows).charpoly(x).as_expr()
    _, factors = sympy.factor_list(chi, x)
    h = sympy.Integer(1)
    for g, mult in factors:
        g0 = int(sympy.Poly(g, x).eval(0))
        if g0 != 0 and ring.is_unit(g0):
            h *= g**mult
    coeffs = [int(c) for c in sympy.Poly(h, x).all_coeffs()]
    if len(coeffs) == 1:
        return Lattice.zero(d)
    s = map_kernel(_mat_poly(coeffs, m))
    r = restricted_matrix(m, s)
    if r is None or not ring.is_unit(det(r)):
        raise ArithmeticError("eventual image certificate failed")
    return s


def is_stable_onto(m: ExactMatrix, lat: Lattice, ring: BaseRing = ZZ) -> bool:
    """Whether m(lat) = lat over the ring."""
    return map_image(m, lat, ring) == ring_hull(lat, ring)


def matrix_power(m: ExactMatrix, k: int) -> ExactMatrix:
    out = ExactMatrix.identity(m.nrows)
    base = m
    while k:
        if k & 1:
            out = out @ base
        base = base @ base
        k >>= 1
    return out


def image_chain(m: ExactMatrix, depth: int, ring: BaseRing = ZZ) -> list[Lattice]:
    """images of m^k on the full lattice for k = 0..depth (brute-force oracle)."""
    cur = Lattice.full(m.nrows)
    out = [cur]
    for _ in range(depth):
        cur = map_image(m, cur, ring)
        out.append(cur)
    return out


def shortest_vector_2d(lat: Lattice) -> int:
    """Squared Euclidean length of a shortest nonzero vector of a lattice of rank <= 2 (Gauss reduction)."""
    if lat.rank == 0:
        raise ValueError("zero lattice has no nonzero vector")
    if lat.rank == 1:
        return sum(x * x for x in lat.basis[0])
    if lat.rank != 2:
        raise ValueError("Gauss reduction needs rank 2")
    u, v = list(lat.basis[0]), list(lat.basis[1])

    def n2(w):
        return sum(x * x for x in w)

    def dot(a, b):
        return sum(x * y for x, y in zip(a, b))

    if n2(u) > n2(v):
        u, v = v, u
    while True:
        nu = n2(u)
        q = (2 * dot(u, v) + nu) // (2 * nu)  # nearest integer to dot/nu
        v = [a - q * b for a, b in zip(v, u)]
        if n2(v) >= nu:
            return nu
        u, v = v, u


def block_diag_lattice(parts: Sequence[Lattice]) -> Lattice:
    dim = sum(p.dim for p in parts)
    rows = []
    off = 0
    for p in parts:
        for r in p.basis:
            rows.append((0,) * off + r + (0,) * (dim - off - p.dim))
        off += p.dim
    return Lattice(dim, _hnf_rows(rows, dim))


def map_solve(f: ExactMatrix, lat: Lattice, target: Sequence[int]) -> Row | None:
    """Some c in lat with f(c) = target, or None when target is not in f(lat) (over Z)."""
    if lat.is_zero():
        return tuple([0] * lat.dim) if not any(target) else None
    gens = [list(f.apply(b)) for b in lat.basis]
    u = [list(r) for r in ExactMatrix.identity(len(gens)).rows]
    rank = _hnf_in_place(gens, u)
    image = Lattice(f.nrows, tuple(tuple(r) for r in gens[:rank]))
    coords = image.coordinates(target)
    if coords is None:
        return None
    y = [sum(c * u[i][j] for i, c in enumerate(coords)) for j in range(len(lat.basis))]
    return tuple(sum(y[i] * lat.basis[i][k] for i in range(len(y))) for k in range(lat.dim))
