"""Sparse multivariate polynomials over Q and polynomial-map metadata.

A polynomial in n variables is a dict mapping exponent tuples (length n,
one entry per variable) to nonzero Fraction coefficients; {} is zero.
Exact rational coefficients keep every downstream congruence computation
faithful; modular integer images are produced on demand.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Iterator, Sequence

from .errors import ParseError, SeriesCertificationError, SeriesFloorError
from .padic import INFINITY, Rational, valuation

Exponent = tuple[int, ...]
Poly = dict[Exponent, Fraction]

#: Largest exponent accepted by the parser (guards expansion blow-up).
MAX_EXPONENT = 4096

#: Degree bound up to which a series valuation floor is searched before the
#: series is refused as not certified restricted.
SERIES_DEGREE_CAP = 512


# ----------------------------------------------------------- polynomial algebra


def poly_zero() -> Poly:
    return {}


def poly_const(n: int, c: Rational) -> Poly:
    c = Fraction(c)
    return {} if c == 0 else {(0,) * n: c}


def poly_var(n: int, i: int) -> Poly:
    exp = [0] * n
    exp[i] = 1
    return {tuple(exp): Fraction(1)}


def poly_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for exp, c in b.items():
        nc = out.get(exp, Fraction(0)) + c
        if nc:
            out[exp] = nc
        else:
            out.pop(exp, None)
    return out


def poly_scale(a: Poly, c: Rational) -> Poly:
    c = Fraction(c)
    if c == 0:
        return {}
    return {exp: coeff * c for exp, coeff in a.items()}


def poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for e1, c1 in a.items():
        for e2, c2 in b.items():
            exp = tuple(x + y for x, y in zip(e1, e2))
            nc = out.get(exp, Fraction(0)) + c1 * c2
            if nc:
                out[exp] = nc
            else:
                out.pop(exp, None)
    return out


def poly_pow(a: Poly, e: int, n: int) -> Poly:
    result = poly_const(n, 1)
    base = a
    while e > 0:
        if e & 1:
            result = poly_mul(result, base)
        base = poly_mul(base, base) if e > 1 else base
        e >>= 1
    return result


def poly_eval(a: Poly, point: Sequence[Rational]) -> Fraction:
    xs = [Fraction(x) for x in point]
    total = Fraction(0)
    for exp, c in a.items():
        term = c
        for x, e in zip(xs, exp):
            if e:
                term *= x**e
        total += term
    return total


def poly_terms_sorted(a: Poly) -> list[tuple[Exponent, Fraction]]:
    """Terms in graded-lex order: the canonical iteration order."""
    return sorted(a.items(), key=lambda item: (sum(item[0]), item[0]))


def partial_derivative(a: Poly, i: int) -> Poly:
    out: Poly = {}
    for exp, c in a.items():
        e = exp[i]
        if e == 0:
            continue
        nexp = exp[:i] + (e - 1,) + exp[i + 1 :]
        nc = out.get(nexp, Fraction(0)) + c * e
        if nc:
            out[nexp] = nc
        else:
            out.pop(nexp, None)
    return out


def substitute_affine(a: Poly, center: Sequence[Rational], step: Fraction, n: int) -> Poly:
    """Full expansion of a(center + step * t) as a polynomial in t."""
    out = a
    for i in range(n):
        out = _substitute_one(out, i, Fraction(center[i]), step)
    return out


def _substitute_one(a: Poly, i: int, c: Fraction, q: Fraction) -> Poly:
    out: Poly = {}
    for exp, coeff in a.items():
        e = exp[i]
        if e == 0:
            nc = out.get(exp, Fraction(0)) + coeff
            if nc:
                out[exp] = nc
            else:
                out.pop(exp, None)
            continue
        # (c + q*t)^e expanded by the binomial theorem
        for j in range(e + 1):
            term = coeff * comb(e, j) * c ** (e - j) * q**j
            if not term:
                continue
            nexp = exp[:i] + (j,) + exp[i + 1 :]
            nc = out.get(nexp, Fraction(0)) + term
            if nc:
                out[nexp] = nc
            else:
                out.pop(nexp, None)
    return out


def shift_substitute(g: Poly, a: Sequence[Rational], k: int, p: int) -> Poly:
    """g(a + p**k * t) - g(a), expanded exactly.

    The constant term is dropped: what remains is the phase variation across
    the coset a + p**k Z_p^n, which is what the vanishing tests inspect.
    """
    n = len(a)
    full = substitute_affine(g, a, Fraction(p) ** k, n)
    full.pop((0,) * n, None)
    return full


# -------------------------------------------------------------------ivaluation


def min_coefficient_valuation(a: Poly, p: int) -> int | float:
    """Least valuation among coefficients; +infinity for the zero polynomial."""
    return min((valuation(c, p) for c in a.values()), default=INFINITY)


def coefficient_floor(polys: Iterable[Poly], p: int) -> int:
    """B = max(0, -min coefficient valuation) across the given polynomials.

    p**B clears every denominator p-power, so arithmetic mod p**(m+B)
    determines all values mod p**m Z_p.
    """
    worst = 0
    for a in polys:
        v = min_coefficient_valuation(a, p)
        if v is not INFINITY and v < -worst:
            worst = -v
    return worst


def poly_mod_int(a: Poly, p: int, clear: int, mod: int) -> dict[Exponent, int]:
    """Integer image of p**clear * a with coefficients reduced mod ``mod``.

    Requires every coefficient of p**clear * a to lie in Z_p (its p-unit
    denominator part is inverted mod ``mod``).  Zero coefficients dropped.
    """
    out: dict[Exponent, int] = {}
    for exp, c in a.items():
        num = c.numerator
        den = c.denominator
        e = 0
        while den % p == 0:
            den //= p
            e += 1
        if clear < e:
            raise ValueError(f"coefficient {c} has valuation below -{clear}")
        val = (num * p ** (clear - e) * pow(den, -1, mod)) % mod if mod > 1 else 0
        if val:
            out[exp] = val
    return out


# ------------------------------------------------------------------ matrix rank


def matrix_rank_with_valuations(
    rows: Sequence[Sequence[Rational]], p: int | None = None
) -> tuple[int, list[int | float]]:
    """Exact rank of a rational matrix by Gaussian elimination.

    With ``p`` given, pivots are chosen with minimal p-adic valuation and the
    pivot valuations are returned as diagnostics (the elimination order used
    when ranks are read at finite p-adic precision).
    """
    m = [[Fraction(x) for x in row] for row in rows]
    if not m:
        return 0, []
    ncols = len(m[0])
    rank = 0
    pivots: list[int | float] = []
    row0 = 0
    used_cols: set[int] = set()
    while row0 < len(m):
        best = None
        for i in range(row0, len(m)):
            for j in range(ncols):
                if j in used_cols or m[i][j] == 0:
                    continue
                key = valuation(m[i][j], p) if p is not None else 0
                if best is None or key < best[0]:
                    best = (key, i, j)
            if p is None and best is not None:
                break
        if best is None:
            break
        _, bi, bj = best
        m[row0], m[bi] = m[bi], m[row0]
        piv = m[row0][bj]
        pivots.append(valuation(piv, p) if p is not None else 0)
        used_cols.add(bj)
        for i in range(row0 + 1, len(m)):
            if m[i][bj]:
                factor = m[i][bj] / piv
                m[i] = [a - factor * b for a, b in zip(m[i], m[row0])]
        rank += 1
        row0 += 1
    return rank, pivots


# ----------------------------------------------------------------------- types


@dataclass(frozen=True)
class PolyMap:
    """An r-tuple of polynomials Q^n -> Q, the map under study."""

    n: int
    components: tuple[Poly, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one variable")
        if not self.components:
            raise ValueError("need at least one component")
        for comp in self.components:
            for exp, c in comp.items():
                if len(exp) != self.n:
                    raise ValueError("exponent arity does not match variable count")
                if c == 0:
                    raise ValueError("zero coefficients must not be stored")

    @property
    def r(self) -> int:
        return len(self.components)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "components": [
                [[list(exp), str(c)] for exp, c in poly_terms_sorted(comp)]
                for comp in self.components
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PolyMap":
        comps = []
        for terms in d["components"]:
            poly: Poly = {}
            for exp, c in terms:
                poly[tuple(int(e) for e in exp)] = Fraction(c)
            comps.append(poly)
        return cls(int(d["n"]), tuple(comps))


@dataclass(frozen=True)
class DegreeData:
    """Per-variable degrees d[i][j], their max d(f), and the coefficient
    orders e(f_i) = min valuation over coefficients of f_i - f_i(0)."""

    per_variable: tuple[tuple[int, ...], ...]
    d_max: int
    e_orders: tuple[int | float, ...]


def degree_data(f: PolyMap, p: int) -> DegreeData:
    per_var = []
    e_orders = []
    for comp in f.components:
        degs = tuple(max((exp[j] for exp in comp), default=0) for j in range(f.n))
        per_var.append(degs)
        nonconst = [c for exp, c in comp.items() if any(exp)]
        e_orders.append(min((valuation(c, p) for c in nonconst), default=INFINITY))
    d_max = max((d for degs in per_var for d in degs), default=0)
    return DegreeData(tuple(per_var), d_max, tuple(e_orders))


def check_affine_independence(f: PolyMap) -> bool:
    """True iff 1, f_1, ..., f_r are linearly independent over Q.

    Rational coefficients make independence over Q and over Q_p equivalent,
    so a rank computation on the coefficient matrix decides it exactly.
    """
    monomials = {(0,) * f.n}
    for comp in f.components:
        monomials.update(comp)
    cols = sorted(monomials)
    rows: list[list[Fraction]] = [
        [Fraction(1) if not any(c) else Fraction(0) for c in cols]
    ]
    for comp in f.components:
        rows.append([comp.get(c, Fraction(0)) for c in cols])
    rank, _ = matrix_rank_with_valuations(rows)
    return rank == f.r + 1


def jacobian(f: PolyMap) -> tuple[tuple[Poly, ...], ...]:
    return tuple(
        tuple(partial_derivative(comp, j) for j in range(f.n)) for comp in f.components
    )


def eval_mod(f: PolyMap, x: Sequence[int], m: int, p: int) -> tuple[Fraction, ...]:
    """f(x) to the precision that makes y . f(x) exact mod Z_p for v(y) >= -m.

    Arithmetic is carried mod p**(m+B) where p**B clears the coefficient
    denominators; each returned component is the canonical representative
    in [0, p**m) with denominator p**B.
    """
    b = coefficient_floor(f.components, p)
    mod = p ** (m + b)
    out = []
    for comp in f.components:
        g = poly_mod_int(comp, p, b, mod)
        total = 0
        for exp, c in g.items():
            term = c
            for xi, e in zip(x, exp):
                if e:
                    term = term * pow(xi, e, mod) % mod
            total = (total + term) % mod
        out.append(Fraction(total, p**b))
    return tuple(out)


# ---------------------------------------------------------------------- parser

_TOKEN_RE = re.compile(r"\s*(?:(\d+)|(x\d+)|([+\-*^()/]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            bad_at = len(text) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", bad_at)
        if m.group(1):
            tokens.append(("int", m.group(1), m.start(1)))
        elif m.group(2):
            tokens.append(("var", m.group(2), m.start(2)))
        else:
            tokens.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over
    expr   := ['+'|'-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*
    factor := base ('^' nat)*
    base   := nat ['/' nat] | var | '(' expr ')'
    """

    def __init__(self, text: str, n: int):
        self.tokens = _tokenize(text)
        self.n = n
        self.i = 0
        self.length = len(text)

    def _peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, self.length)

    def _next(self):
        tok = self._peek()
        self.i += 1
        return tok

    def _expect_op(self, op: str):
        kind, val, pos = self._next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", pos)

    def parse(self) -> Poly:
        poly = self.expr()
        kind, val, pos = self._peek()
        if kind is not None:
            raise ParseError(f"unexpected {val!r}", pos)
        return poly

    def expr(self) -> Poly:
        kind, val, _ = self._peek()
        sign = 1
        if kind == "op" and val in "+-":
            self._next()
            sign = -1 if val == "-" else 1
        poly = poly_scale(self.term(), sign)
        while True:
            kind, val, _ = self._peek()
            if kind == "op" and val in "+-":
                self._next()
                rhs = self.term()
                poly = poly_add(poly, poly_scale(rhs, -1 if val == "-" else 1))
            else:
                return poly

    def term(self) -> Poly:
        poly = self.factor()
        while True:
            kind, val, _ = self._peek()
            if kind == "op" and val == "*":
                self._next()
                poly = poly_mul(poly, self.factor())
            else:
                return poly

    def factor(self) -> Poly:
        poly = self.base()
        while True:
            kind, val, _ = self._peek()
            if kind == "op" and val == "^":
                self._next()
                kind, val, pos = self._next()
                if kind != "int":
                    raise ParseError("expected integer exponent", pos)
                e = int(val)
                if e > MAX_EXPONENT:
                    raise ParseError(f"exponent {e} exceeds limit {MAX_EXPONENT}", pos)
                poly = poly_pow(poly, e, self.n)
            else:
                return poly

    def base(self) -> Poly:
        kind, val, pos = self._next()
        if kind == "int":
            num = int(val)
            kind2, val2, _ = self._peek()
            if kind2 == "op" and val2 == "/":
                self._next()
                kind3, val3, pos3 = self._next()
                if kind3 != "int":
                    raise ParseError("expected integer denominator", pos3)
                den = int(val3)
                if den == 0:
                    raise ParseError("zero denominator", pos3)
                return poly_const(self.n, Fraction(num, den))
            return poly_const(self.n, num)
        if kind == "var":
            idx = int(val[1:])
            if not 1 <= idx <= self.n:
                raise ParseError(f"unknown variable {val!r} (have x1..x{self.n})", pos)
            return poly_var(self.n, idx - 1)
        if kind == "op" and val == "(":
            poly = self.expr()
            self._expect_op(")")
            return poly
        raise ParseError(f"unexpected {'end of input' if kind is None else repr(val)}", pos)


def parse_polynomial(text: str, n: int) -> Poly:
    return _Parser(text, n).parse()


def parse_polymap(text: str, n: int) -> PolyMap:
    """Parse a semicolon-separated list of polynomial expressions in x1..xn."""
    parts = text.split(";")
    comps = []
    for part in parts:
        if not part.strip():
            raise ParseError("empty component in polynomial map")
        comps.append(parse_polynomial(part, n))
    return PolyMap(n, tuple(comps))


def infer_variable_count(text: str) -> int:
    """Largest variable index mentioned; 1 if none (constant map)."""
    indices = [int(m.group(1)) for m in re.finditer(r"x(\d+)", text)]
    return max(indices, default=1)


# ------------------------------------------------------------- series and phi


@dataclass(frozen=True)
class RestrictedSeries:
    """A power series on the unit polydisc given by a coefficient oracle.

    ``valuation_floor(d)`` must be a nondecreasing certified lower bound on
    the valuation of every degree-d coefficient; it must tend to infinity for
    the series to converge on Z_p^n.  The floor is re-checked on every
    coefficient the oracle emits.
    """

    n: int
    coefficient: Callable[[Exponent], Rational]
    valuation_floor: Callable[[int], int | float]

    @classmethod
    def from_poly(cls, n: int, poly: Poly, p: int) -> "RestrictedSeries":
        degrees = {sum(exp): None for exp in poly}
        floor_by_degree = {
            d: min(valuation(c, p) for exp, c in poly.items() if sum(exp) == d)
            for d in degrees
        }
        deg = max((sum(exp) for exp in poly), default=0)

        def coeff(exp: Exponent) -> Fraction:
            return poly.get(exp, Fraction(0))

        def floor(d: int) -> int | float:
            if d > deg:
                return INFINITY
            return min(
                (v for dd, v in floor_by_degree.items() if dd >= d), default=INFINITY
            )

        return cls(n, coeff, floor)


def _exponents_of_degree(d: int, n: int) -> Iterator[Exponent]:
    if n == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _exponents_of_degree(d - first, n - 1):
            yield (first,) + rest


def series_truncate(s: RestrictedSeries, m: int, p: int) -> Poly:
    """Polynomial of all series terms with coefficient valuation < m.

    For x in Z_p^n the discarded tail takes values in p**m Z_p, so every
    computation at level <= m is unchanged.  Refuses when the declared floor
    never certifies level m.
    """
    cutoff = None
    for d in range(SERIES_DEGREE_CAP + 1):
        if s.valuation_floor(d) >= m:
            cutoff = d
            break
    if cutoff is None:
        raise SeriesFloorError(
            f"valuation floor never reaches {m} below degree {SERIES_DEGREE_CAP}; "
            "series is not certified restricted"
        )
    out: Poly = {}
    for d in range(cutoff):
        floor_d = s.valuation_floor(d)
        for exp in _exponents_of_degree(d, s.n):
            c = Fraction(s.coefficient(exp))
            if c == 0:
                continue
            if valuation(c, p) < floor_d:
                raise SeriesCertificationError(
                    f"coefficient at {exp} has valuation {valuation(c, p)} "
                    f"below declared floor {floor_d}"
                )
            if valuation(c, p) < m:
                out[exp] = c
    return out


@dataclass(frozen=True)
class BallTerm:
    """weight times the indicator of center + p**k Z_p^n."""

    center: tuple[Fraction, ...]
    k: int
    weight: Fraction


@dataclass(frozen=True)
class SchwartzBruhat:
    """A finite rational combination of ball indicators (locally constant,
    compactly supported).  Balls may overlap; semantics are additive."""

    n: int
    terms: tuple[BallTerm, ...]

    def __post_init__(self):
        for t in self.terms:
            if len(t.center) != self.n:
                raise ValueError("ball center arity does not match variable count")
            if t.weight == 0:
                raise ValueError("ball weights must be nonzero")

    @classmethod
    def trivial(cls, n: int) -> "SchwartzBruhat":
        """The indicator of the unit polydisc Z_p^n."""
        return cls(n, (BallTerm((Fraction(0),) * n, 0, Fraction(1)),))

    @classmethod
    def ball(cls, center: Sequence[Rational], k: int, weight: Rational = 1) -> "SchwartzBruhat":
        c = tuple(Fraction(x) for x in center)
        return cls(len(c), (BallTerm(c, k, Fraction(weight)),))

    def l1_upper_bound(self, p: int) -> Fraction:
        """sum |weight| * measure(ball): an exact upper bound for the L1 norm."""
        return sum(
            (abs(t.weight) * Fraction(p) ** (-t.k * self.n) for t in self.terms),
            Fraction(0),
        )

    def supported_in_unit_polydisc(self, p: int) -> bool:
        return all(
            t.k >= 0 and all(valuation(c, p) >= 0 for c in t.center) for t in self.terms
        )

    def to_json_list(self) -> list:
        return [
            {"center": [str(c) for c in t.center], "k": t.k, "weight": str(t.weight)}
            for t in self.terms
        ]

    @classmethod
    def from_json_list(cls, data: list, n: int | None = None) -> "SchwartzBruhat":
        terms = tuple(
            BallTerm(
                tuple(Fraction(c) for c in d["center"]),
                int(d["k"]),
                Fraction(d["weight"]),
            )
            for d in data
        )
        if not terms:
            raise ValueError("phi needs at least one ball term")
        return cls(n if n is not None else len(terms[0].center), terms)
