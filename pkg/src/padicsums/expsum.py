"""Evaluators for p-adic oscillatory integrals with polynomial phase.

For a phase polynomial g = sum_j y_j f_j and a coset c + p**k Z_p^n, the
integral of psi(g(x)) reduces to a finite normalized character sum: clearing
denominators writes g = G / p**M with G an integer polynomial determined
mod p**M, and the phase class of a point depends only on its residue
mod p**M.  ``eval_naive`` enumerates that residue space.  ``eval_recursive``
descends through sub-cosets a + p**k Z_p^n; writing
H(t) = G(a + p**k t) - G(a), a coset is resolved without enumeration when

  (P1) every nonconstant coefficient of H vanishes mod p**M: the coset
       carries the single phase G(a) with its full measure; or
  (P2) every nonlinear coefficient vanishes mod p**M while some linear one
       does not: the remaining sum is a complete nontrivial character sum
       over the next digit layer and cancels exactly.

Otherwise the coset splits into its p**n sub-cosets.  Each monomial of
degree d picks up a factor p**(k*d) at depth k, so by depth M rule P1 always
fires and the recursion terminates.  Both evaluators return the same exact
value; equality of reduced histograms is the cross-check used throughout
the test suite.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceededError, PreconditionError
from .padic import (
    INFINITY,
    PAdicRational,
    PhaseHistogram,
    PrimeContext,
    Rational,
)
from .polymap import (
    Exponent,
    Poly,
    PolyMap,
    RestrictedSeries,
    SchwartzBruhat,
    coefficient_floor,
    min_coefficient_valuation,
    poly_add,
    poly_mod_int,
    poly_scale,
    series_truncate,
    substitute_affine,
)

IntPoly = dict[Exponent, int]


@dataclass
class PruneStats:
    """Work accounting: prune hits and splits for the recursive evaluator,
    enumerated point count for the naive one."""

    p1: int = 0
    p2: int = 0
    splits: int = 0
    leaves: int = 0
    points: int = 0

    def __add__(self, other: "PruneStats") -> "PruneStats":
        return PruneStats(
            self.p1 + other.p1,
            self.p2 + other.p2,
            self.splits + other.splits,
            self.leaves + other.leaves,
            self.points + other.points,
        )

    def to_json_dict(self) -> dict:
        return {
            "p1": self.p1,
            "p2": self.p2,
            "splits": self.splits,
            "leaves": self.leaves,
            "points": self.points,
        }


@dataclass(frozen=True)
class EvalRequest:
    """One integral: map, weight function, frequency vector, context."""

    f: PolyMap
    phi: SchwartzBruhat
    y: tuple[PAdicRational, ...]
    ctx: PrimeContext

    def __post_init__(self):
        if len(self.y) != self.f.r:
            raise ValueError("frequency vector length must equal component count")
        if self.phi.n != self.f.n:
            raise ValueError("phi arity must equal variable count")

    @classmethod
    def of(
        cls,
        f: PolyMap,
        y: Sequence[Rational],
        ctx: PrimeContext,
        phi: SchwartzBruhat | None = None,
    ) -> "EvalRequest":
        return cls(
            f,
            phi if phi is not None else SchwartzBruhat.trivial(f.n),
            tuple(PAdicRational.of(v, ctx.p) for v in y),
            ctx,
        )

    @property
    def level(self) -> int:
        """m = max(0, max_j -v(y_j)): the frequency level |y| = p**m."""
        finite = [-r.v for r in self.y if r.v is not INFINITY]
        return max(0, max(finite, default=0))

    @property
    def effective_level(self) -> int:
        """m + B: the modulus exponent that determines all phases on Z_p^n."""
        return self.level + coefficient_floor(self.f.components, self.ctx.p)

    def phase_poly(self) -> Poly:
        g: Poly = {}
        for yj, comp in zip(self.y, self.f.components):
            if yj.value:
                g = poly_add(g, poly_scale(comp, yj.value))
        return g


@dataclass
class EvalResult:
    histogram: PhaseHistogram
    stats: PruneStats


# ------------------------------------------------------------- integer phases


def _integer_phase(g: Poly, p: int) -> tuple[int, IntPoly]:
    """(M, G) with g congruent to G/p**M mod Z_p on Z_p^n and G reduced mod p**M.

    Adding any Z_p-coefficient polynomial to g leaves all phases psi(g(x))
    unchanged, so reducing the cleared coefficients mod p**M is exact.
    """
    v = min_coefficient_valuation(g, p)
    m = 0 if v is INFINITY or v >= 0 else int(-v)
    if m == 0:
        return 0, {}
    return m, poly_mod_int(g, p, m, p**m)


def _shift_digit_mod(g: IntPoly, delta: Sequence[int], p: int, mod: int) -> IntPoly:
    """G(delta + p*t) reduced mod ``mod``, variable by variable."""
    out = g
    for i, d in enumerate(delta):
        nxt: IntPoly = {}
        for exp, c in out.items():
            e = exp[i]
            if e == 0:
                nc = (nxt.get(exp, 0) + c) % mod
                if nc:
                    nxt[exp] = nc
                else:
                    nxt.pop(exp, None)
                continue
            powd = 1
            # expand (d + p*t)^e; iterate j descending so d-powers build up
            for j in range(e, -1, -1):
                term = c * comb(e, j) * powd % mod * pow(p, j, mod) % mod
                powd = powd * d % mod
                if not term:
                    continue
                nexp = exp[:i] + (j,) + exp[i + 1 :]
                nc = (nxt.get(nexp, 0) + term) % mod
                if nc:
                    nxt[nexp] = nc
                else:
                    nxt.pop(nexp, None)
        out = nxt
    return out


def _classify(g: IntPoly, n: int) -> str:
    """Prune decision for the coset with shifted phase polynomial g."""
    zero = (0,) * n
    has_linear = False
    for exp in g:
        if exp == zero:
            continue
        if sum(exp) >= 2:
            return "split"
        has_linear = True
    return "p2" if has_linear else "p1"


def _collect_leaves(
    g: IntPoly, level: int, n: int, p: int, depth: int = 0
) -> tuple[list[tuple[int, int]], PruneStats]:
    """DFS over cosets; returns the P1 leaves as (phase class, weight) pairs.

    Weights are coset sizes in units of p**(-level*n); the leaf list order is
    the deterministic digit-lexicographic traversal order.
    """
    mod = p**level
    zero = (0,) * n
    leaves: list[tuple[int, int]] = []
    stats = PruneStats()
    stack: list[tuple[int, IntPoly]] = [(depth, g)]
    while stack:
        k, poly = stack.pop()
        kind = _classify(poly, n)
        if kind == "p1":
            stats.p1 += 1
            stats.leaves += 1
            leaves.append((poly.get(zero, 0) % mod, p ** ((level - k) * n)))
        elif kind == "p2":
            stats.p2 += 1
            stats.leaves += 1
        else:
            stats.splits += 1
            children = [
                (k + 1, _shift_digit_mod(poly, delta, p, mod))
                for delta in itertools.product(range(p), repeat=n)
            ]
            stack.extend(reversed(children))  # preserve lexicographic order
    return leaves, stats


def _leaves_to_counts(leaves: list[tuple[int, int]]) -> dict[int, int]:
    counts: dict[int, int] = {}
    for cls, w in leaves:
        counts[cls] = counts.get(cls, 0) + w
    return counts


def _recursive_counts(
    g: IntPoly, level: int, n: int, p: int, workers: int
) -> tuple[dict[int, int], PruneStats]:
    if workers <= 1 or _classify(g, n) != "split":
        leaves, stats = _collect_leaves(g, level, n, p)
        return _leaves_to_counts(leaves), stats
    # Parallelism splits the first digit layer; merging per-child results in
    # digit order keeps the outcome identical for every worker count.
    mod = p**level
    stats = PruneStats(splits=1)
    children = [
        _shift_digit_mod(g, delta, p, mod)
        for delta in itertools.product(range(p), repeat=n)
    ]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(
            pool.map(lambda child: _collect_leaves(child, level, n, p, depth=1), children)
        )
    merged: list[tuple[int, int]] = []
    for leaves, st in results:
        merged.extend(leaves)
        stats = stats + st
    return _leaves_to_counts(merged), stats


def _naive_counts(
    g: IntPoly, level: int, n: int, p: int, budget: int
) -> tuple[dict[int, int], PruneStats]:
    """Histogram counts of G(x) mod p**level over all residue tuples."""
    mod = p**level
    needed = mod**n
    if needed > budget:
        raise BudgetExceededError(needed, budget)
    if level == 0:
        return {0: 1}, PruneStats(points=1)
    if mod > 2**31:
        # int64 products would overflow; fall back to exact big-int loops
        counts: dict[int, int] = {}
        for x in itertools.product(range(mod), repeat=n):
            val = 0
            for exp, c in g.items():
                term = c
                for xi, e in zip(x, exp):
                    if e:
                        term = term * pow(xi, e, mod) % mod
                val = (val + term) % mod
            counts[val] = counts.get(val, 0) + 1
        return counts, PruneStats(points=needed)
    base = np.arange(mod, dtype=np.int64)
    powers = []
    max_e = [max((exp[i] for exp in g), default=0) for i in range(n)]
    for i in range(n):
        tab = [np.ones(mod, dtype=np.int64)]
        for _ in range(max_e[i]):
            tab.append(tab[-1] * base % mod)
        powers.append(tab)
    shape = tuple([mod] * n)
    acc = np.zeros(shape, dtype=np.int64)
    for exp, c in g.items():
        term = None
        for i, e in enumerate(exp):
            if e == 0:
                continue
            arr = powers[i][e].reshape([-1 if j == i else 1 for j in range(n)])
            term = arr if term is None else term * arr % mod
        if term is None:
            acc = (acc + c) % mod
        else:
            acc = (acc + c * term) % mod
    counts = np.bincount(acc.ravel(), minlength=0)
    nz = np.flatnonzero(counts)
    return {int(k): int(counts[k]) for k in nz}, PruneStats(points=needed)


# ------------------------------------------------------------------ evaluators


def _eval_terms(req: EvalRequest, method: str, workers: int) -> EvalResult:
    p = req.ctx.p
    n = req.f.n
    g = req.phase_poly()
    total = PhaseHistogram.zero(p)
    stats = PruneStats()
    for ball in req.phi.terms:
        gb = substitute_affine(g, ball.center, Fraction(p) ** ball.k, n)
        m_eff, gint = _integer_phase(gb, p)
        if method == "naive":
            counts, st = _naive_counts(gint, m_eff, n, p, req.ctx.naive_budget)
        else:
            counts, st = _recursive_counts(gint, m_eff, n, p, workers)
        scale = ball.weight * Fraction(p) ** (-(ball.k + m_eff) * n)
        total = total + PhaseHistogram(p, m_eff, counts, scale)
        stats = stats + st
    return EvalResult(total, stats)


def eval_naive(req: EvalRequest, workers: int = 1) -> EvalResult:
    """Exact value by full enumeration of the determining residue space.

    Requires p**(M*n) <= ctx.naive_budget for the effective level M of every
    ball of phi (after the affine substitution into the unit polydisc).
    The result is independent of ``workers``.
    """
    del workers  # enumeration order never affects the tallied counts
    return _eval_terms(req, "naive", 1)


def eval_recursive(req: EvalRequest, workers: int = 1) -> EvalResult:
    """Exact value by pruned descent; no budget bound, depth <= level + B."""
    return _eval_terms(req, "recursive", workers)


def eval_series(
    series: Sequence[RestrictedSeries],
    phi: SchwartzBruhat,
    y: Sequence[Rational],
    ctx: PrimeContext,
    workers: int = 1,
) -> EvalResult:
    """Evaluate with restricted power series components via truncation.

    Components are truncated at the frequency level m: for x in the unit
    polydisc the discarded tails lie in p**m Z_p, and v(y_j) >= -m makes
    their phase contribution vanish, so the truncated value is exact.
    """
    p = ctx.p
    if not phi.supported_in_unit_polydisc(p):
        raise PreconditionError(
            "series evaluation requires phi supported in the unit polydisc"
        )
    ys = tuple(PAdicRational.of(v, p) for v in y)
    finite = [-r.v for r in ys if r.v is not INFINITY]
    m = max(0, max(finite, default=0))
    comps = tuple(series_truncate(s, m, p) for s in series)
    n = series[0].n
    f = PolyMap(n, comps)
    return eval_recursive(EvalRequest(f, phi, ys, ctx), workers)


# --------------------------------------------------------------- unit sweeps


def unit_directions(p: int, m: int) -> Iterator[int]:
    """All u in [1, p**m) coprime to p, ascending."""
    for u in range(1, p**m):
        if u % p:
            yield u


def eval_unit_directions(
    f: PolyMap,
    phi: SchwartzBruhat,
    m: int,
    ctx: PrimeContext,
    reduce: bool = True,
) -> Iterator[tuple[int, PhaseHistogram]]:
    """Histograms of E(u / p**m) for every unit u, sharing one descent tree.

    Only for r = 1.  A unit u rescales every coefficient of the phase
    polynomial by a p-adic unit, so the coset classification (vanishing of
    coefficients mod p**M) is identical for all u: the P1 leaves are computed
    once and each direction only relabels their phase classes by u.
    """
    if f.r != 1:
        raise ValueError("unit-direction sweep applies to single-component maps")
    if m < 1:
        raise ValueError("sweep level must be >= 1")
    p = ctx.p
    n = f.n
    g = poly_scale(f.components[0], Fraction(1, p**m))
    per_ball = []
    for ball in phi.terms:
        gb = substitute_affine(g, ball.center, Fraction(p) ** ball.k, n)
        m_eff, gint = _integer_phase(gb, p)
        leaves, _ = _collect_leaves(gint, m_eff, n, p)
        scale = ball.weight * Fraction(p) ** (-(ball.k + m_eff) * n)
        per_ball.append((m_eff, scale, leaves))
    for u in unit_directions(p, m):
        total = PhaseHistogram.zero(p)
        for m_eff, scale, leaves in per_ball:
            mod = p**m_eff
            counts: dict[int, int] = {}
            for cls, w in leaves:
                key = cls * u % mod
                counts[key] = counts.get(key, 0) + w
            total = total + PhaseHistogram(p, m_eff, counts, scale)
        yield u, (total.reduced() if reduce else total)
