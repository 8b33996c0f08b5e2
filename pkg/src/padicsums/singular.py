"""Fiber counting, local solution densities, and the finite-level Fourier
identity.

N_m(z) counts residue tuples x mod p**m with f(x) = z mod p**m; the density
F_m(z) = N_m(z) * p**(m*(r-n)) is the level-m avatar of the local singular
series.  Because phases of y . f(x) with v(y) >= -m only depend on f(x)
mod p**m, regrouping the oscillatory sum by fiber gives an exact identity

    E(y) = sum_z N_m(z) * p**(-m*n) * psi(y . z),

whose residual is checked to be the exact zero histogram.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, TextIO

import numpy as np

from .errors import BudgetExceededError, PreconditionError
from .expsum import EvalRequest, _classify, _shift_digit_mod, eval_naive
from .padic import PhaseHistogram, PrimeContext, Rational, fractional_part, valuation
from .polymap import (
    PolyMap,
    coefficient_floor,
    jacobian,
    matrix_rank_with_valuations,
    poly_eval,
    poly_mod_int,
)

FiberKey = tuple[Fraction, ...] | tuple[int, ...]


@dataclass
class DensityTable:
    """Exact fiber counts N_m(z) for z in (Z/p**m)^r.

    ``clear`` is the denominator exponent B of the map: counts are taken at
    the effective level m + B and keyed by integer representatives when
    B = 0, by Fractions with denominator p**B otherwise.
    """

    p: int
    level: int
    n: int
    r: int
    clear: int
    counts: dict[FiberKey, int]

    def count(self, z: Sequence[Rational]) -> int:
        key = self._key(z)
        return 0 if key is None else self.counts.get(key, 0)

    def density(self, z: Sequence[Rational]) -> Fraction:
        """F_m(z) = N_m(z) * p**(m*r - (m+B)*n); the usual N * p**(m*(r-n))
        when the map has integral coefficients (B = 0)."""
        return self.count(z) * self._density_scale()

    def _density_scale(self) -> Fraction:
        return Fraction(self.p) ** (
            self.level * self.r - (self.level + self.clear) * self.n
        )

    def _key(self, z: Sequence[Rational]) -> FiberKey | None:
        """Canonical residue key of z mod p**level, or None when some
        component lies outside p**(-clear) Z_p (such z have no solutions)."""
        mod = self.p ** (self.level + self.clear)
        out = []
        for c in z:
            shifted = Fraction(c) * self.p**self.clear
            if valuation(shifted, self.p) < 0:
                return None
            den = shifted.denominator  # a p-unit here
            rep = shifted.numerator * pow(den, -1, mod) % mod if mod > 1 else 0
            out.append(Fraction(rep, self.p**self.clear) if self.clear else int(rep))
        return tuple(out)

    def total(self) -> int:
        return sum(self.counts.values())

    def sorted_items(self) -> list[tuple[FiberKey, int]]:
        return sorted(self.counts.items())

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out)
        writer.writerow([f"z_{i+1}" for i in range(self.r)] + ["N", "F"])
        scale = self._density_scale()
        for key, count in self.sorted_items():
            writer.writerow([str(c) for c in key] + [count, str(count * scale)])

    def to_json_dict(self) -> dict:
        scale = self._density_scale()
        return {
            "p": self.p,
            "level": self.level,
            "n": self.n,
            "r": self.r,
            "rows": [
                {"z": [str(c) for c in key], "N": count, "F": str(count * scale)}
                for key, count in self.sorted_items()
            ],
        }


def _integerized_components(f: PolyMap, m: int, p: int):
    b = coefficient_floor(f.components, p)
    mod = p ** (m + b)
    return b, mod, [poly_mod_int(comp, p, b, mod) for comp in f.components]


def _decode_key(values: Sequence[int], clear: int, p: int) -> FiberKey:
    if clear == 0:
        return tuple(int(v) for v in values)
    den = p**clear
    return tuple(Fraction(int(v), den) for v in values)


def _count_naive(f: PolyMap, m: int, ctx: PrimeContext) -> DensityTable:
    p = ctx.p
    n = f.n
    b, mod, comps = _integerized_components(f, m, p)
    needed = mod**n
    if needed > ctx.naive_budget:
        raise BudgetExceededError(needed, ctx.naive_budget)
    if mod > 2**31 or mod ** f.r > 2**62:
        values = _eval_grid_python(comps, mod, n)
    else:
        values = _eval_grid_numpy(comps, mod, n)
    encoded = values[0]
    for arr in values[1:]:
        encoded = encoded * mod + arr
    uniq, cnt = np.unique(np.asarray(encoded).ravel(), return_counts=True)
    counts: dict[FiberKey, int] = {}
    for enc, c in zip(uniq.tolist(), cnt.tolist()):
        digits = []
        for _ in range(f.r):
            digits.append(enc % mod)
            enc //= mod
        counts[_decode_key(tuple(reversed(digits)), b, p)] = int(c)
    return DensityTable(p, m, n, f.r, b, counts)


def _eval_grid_numpy(comps, mod: int, n: int):
    base = np.arange(mod, dtype=np.int64)
    max_e = [
        max((exp[i] for comp in comps for exp in comp), default=0) for i in range(n)
    ]
    powers = []
    for i in range(n):
        tab = [np.ones(mod, dtype=np.int64)]
        for _ in range(max_e[i]):
            tab.append(tab[-1] * base % mod)
        powers.append(tab)
    shape = tuple([mod] * n)
    out = []
    for comp in comps:
        acc = np.zeros(shape, dtype=np.int64)
        for exp, c in comp.items():
            term = None
            for i, e in enumerate(exp):
                if e == 0:
                    continue
                arr = powers[i][e].reshape([-1 if j == i else 1 for j in range(n)])
                term = arr if term is None else term * arr % mod
            acc = (acc + c) % mod if term is None else (acc + c * term) % mod
        out.append(acc)
    return out


def _eval_grid_python(comps, mod: int, n: int):
    points = list(itertools.product(range(mod), repeat=n))
    out = []
    for comp in comps:
        vals = []
        for x in points:
            total = 0
            for exp, c in comp.items():
                term = c
                for xi, e in zip(x, exp):
                    if e:
                        term = term * pow(xi, e, mod) % mod
                total = (total + term) % mod
            vals.append(total)
        out.append(np.array(vals, dtype=object))
    return out


def _count_recursive(f: PolyMap, m: int, ctx: PrimeContext) -> DensityTable:
    """Coset descent: a coset is resolved once every component is constant
    mod p**m on it, contributing its size to that constant's fiber."""
    p = ctx.p
    n = f.n
    b, mod, comps = _integerized_components(f, m, p)
    m_eff = m + b
    zero = (0,) * n
    counts: dict[FiberKey, int] = {}
    stack = [(0, comps)]
    while stack:
        k, polys = stack.pop()
        if all(_classify(g, n) == "p1" for g in polys):
            key = _decode_key([g.get(zero, 0) % mod for g in polys], b, p)
            counts[key] = counts.get(key, 0) + p ** ((m_eff - k) * n)
            continue
        children = [
            (k + 1, [_shift_digit_mod(g, delta, p, mod) for g in polys])
            for delta in itertools.product(range(p), repeat=n)
        ]
        stack.extend(reversed(children))
    return DensityTable(p, m, n, f.r, b, counts)


def count_fibers(
    f: PolyMap, m: int, ctx: PrimeContext, strategy: str = "auto"
) -> DensityTable:
    """N_m(z) for every z, exact.

    ``auto`` enumerates when the effective residue space fits the budget and
    falls back to the recursive counter otherwise; ``naive`` raises on budget
    overrun instead.
    """
    if m < 0:
        raise PreconditionError("level must be >= 0")
    if strategy == "naive":
        return _count_naive(f, m, ctx)
    if strategy == "recursive":
        return _count_recursive(f, m, ctx)
    if strategy != "auto":
        raise ValueError(f"unknown strategy {strategy!r}")
    b = coefficient_floor(f.components, ctx.p)
    if (ctx.p ** (m + b)) ** f.n <= ctx.naive_budget:
        return _count_naive(f, m, ctx)
    return _count_recursive(f, m, ctx)


def fourier_check(
    f: PolyMap, y: Sequence[Rational], m: int, ctx: PrimeContext
) -> PhaseHistogram:
    """Residual of the fiber-regrouping identity at level m; exactly zero.

    Requires v(y_j) >= -m for every component, since only then does the
    phase of y . f(x) depend on f(x) mod p**m alone.
    """
    p = ctx.p
    ys = [Fraction(v) for v in y]
    for v in ys:
        if v != 0 and valuation(v, p) < -m:
            raise PreconditionError(
                f"component {v} has valuation below -{m}; raise the level"
            )
    direct = eval_naive(EvalRequest.of(f, ys, ctx)).histogram
    table = count_fibers(f, m, ctx)
    m_eff = m + table.clear
    phases = []
    for key, count in table.sorted_items():
        dot = sum((yv * Fraction(z) for yv, z in zip(ys, key)), Fraction(0))
        phases.append((fractional_part(dot, p), count))
    synth = PhaseHistogram.from_phase_counts(
        p, phases, Fraction(p) ** (-m_eff * f.n)
    )
    return direct + synth.scaled(-1)


@dataclass
class StabilizationReport:
    """Density trace F_m(z) across a level window plus Jacobian-rank evidence
    gathered at sampled preimages of the top level."""

    z: tuple[int, ...]
    levels: list[int]
    n_values: list[int]
    f_values: list[Fraction]
    stable: bool
    stable_from: int | None
    preimage_count: int
    sampled_preimages: list[tuple[int, ...]]
    ranks: list[int]
    pivot_valuations: list[list[int | float]]
    max_rank: int
    full_rank: bool

    def to_json_dict(self) -> dict:
        return {
            "z": list(self.z),
            "levels": self.levels,
            "N": self.n_values,
            "F": [str(v) for v in self.f_values],
            "stable": self.stable,
            "stable_from": self.stable_from,
            "preimage_count": self.preimage_count,
            "sampled_preimages": [list(x) for x in self.sampled_preimages],
            "ranks": self.ranks,
            "max_rank": self.max_rank,
            "full_rank": self.full_rank,
        }


def stabilization_probe(
    f: PolyMap,
    z: Sequence[int],
    m_range: tuple[int, int],
    ctx: PrimeContext,
    sample_limit: int = 16,
) -> StabilizationReport:
    """Track F_m(z) over [m0, m1] and flag whether it stabilizes.

    Full Jacobian rank at every preimage is the computational signature of a
    regular value, for which the density is expected to become constant in m.
    The ranks are evidence only: preimages are known only mod p**m1.
    """
    m0, m1 = m_range
    if not (1 <= m0 <= m1):
        raise PreconditionError("need 1 <= m0 <= m1")
    p = ctx.p
    zt = tuple(int(c) for c in z)
    if len(zt) != f.r:
        raise ValueError("target arity must equal component count")
    levels = list(range(m0, m1 + 1))
    n_values = []
    f_values = []
    for m in levels:
        table = count_fibers(f, m, ctx)
        n_values.append(table.count(zt))
        f_values.append(table.density(zt))
    stable_from = None
    for i in range(len(levels)):
        if all(f_values[j] == f_values[i] for j in range(i, len(levels))):
            stable_from = levels[i]
            break
    stable = stable_from is not None and stable_from < m1
    preimages = _preimages(f, zt, m1, ctx, sample_limit)
    jac = jacobian(f)
    ranks = []
    pivot_vals = []
    for x in preimages[1]:
        matrix = [[poly_eval(entry, x) for entry in row] for row in jac]
        rank, pivots = matrix_rank_with_valuations(matrix, p)
        ranks.append(rank)
        pivot_vals.append(pivots)
    max_rank = min(f.r, f.n)
    return StabilizationReport(
        z=zt,
        levels=levels,
        n_values=n_values,
        f_values=f_values,
        stable=stable,
        stable_from=stable_from,
        preimage_count=preimages[0],
        sampled_preimages=preimages[1],
        ranks=ranks,
        pivot_valuations=pivot_vals,
        max_rank=max_rank,
        full_rank=bool(preimages[1]) and all(r == max_rank for r in ranks),
    )


def _preimages(
    f: PolyMap, z: tuple[int, ...], m: int, ctx: PrimeContext, limit: int
) -> tuple[int, list[tuple[int, ...]]]:
    """(total count, first ``limit`` solutions of f(x) = z mod p**m in lex order)."""
    p = ctx.p
    n = f.n
    b, mod, comps = _integerized_components(f, m, p)
    needed = mod**n
    if needed > ctx.naive_budget:
        raise BudgetExceededError(needed, ctx.naive_budget)
    target = [c * p**b % mod for c in z]
    total = 0
    found: list[tuple[int, ...]] = []
    for x in itertools.product(range(mod), repeat=n):
        ok = True
        for g, t in zip(comps, target):
            val = 0
            for exp, c in g.items():
                term = c
                for xi, e in zip(x, exp):
                    if e:
                        term = term * pow(xi, e, mod) % mod
                val = (val + term) % mod
            if val != t:
                ok = False
                break
        if ok:
            total += 1
            if len(found) < limit:
                found.append(x)
    return total, found
