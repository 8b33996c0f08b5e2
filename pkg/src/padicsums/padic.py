"""Exact p-adic scalars and cyclotomic phase histograms.

Oscillatory sums over residue rings take values of the form

    scale * sum_k counts[k] * zeta**k,      zeta = exp(2*pi*i / p**M),

with integer counts and a rational scale.  ``PhaseHistogram`` carries such
values exactly, so equality and zero tests are independent of summation
order and of how the value was produced.  Floating point enters only in
``PhaseHistogram.magnitude``.

The canonical form produced by ``reduced`` uses the Z-basis
``{zeta**k : 0 <= k < phi(p**M)}`` of the ring of integers: every class
``k >= phi(p**M)`` is eliminated through the relation
``sum_{t<p} zeta**(j + t*p**(M-1)) = 0``, the level is dropped while every
remaining class index is divisible by p, and the integer content of the
counts is folded into the scale.  Two histograms represent the same value
iff their reduced forms are identical, which is what the cross-evaluator
tests rely on.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

INFINITY = math.inf

#: Default cap on the number of residue tuples a brute-force enumeration may
#: visit.  Overridable per context and via the CLI / environment.
DEFAULT_NAIVE_BUDGET = 1_000_000

#: Constant in the reported absolute error bound of ``magnitude``:
#: err <= |scale| * sum|counts| * MAGNITUDE_ERROR_CONSTANT * machine epsilon.
#: Covers argument reduction, cos/sin rounding and the final hypot.
MAGNITUDE_ERROR_CONSTANT = 8.0

Rational = Fraction | int


def is_prime(n: int) -> bool:
    """Deterministic primality test by trial division (inputs here are small)."""
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def _int_valuation(n: int, p: int) -> int:
    """Exponent of p in a nonzero integer."""
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def valuation(x: Rational, p: int) -> int | float:
    """p-adic valuation of a rational; +infinity for 0.

    Satisfies v(a/b) = v(a) - v(b) for integers a, b.
    """
    x = Fraction(x)
    if x == 0:
        return INFINITY
    return _int_valuation(x.numerator, p) - _int_valuation(x.denominator, p)


def norm(x: Rational, p: int) -> Fraction:
    """p-adic norm p**(-v(x)) as an exact rational; |0| = 0."""
    v = valuation(x, p)
    if v == INFINITY:
        return Fraction(0)
    return Fraction(p) ** (-v)


@dataclass(frozen=True)
class PrimeContext:
    """The prime, plus global budgets shared by all enumeration strategies."""

    p: int
    naive_budget: int = DEFAULT_NAIVE_BUDGET

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p = {self.p} is not prime")
        if self.naive_budget < 1:
            raise ValueError("naive_budget must be >= 1")


@dataclass(frozen=True)
class PAdicRational:
    """A rational number viewed inside Q_p, with its valuation cached."""

    value: Fraction
    v: int | float

    @classmethod
    def of(cls, x: Rational, p: int) -> "PAdicRational":
        x = Fraction(x)
        return cls(x, valuation(x, p))

    def norm(self, p: int) -> Fraction:
        if self.v == INFINITY:
            return Fraction(0)
        return Fraction(p) ** (-self.v)


@dataclass(frozen=True)
class PhaseFraction:
    """Canonical representative u / p**level of a rational modulo Z_p.

    level is minimal: either level == 0 (the class of Z_p itself) or the
    numerator is coprime to p.
    """

    level: int
    numerator: int

    def as_fraction(self, p: int) -> Fraction:
        return Fraction(self.numerator, p**self.level)


def fractional_part(x: Rational, p: int) -> PhaseFraction:
    """The class of x modulo Z_p, as a canonical PhaseFraction.

    The p-unit part of the denominator is inverted modulo the p-power part,
    so every rational has a representative u / p**M with 0 <= u < p**M.
    """
    x = Fraction(x)
    den = x.denominator
    e = _int_valuation(den, p)
    if e == 0:
        return PhaseFraction(0, 0)
    pe = p**e
    unit = den // pe
    u = (x.numerator * pow(unit, -1, pe)) % pe
    # x in lowest terms with p | den forces p coprime to the numerator,
    # hence to u: the representative is already canonical.
    return PhaseFraction(e, u)


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    """Positive generator of the fractional ideal aZ + bZ."""
    num = math.gcd(a.numerator * b.denominator, b.numerator * a.denominator)
    return Fraction(num, a.denominator * b.denominator)


@dataclass
class PhaseHistogram:
    """scale * sum_k counts[k] * zeta(p**level)**k with exact integer counts.

    Treat instances as immutable: every operation returns a new histogram.
    Counts are stored sparsely; bulk evaluators build the dict in one pass
    via ``from_phase_counts``.
    """

    p: int
    level: int
    counts: dict[int, int] = field(default_factory=dict)
    scale: Fraction = Fraction(1)

    @classmethod
    def zero(cls, p: int) -> "PhaseHistogram":
        return cls(p, 0, {}, Fraction(1))

    @classmethod
    def from_phase_counts(
        cls,
        p: int,
        phases: Iterable[tuple[PhaseFraction, int]],
        scale: Rational = 1,
    ) -> "PhaseHistogram":
        """Accumulate many (phase, weight) pairs in a single pass."""
        items = list(phases)
        level = max((ph.level for ph, _ in items), default=0)
        counts: dict[int, int] = {}
        for ph, w in items:
            key = ph.numerator * p ** (level - ph.level)
            c = counts.get(key, 0) + w
            if c:
                counts[key] = c
            else:
                counts.pop(key, None)
        return cls(p, level, counts, Fraction(scale))

    # ------------------------------------------------------------------ algebra

    def _lifted_counts(self, level: int) -> dict[int, int]:
        if level == self.level:
            return dict(self.counts)
        step = self.p ** (level - self.level)
        return {k * step: c for k, c in self.counts.items()}

    def accumulated(self, phase: PhaseFraction, weight: int = 1) -> "PhaseHistogram":
        """Add ``weight`` (in units of the current scale) to the class of ``phase``."""
        level = max(self.level, phase.level)
        counts = self._lifted_counts(level)
        key = phase.numerator * self.p ** (level - phase.level)
        c = counts.get(key, 0) + weight
        if c:
            counts[key] = c
        else:
            counts.pop(key, None)
        return PhaseHistogram(self.p, level, counts, self.scale)

    def scaled(self, q: Rational) -> "PhaseHistogram":
        return PhaseHistogram(self.p, self.level, dict(self.counts), self.scale * Fraction(q))

    def __add__(self, other: "PhaseHistogram") -> "PhaseHistogram":
        if self.p != other.p:
            raise ValueError("cannot add histograms over different primes")
        if other.scale == 0 or not other.counts:
            return PhaseHistogram(self.p, self.level, dict(self.counts), self.scale)
        if self.scale == 0 or not self.counts:
            return PhaseHistogram(other.p, other.level, dict(other.counts), other.scale)
        level = max(self.level, other.level)
        scale = _fraction_gcd(self.scale, other.scale)
        f1 = int(self.scale / scale)
        f2 = int(other.scale / scale)
        counts = {k: c * f1 for k, c in self._lifted_counts(level).items()}
        for k, c in other._lifted_counts(level).items():
            nc = counts.get(k, 0) + c * f2
            if nc:
                counts[k] = nc
            else:
                counts.pop(k, None)
        return PhaseHistogram(self.p, level, counts, scale)

    def rotated(self, phase: PhaseFraction) -> "PhaseHistogram":
        """Multiply the represented value by zeta**phase."""
        level = max(self.level, phase.level)
        mod = self.p**level
        shift = phase.numerator * self.p ** (level - phase.level)
        counts: dict[int, int] = {}
        for k, c in self._lifted_counts(level).items():
            counts[(k + shift) % mod] = counts.get((k + shift) % mod, 0) + c
        return PhaseHistogram(self.p, level, counts, self.scale)

    def conjugate(self) -> "PhaseHistogram":
        mod = self.p**self.level
        counts: dict[int, int] = {}
        for k, c in self.counts.items():
            counts[(-k) % mod] = counts.get((-k) % mod, 0) + c
        return PhaseHistogram(self.p, self.level, counts, self.scale)

    def abs_square(self) -> "PhaseHistogram":
        """Histogram of |value|**2 = value * conj(value).

        Quadratic in the number of stored classes; intended for reduced
        histograms, where it decides magnitude comparisons exactly.
        """
        mod = self.p**self.level
        conj = self.conjugate()
        counts: dict[int, int] = {}
        for k1, c1 in self.counts.items():
            for k2, c2 in conj.counts.items():
                k = (k1 + k2) % mod
                nc = counts.get(k, 0) + c1 * c2
                if nc:
                    counts[k] = nc
                else:
                    counts.pop(k, None)
        return PhaseHistogram(self.p, self.level, counts, self.scale * self.scale)

    # ------------------------------------------------------------- normal form

    def reduced(self) -> "PhaseHistogram":
        """Canonical form: same value, basis-supported counts, minimal level,
        content folded into a positive scale.  Idempotent."""
        p = self.p
        level = self.level
        scale = self.scale
        mod = p**level
        counts: dict[int, int] = {}
        for k, c in self.counts.items():
            if c:
                counts[k % mod] = counts.get(k % mod, 0) + c
        counts = {k: c for k, c in counts.items() if c}
        if scale == 0 or not counts:
            return PhaseHistogram.zero(p)
        while level > 0:
            period = p ** (level - 1)
            top = period * (p - 1)  # phi(p**level)
            for k in [k for k in counts if k >= top]:
                c = counts.pop(k)
                # zeta**k = -(zeta**(k-q) + ... + zeta**(k-(p-1)q)), q = p**(level-1)
                for t in range(1, p):
                    kk = k - t * period
                    nc = counts.get(kk, 0) - c
                    if nc:
                        counts[kk] = nc
                    else:
                        counts.pop(kk, None)
            if not counts:
                return PhaseHistogram.zero(p)
            if all(k % p == 0 for k in counts):
                counts = {k // p: c for k, c in counts.items()}
                level -= 1
            else:
                break
        if level == 0:
            return PhaseHistogram(p, 0, {0: 1}, scale * counts[0])
        if scale < 0:
            scale = -scale
            counts = {k: -c for k, c in counts.items()}
        content = math.gcd(*counts.values())
        if content > 1:
            counts = {k: c // content for k, c in counts.items()}
            scale = scale * content
        return PhaseHistogram(p, level, dict(sorted(counts.items())), scale)

    def is_zero(self) -> bool:
        """Exact zero test of the represented cyclotomic value."""
        if self.scale == 0:
            return True
        return not self.reduced().counts

    def equals_value(self, other: "PhaseHistogram") -> bool:
        """Exact equality of represented values (scales may differ)."""
        return (self + other.scaled(-1)).is_zero()

    def exact_rational(self) -> Fraction | None:
        """The represented value as a Fraction if it is rational, else None."""
        r = self.reduced()
        if not r.counts:
            return Fraction(0)
        if r.level == 0:
            return r.scale
        return None

    # -------------------------------------------------------------- numerics

    def magnitude(self) -> tuple[float, float]:
        """(|value| as a float, absolute error bound).

        The bound is |scale| * sum|counts| * MAGNITUDE_ERROR_CONSTANT * eps.
        """
        if self.scale == 0 or not self.counts:
            return 0.0, 0.0
        n = self.p**self.level
        tau = 2.0 * math.pi
        re = math.fsum(c * math.cos(tau * k / n) for k, c in self.counts.items())
        im = math.fsum(c * math.sin(tau * k / n) for k, c in self.counts.items())
        s = abs(float(self.scale))
        mag = s * math.hypot(re, im)
        err = (
            s
            * sum(abs(c) for c in self.counts.values())
            * MAGNITUDE_ERROR_CONSTANT
            * sys.float_info.epsilon
        )
        return mag, err

    # ---------------------------------------------------------- serialization

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "M": self.level,
            "scale": str(self.scale),
            "counts": {str(k): c for k, c in sorted(self.counts.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, d: dict) -> "PhaseHistogram":
        return cls(
            int(d["p"]),
            int(d["M"]),
            {int(k): int(c) for k, c in d["counts"].items()},
            Fraction(d["scale"]),
        )

    @classmethod
    def from_json(cls, s: str) -> "PhaseHistogram":
        return cls.from_json_dict(json.loads(s))
