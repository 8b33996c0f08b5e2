"""Empirical decay rates of the oscillatory sums and the explicit
degree-based envelope check.

For each level m the supremum of |E(u/p**m)| over primitive directions u
(at least one coordinate a p-adic unit, so |y| = p**m) is recorded; a
least-squares fit of log_p(sup) against m estimates the decay exponent.
The fitted exponent is compared against the explicit candidate -1/d(f),
where d(f) is the largest per-variable degree, together with the smallest
constant c for which every data point satisfies

    sup_m <= c * m**(n-1) * p**(-m/d(f)).

Exact zeros are excluded from the fit (log of an exact 0 is undefined, and
exact vanishing is itself a result) and reported separately.
"""

from __future__ import annotations

import csv
import itertools
import math
import random
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence, TextIO

from .errors import BudgetExceededError, ExactVanishingError, FitError
from .expsum import EvalRequest, eval_recursive, eval_unit_directions
from .padic import INFINITY, PhaseHistogram, PrimeContext
from .polymap import DegreeData, PolyMap, SchwartzBruhat, check_affine_independence, degree_data

#: Histograms with more stored classes than this skip the exact |E|**2 path.
ABS_SQUARE_CLASS_LIMIT = 64

#: Default slack for the exponent consistency verdict.
DEFAULT_EPSILON = 0.1

Strategy = str | tuple[str, int, int]


@dataclass
class DecayRecord:
    """Largest |E| over directions of norm p**m, with the achieving direction."""

    level: int
    sup: float
    sup_error: float
    argmax: tuple[int, ...] | None
    exhaustive: bool
    exact_zero: bool
    sup_square: Fraction | None = None  # exact |E|**2 when it is rational

    def to_json_dict(self) -> dict:
        return {
            "m": self.level,
            "sup": self.sup,
            "sup_error": self.sup_error,
            "argmax_u": list(self.argmax) if self.argmax else None,
            "exhaustive": self.exhaustive,
            "exact_zero": self.exact_zero,
            "sup_square": str(self.sup_square) if self.sup_square is not None else None,
        }


@dataclass
class FitResult:
    alpha_hat: float
    intercept: float
    residual: float
    window: tuple[int, int]
    bound_exponent: float | None  # -1/d(f)
    c_hat: float
    c_hat_square: Fraction | None
    zero_levels: list[int]

    def to_json_dict(self, verdict: str | None = None) -> dict:
        d = {
            "alpha_hat": self.alpha_hat,
            "intercept": self.intercept,
            "residual": self.residual,
            "window": list(self.window),
            "bound_exponent": self.bound_exponent,
            "c_hat": self.c_hat,
            "zero_levels": self.zero_levels,
        }
        if verdict is not None:
            d["verdict"] = verdict
        return d


def primitive_directions(p: int, m: int, r: int) -> Iterator[tuple[int, ...]]:
    """All u in [0, p**m)^r with at least one unit coordinate, lex order."""
    for u in itertools.product(range(p**m), repeat=r):
        if any(c % p for c in u):
            yield u


def primitive_direction_count(p: int, m: int, r: int) -> int:
    return p ** (m * r) - p ** ((m - 1) * r)


def _sample_directions(
    p: int, m: int, r: int, count: int, seed: int
) -> Iterator[tuple[int, ...]]:
    rng = random.Random(seed)
    mod = p**m
    produced = 0
    while produced < count:
        u = tuple(rng.randrange(mod) for _ in range(r))
        if any(c % p for c in u):
            produced += 1
            yield u


def _exact_sup_square(hist: PhaseHistogram) -> Fraction | None:
    if len(hist.counts) > ABS_SQUARE_CLASS_LIMIT:
        return None
    return hist.abs_square().exact_rational()


def sup_at_level(
    f: PolyMap,
    phi: SchwartzBruhat,
    m: int,
    strategy: Strategy,
    ctx: PrimeContext,
    workers: int = 1,
) -> DecayRecord:
    """Max of |E(u/p**m)| over primitive directions at level m.

    ``strategy`` is ``"exhaustive"`` or ``("sample", count, seed)``.  Ties in
    the float magnitude are broken by the lexicographically smallest u, so
    the argmax is deterministic.  Exhaustive sweeps require the direction
    count to fit the context budget.
    """
    if m < 1:
        raise ValueError("level must be >= 1")
    p = ctx.p
    exhaustive = strategy == "exhaustive"
    if exhaustive:
        total = primitive_direction_count(p, m, f.r)
        if total > ctx.naive_budget:
            raise BudgetExceededError(
                total, ctx.naive_budget, what="directions (use a sample strategy)"
            )
        if f.r == 1:
            directions = ((u,) for u in range(1, p**m) if u % p)
        else:
            directions = primitive_directions(p, m, f.r)
    else:
        kind, count, seed = strategy
        if kind != "sample":
            raise ValueError(f"unknown strategy {strategy!r}")
        directions = _sample_directions(p, m, f.r, count, seed)

    best_mag = 0.0
    best_err = 0.0
    best_u: tuple[int, ...] | None = None
    best_square: Fraction | None = None
    seen_nonzero = False

    if exhaustive and f.r == 1:
        sweep = eval_unit_directions(f, phi, m, ctx)
        iterator = (((u,), hist) for u, hist in sweep)
    else:
        mod = p**m

        def _evaluate(u: tuple[int, ...]) -> PhaseHistogram:
            y = [Fraction(c, mod) for c in u]
            return eval_recursive(EvalRequest.of(f, y, ctx, phi), workers).histogram.reduced()

        iterator = ((u, _evaluate(u)) for u in directions)

    for u, hist in iterator:
        if not hist.counts:
            continue
        seen_nonzero = True
        mag, err = hist.magnitude()
        if mag > best_mag or best_u is None:
            best_mag, best_err, best_u = mag, err, u
            best_square = _exact_sup_square(hist)
    if not seen_nonzero:
        return DecayRecord(m, 0.0, 0.0, None, exhaustive, True, Fraction(0))
    return DecayRecord(m, best_mag, best_err, best_u, exhaustive, False, best_square)


def fit_alpha(
    records: Sequence[DecayRecord],
    f: PolyMap,
    ctx: PrimeContext,
    window: tuple[int, int] | None = None,
) -> FitResult:
    """Least-squares slope of log_p(sup) against m over the window.

    Also computes c_hat, the smallest constant for which every usable data
    point satisfies sup <= c * m**(n-1) * p**(-m/d(f)); when the achieved
    suprema have rational squares and d(f) divides 2m the per-level ratios
    are compared exactly, so clean cases report c_hat without rounding.
    """
    p = ctx.p
    deg = degree_data(f, p)
    if window is None:
        levels = [rec.level for rec in records]
        window = (min(levels), max(levels))
    in_window = [rec for rec in records if window[0] <= rec.level <= window[1]]
    zero_levels = [rec.level for rec in in_window if rec.exact_zero]
    usable = [rec for rec in in_window if not rec.exact_zero]
    if not usable:
        raise ExactVanishingError(
            "every record in the window is exactly zero; nothing to fit"
        )
    if len(usable) < 2:
        raise FitError("need at least two nonzero records to fit a slope")
    xs = [float(rec.level) for rec in usable]
    ys = [math.log(rec.sup, p) for rec in usable]
    slope, intercept = statistics.linear_regression(xs, ys)
    residual = math.sqrt(
        math.fsum((y - (slope * x + intercept)) ** 2 for x, y in zip(xs, ys))
    )
    bound_exponent = None if deg.d_max == 0 else -1.0 / deg.d_max
    c_hat, c_hat_square = _envelope_constant(usable, deg, f.n, p)
    return FitResult(
        alpha_hat=slope,
        intercept=intercept,
        residual=residual,
        window=window,
        bound_exponent=bound_exponent,
        c_hat=c_hat,
        c_hat_square=c_hat_square,
        zero_levels=zero_levels,
    )


def _envelope_constant(
    records: Sequence[DecayRecord], deg: DegreeData, n: int, p: int
) -> tuple[float, Fraction | None]:
    """max over records of sup * p**(m/d) / m**(n-1), exact when possible."""
    d = deg.d_max
    if d == 0:
        return 0.0, None
    best_float = 0.0
    best_square: Fraction | None = Fraction(0)
    for rec in records:
        ratio_f = rec.sup * p ** (rec.level / d) / rec.level ** (n - 1)
        best_float = max(best_float, ratio_f)
        if best_square is not None and rec.sup_square is not None and (2 * rec.level) % d == 0:
            ratio_sq = (
                rec.sup_square
                * Fraction(p) ** (2 * rec.level // d)
                / Fraction(rec.level) ** (2 * (n - 1))
            )
            best_square = max(best_square, ratio_sq)
        else:
            best_square = None
    if best_square is not None:
        root = _exact_sqrt(best_square)
        if root is not None:
            return float(root), best_square
        return math.sqrt(best_square), best_square
    return best_float, None


def _exact_sqrt(q: Fraction) -> Fraction | None:
    num = math.isqrt(q.numerator)
    den = math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


@dataclass
class DecayReport:
    """Per-level envelope ratios and the exponent-consistency verdict."""

    hypothesis_ok: bool
    d_max: int
    e_orders: tuple[float | int, ...]
    epsilon: float
    bound_exponent: float | None
    ratios: list[tuple[int, float]]
    c_hat: float
    alpha_hat: float | None
    verdict: str
    notes: list[str]

    def to_json_dict(self) -> dict:
        return {
            "hypothesis_ok": self.hypothesis_ok,
            "d_f": self.d_max,
            "e_orders": [None if e is INFINITY else e for e in self.e_orders],
            "epsilon": self.epsilon,
            "bound_exponent": self.bound_exponent,
            "ratios": [[m, r] for m, r in self.ratios],
            "c_hat": self.c_hat,
            "alpha_hat": self.alpha_hat,
            "verdict": self.verdict,
            "notes": self.notes,
        }


def degree_bound_report(
    f: PolyMap,
    records: Sequence[DecayRecord],
    ctx: PrimeContext,
    epsilon: float = DEFAULT_EPSILON,
) -> DecayReport:
    """Check the data against the explicit |y|**(-1/d(f)) envelope.

    The verdict is CONSISTENT when the fitted exponent is at most
    -1/d(f) + epsilon; only the exponent is checked, while the constant is
    reported as the data-derived c_hat (by construction every data point
    satisfies the envelope with c = c_hat).  Degenerate inputs produce
    banners in ``notes``, never failures.
    """
    p = ctx.p
    deg = degree_data(f, p)
    notes: list[str] = []
    hypothesis_ok = check_affine_independence(f)
    if not hypothesis_ok:
        notes.append(
            "HYPOTHESIS FAILED: 1, f_1, ..., f_r are linearly dependent; "
            "the degree-based envelope is not asserted for this map"
        )
    d = deg.d_max
    bound_exponent = None if d == 0 else -1.0 / d
    if d == 0:
        notes.append("map is constant: no envelope exponent is defined")
    usable = [rec for rec in records if not rec.exact_zero]
    ratios: list[tuple[int, float]] = []
    if d > 0:
        for rec in usable:
            ratios.append(
                (rec.level, rec.sup * p ** (rec.level / d) / rec.level ** (f.n - 1))
            )
    alpha_hat: float | None = None
    c_hat = 0.0
    if not usable:
        verdict = "VACUOUS"
        notes.append("every recorded supremum is exactly zero")
    else:
        try:
            fit = fit_alpha(records, f, ctx)
            alpha_hat = fit.alpha_hat
            c_hat = fit.c_hat
        except FitError as exc:
            notes.append(str(exc))
            verdict = "VACUOUS"
            return DecayReport(
                hypothesis_ok, d, deg.e_orders, epsilon, bound_exponent,
                ratios, c_hat, alpha_hat, verdict, notes,
            )
        if bound_exponent is None:
            verdict = "NOT-APPLICABLE"
        elif alpha_hat <= bound_exponent + epsilon:
            verdict = "CONSISTENT"
        else:
            verdict = "INCONSISTENT"
        if not hypothesis_ok:
            notes.append("verdict reported on data only; hypothesis does not hold")
    return DecayReport(
        hypothesis_ok, d, deg.e_orders, epsilon, bound_exponent,
        ratios, c_hat, alpha_hat, verdict, notes,
    )


def write_decay_csv(records: Sequence[DecayRecord], out: TextIO) -> None:
    writer = csv.writer(out)
    writer.writerow(["m", "sup", "sup_error", "argmax_u", "exhaustive"])
    for rec in records:
        writer.writerow(
            [
                rec.level,
                repr(rec.sup),
                repr(rec.sup_error),
                ",".join(str(c) for c in rec.argmax) if rec.argmax else "",
                rec.exhaustive,
            ]
        )
