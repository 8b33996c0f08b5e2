import random
from fractions import Fraction

import pytest

from padicsums.errors import ParseError, SeriesCertificationError, SeriesFloorError
from padicsums.padic import INFINITY
from padicsums.polymap import (
    PolyMap,
    RestrictedSeries,
    SchwartzBruhat,
    check_affine_independence,
    coefficient_floor,
    degree_data,
    eval_mod,
    infer_variable_count,
    parse_polymap,
    parse_polynomial,
    poly_eval,
    series_truncate,
    shift_substitute,
    substitute_affine,
)


def test_parse_examples():
    f = parse_polymap("x1^2", 1)
    assert f.components == ({(2,): Fraction(1)},)

    f = parse_polymap("x1^2*x2; x2^3", 2)
    assert f.r == 2
    assert f.components[0] == {(2, 1): Fraction(1)}
    assert f.components[1] == {(0, 3): Fraction(1)}

    f = parse_polymap("x1 + 1/3", 1)
    assert f.components[0] == {(1,): Fraction(1), (0,): Fraction(1, 3)}


def test_parse_precedence_and_signs():
    p = parse_polynomial("x1 + 2*x1^2 - 3", 1)
    assert p == {(1,): Fraction(1), (2,): Fraction(2), (0,): Fraction(-3)}
    p = parse_polynomial("-x1 + (x1 + 1)^2", 1)
    assert p == {(2,): Fraction(1), (1,): Fraction(1), (0,): Fraction(1)}
    p = parse_polynomial("2/3*x1", 1)
    assert p == {(1,): Fraction(2, 3)}


def test_parse_errors():
    with pytest.raises(ParseError) as exc:
        parse_polynomial("x1 + *", 1)
    assert exc.value.position is not None

    with pytest.raises(ParseError, match="unknown variable"):
        parse_polynomial("x3", 2)

    with pytest.raises(ParseError, match="exponent"):
        parse_polynomial("x1^99999", 1)

    with pytest.raises(ParseError):
        parse_polynomial("x1 ^ x1", 1)

    with pytest.raises(ParseError):
        parse_polymap("x1;;x1", 1)

    with pytest.raises(ParseError):
        parse_polynomial("(x1", 1)


def test_infer_variable_count():
    assert infer_variable_count("x1^2*x2; x2^3") == 2
    assert infer_variable_count("7") == 1


def test_degree_data_examples():
    f = parse_polymap("x1^2*x2; x2^3", 2)
    dd = degree_data(f, 3)
    assert dd.d_max == 3
    assert dd.per_variable == ((2, 1), (0, 3))

    g = parse_polymap("3*x1 + 9*x1^2 + 5", 1)
    assert degree_data(g, 3).e_orders == (1,)

    g = parse_polymap("1/3*x1", 1)
    assert degree_data(g, 3).e_orders == (-1,)

    const = parse_polymap("4", 1)
    assert degree_data(const, 3).e_orders == (INFINITY,)
    assert degree_data(const, 3).d_max == 0


def test_degree_data_permutation_invariance():
    f = parse_polymap("x1^2*x2; x2^3 + x1", 2)
    g = parse_polymap("x2^3 + x1; x1^2*x2", 2)
    df, dg = degree_data(f, 3), degree_data(g, 3)
    assert df.d_max == dg.d_max
    assert df.per_variable == (dg.per_variable[1], dg.per_variable[0])
    assert df.e_orders == (dg.e_orders[1], dg.e_orders[0])


def test_polymap_rejects_zero_coefficients():
    with pytest.raises(ValueError):
        PolyMap(1, ({(1,): Fraction(0)},))


def test_eval_mod_examples():
    f = parse_polymap("x1^2", 1)
    assert eval_mod(f, (2,), 1, 3) == (Fraction(1),)

    f = parse_polymap("x1 + 1/3", 1)
    assert eval_mod(f, (0,), 1, 3) == (Fraction(1, 3),)

    f = parse_polymap("x1^2*x2", 2)
    assert eval_mod(f, (2, 2), 2, 3) == (Fraction(8),)


def test_eval_mod_matches_exact_evaluation():
    rng = random.Random(11)
    for _ in range(100):
        p = rng.choice([2, 3, 5])
        n = rng.choice([1, 2])
        poly = {}
        for _ in range(rng.randint(1, 4)):
            exp = tuple(rng.randint(0, 3) for _ in range(n))
            unit = rng.choice([1, 2, -1, 5, 7])
            while unit % p == 0:
                unit += 1
            poly[exp] = Fraction(unit) * Fraction(p) ** rng.randint(-2, 2)
        f = PolyMap(n, (poly,))
        m = rng.randint(1, 3)
        b = coefficient_floor([poly], p)
        x = tuple(rng.randrange(p ** (m + b)) for _ in range(n))
        got = eval_mod(f, x, m, p)[0]
        exact = poly_eval(poly, x)
        # difference must be divisible by p^m in Z_p
        diff = exact - got
        if diff:
            num = diff.numerator
            v = 0
            while num % p == 0:
                num //= p
                v += 1
            den_v = 0
            den = diff.denominator
            while den % p == 0:
                den //= p
                den_v += 1
            assert v - den_v >= m
        assert 0 <= got < p**m


def test_shift_substitute_examples():
    g = parse_polynomial("x1^2", 1)
    assert shift_substitute(g, (1,), 1, 3) == {(1,): Fraction(6), (2,): Fraction(9)}

    g = parse_polynomial("x1", 1)
    assert shift_substitute(g, (0,), 2, 3) == {(1,): Fraction(9)}

    g = parse_polynomial("x1^2", 1)
    assert shift_substitute(g, (0,), 0, 3) == g


def test_shift_substitute_composition():
    rng = random.Random(12)
    for _ in range(40):
        p = rng.choice([2, 3, 5])
        n = rng.choice([1, 2])
        poly = {
            tuple(rng.randint(0, 2) for _ in range(n)): Fraction(rng.randint(-4, 4))
            for _ in range(rng.randint(1, 4))
        }
        poly = {k: v for k, v in poly.items() if v}
        if not poly:
            continue
        a = tuple(rng.randint(0, p - 1) for _ in range(n))
        a2 = tuple(rng.randint(0, p - 1) for _ in range(n))
        k1, k2 = rng.randint(0, 2), rng.randint(0, 2)
        h1 = substitute_affine(poly, a, Fraction(p) ** k1, n)
        h2 = substitute_affine(h1, a2, Fraction(p) ** k2, n)
        combined_center = tuple(ai + p**k1 * a2i for ai, a2i in zip(a, a2))
        direct = substitute_affine(poly, combined_center, Fraction(p) ** (k1 + k2), n)
        assert h2 == direct


def test_check_affine_independence_examples():
    assert not check_affine_independence(parse_polymap("x1; x1+1", 1))
    assert check_affine_independence(parse_polymap("x1; x1^2", 1))
    assert check_affine_independence(parse_polymap("2*x1", 1))
    assert not check_affine_independence(parse_polymap("5", 1))


def test_series_truncate_examples():
    geometric = RestrictedSeries(
        1, lambda exp: Fraction(3 ** exp[0]), lambda d: d
    )
    assert series_truncate(geometric, 2, 3) == {
        (0,): Fraction(1),
        (1,): Fraction(3),
    }
    assert series_truncate(geometric, 1, 3) == {(0,): Fraction(1)}

    units = RestrictedSeries(1, lambda exp: Fraction(1), lambda d: 0)
    with pytest.raises(SeriesFloorError):
        series_truncate(units, 1, 3)


def test_series_truncations_agree_below_common_level():
    geometric = RestrictedSeries(1, lambda exp: Fraction(3 ** exp[0]), lambda d: d)
    t2 = series_truncate(geometric, 2, 3)
    t4 = series_truncate(geometric, 4, 3)
    for exp, c in t2.items():
        assert t4[exp] == c


def test_series_certification_enforced():
    lying = RestrictedSeries(1, lambda exp: Fraction(1), lambda d: d)
    with pytest.raises(SeriesCertificationError):
        series_truncate(lying, 2, 3)


def test_series_from_poly():
    poly = parse_polynomial("1 + 3*x1 + 9*x1^2", 1)
    s = RestrictedSeries.from_poly(1, poly, 3)
    assert series_truncate(s, 2, 3) == {(0,): Fraction(1), (1,): Fraction(3)}


def test_schwartz_bruhat_validation():
    phi = SchwartzBruhat.trivial(2)
    assert phi.l1_upper_bound(3) == 1
    assert phi.supported_in_unit_polydisc(3)

    ball = SchwartzBruhat.ball([Fraction(1, 3)], 1, Fraction(2))
    assert not ball.supported_in_unit_polydisc(3)
    assert ball.l1_upper_bound(3) == Fraction(2, 3)

    with pytest.raises(ValueError):
        SchwartzBruhat(1, (next(iter(SchwartzBruhat.ball([0], 0, 0).terms)),))


def test_polymap_json_round_trip():
    f = parse_polymap("x1^2*x2 + 1/3; x2^3", 2)
    again = PolyMap.from_json_dict(f.to_json_dict())
    assert again == f
