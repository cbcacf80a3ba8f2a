import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from fsindep.errors import BudgetExceeded, FsiError
from fsindep.exactprob import (BaseKProb, CountDistribution, brute_force_distribution, chernoff_bound,
                               dp_count_distribution, failing_counts, failure_probability, format_fraction,
                               parse_fraction)
from fsindep.shuffler import Shuffler

from test_shuffler import shufflers

T1 = Shuffler.reader(1, 2)
T2 = Shuffler.reader(2, 2)


def bits(n):
    return st.lists(st.integers(0, 1), min_size=n, max_size=n).map(tuple)


def test_binomial_example():
    for f in (dp_count_distribution, brute_force_distribution):
        d = f(T2, 2, 1, (0,), (), ())
        assert d.as_dict() == {0: Fraction(1, 4), 1: Fraction(1, 2), 2: Fraction(1, 4)}


def test_fully_fixed_example():
    d = dp_count_distribution(T1, 2, 1, (0,), (0, 0), (1, 1))
    assert d.as_dict() == {2: 1}
    assert brute_force_distribution(T1, 2, 1, (0,), (0, 0), (1, 1)).as_dict() == {2: 1}


def test_dp_rejects_bad_instances():
    with pytest.raises(FsiError):
        dp_count_distribution(T1, 2, 1, (0,), (0, 0, 0), (1, 1, 1))
    with pytest.raises(FsiError):
        dp_count_distribution(T1, 2, 2, (0,), (), ())
    with pytest.raises(FsiError):
        dp_count_distribution(T1, 2, 1, (0,), (0,), ())


def test_oracle_budget():
    with pytest.raises(BudgetExceeded):
        brute_force_distribution(T1, 12, 1, (0,), (), (), budget=1000)


def test_failure_probability_examples():
    d = dp_count_distribution(T2, 2, 1, (0,), (), ())
    assert failure_probability(d, Fraction(0)) == 1
    assert failure_probability(d, Fraction(1, 4)) == Fraction(1, 2)
    assert failure_probability(d, Fraction(1)) == 0


def test_failing_counts_boundary_is_non_strict():
    # m=4, k^r=2: |c - 2| >= 4 eps; eps=1/4 puts c=1 and c=3 exactly on the boundary
    assert failing_counts(4, 1, 2, Fraction(1, 4)) == [0, 1, 3, 4]
    assert failing_counts(4, 1, 2, Fraction(1, 4) + Fraction(1, 1000)) == [0, 4]


def test_chernoff_examples():
    assert chernoff_bound(0, Fraction(1, 2), Fraction(1)) == 2.0
    b = chernoff_bound(12, Fraction(1, 2), Fraction(1))
    mpmath.mp.dps = 50
    true = 2 * mpmath.exp(-2)
    assert mpmath.mpf(b) >= true
    assert b - float(true) < 1e-15
    assert abs(b - 0.27067) < 1e-5
    with pytest.raises(FsiError):
        chernoff_bound(5, Fraction(1, 2), Fraction(0))
    with pytest.raises(FsiError):
        chernoff_bound(5, Fraction(1, 2), Fraction(3, 2))


@given(st.integers(0, 400), st.fractions(Fraction(1, 100), 1), st.fractions(Fraction(1, 100), 1))
def test_chernoff_is_an_upper_bound(M, p, delta):
    b = chernoff_bound(M, p, delta)
    mpmath.mp.dps = 60
    x = mpmath.mpf(delta.numerator) ** 2 * M * p.numerator / (3 * mpmath.mpf(delta.denominator) ** 2 * p.denominator)
    assert mpmath.mpf(b) >= 2 * mpmath.exp(-x)
    assert b <= math.nextafter(float(2 * mpmath.exp(-x)), math.inf) * (1 + 1e-15)


def test_serialization_round_trip():
    d = dp_count_distribution(T2, 5, 2, (0, 1), (1,), (0,))
    text = d.serialize()
    assert text.splitlines()[0] == "5 2 01 2"
    assert CountDistribution.parse(text) == d
    assert d.base_k(1) == BaseKProb(d.mass[1], 5, 2)


def test_fraction_format():
    assert format_fraction(Fraction(2, 4)) == "1/2"
    assert format_fraction(Fraction(3)) == "3/1"
    assert parse_fraction("6/4") == Fraction(3, 2)
    with pytest.raises(FsiError):
        parse_fraction("1/0")


def test_base_k_addition():
    assert (BaseKProb(1, 2, 2) + BaseKProb(2, 2, 2)).value == Fraction(3, 4)
    with pytest.raises(FsiError):
        BaseKProb(1, 2, 2) + BaseKProb(1, 3, 2)


@given(shufflers(max_states=4), st.data())
def test_dp_matches_oracle(S, data):
    n = data.draw(st.integers(1, 6))
    L = data.draw(st.integers(0, n))
    r = data.draw(st.integers(1, min(3, n)))
    w, up, vp = data.draw(bits(r)), data.draw(bits(L)), data.draw(bits(L))
    dp = dp_count_distribution(S, n, r, w, up, vp)
    assert dp == brute_force_distribution(S, n, r, w, up, vp)
    assert dp.total() == 2 ** n


@given(shufflers(k=3, max_states=3), st.data())
def test_dp_matches_oracle_k3(S, data):
    n = data.draw(st.integers(1, 4))
    L = data.draw(st.integers(0, n))
    r = data.draw(st.integers(1, min(2, n)))
    sym = st.lists(st.integers(0, 2), min_size=L, max_size=L).map(tuple)
    w = tuple(data.draw(st.lists(st.integers(0, 2), min_size=r, max_size=r)))
    up, vp = data.draw(sym), data.draw(sym)
    assert dp_count_distribution(S, n, r, w, up, vp) == brute_force_distribution(S, n, r, w, up, vp)


@given(shufflers(max_states=4), st.data())
def test_conditioning_consistency(S, data):
    n = data.draw(st.integers(1, 14))
    L = data.draw(st.integers(0, n - 1))
    r = data.draw(st.integers(1, min(3, n)))
    w, up, vp = data.draw(bits(r)), data.draw(bits(L)), data.draw(bits(L))
    whole = dp_count_distribution(S, n, r, w, up, vp)
    for c in range(whole.m + 1):
        parts = sum(dp_count_distribution(S, n, r, w, up + (a,), vp + (b,)).prob(c)
                    for a in range(2) for b in range(2))
        assert whole.prob(c) == parts / 4


@given(shufflers(max_states=4), st.data())
def test_failure_probability_monotone(S, data):
    n = data.draw(st.integers(1, 12))
    r = data.draw(st.integers(1, min(2, n)))
    d = dp_count_distribution(S, n, r, data.draw(bits(r)), (), ())
    e1, e2 = sorted((data.draw(st.fractions(0, 2)), data.draw(st.fractions(0, 2))))
    assert failure_probability(d, e1) >= failure_probability(d, e2)
