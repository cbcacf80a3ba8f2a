import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fsindep.companion import (Caps, SliceOracle, SliceSpec, build_companion, choose_cutoffs, extract,
                               naive_slice_measure, recount_membership, replay_trace, search_cutoffs,
                               slice_measure, slice_membership, tail)
from fsindep.errors import BudgetExceeded, FsiError
from fsindep.shuffler import Shuffler
from fsindep.verify import CyclicFamily
from fsindep.words import ChampernowneSource, LiteralSource, champernowne_prefix

T1, T2 = Shuffler.reader(1, 2), Shuffler.reader(2, 2)
C2 = champernowne_prefix(2, 100)
# k=3, one tape-2 reader: H_1(N) is a genuine constraint on y
TERNARY = CyclicFamily((Shuffler.reader(2, 3),))


def test_tail_examples():
    assert tail(0) == Fraction(1, 3)
    assert tail(1) == Fraction(1, 12)
    for L in range(10):
        assert tail(L + 1) == tail(L) / 4
    with pytest.raises(FsiError):
        tail(-1)


def test_slice_spec():
    s = SliceSpec(3, 5)
    assert (s.tolerance, s.horizon, s.target) == (Fraction(1, 8), 25, Fraction(63, 64))
    with pytest.raises(FsiError):
        SliceSpec(1, 1)
    with pytest.raises(FsiError):
        SliceSpec(0, 2)


def test_slice_membership_examples():
    assert slice_membership(T1, 50, 1, Fraction(1, 4), C2, (0,) * 50)
    assert slice_membership(T2, 20, 2, Fraction(1), C2, (0,) * 20)
    for n in range(4, 12):
        assert not slice_membership(T2, n, 1, Fraction(1, 4), C2, (0,) * n)
    with pytest.raises(FsiError):
        slice_membership(T1, 5, 1, Fraction(1), C2[:4], (0,) * 5)


def test_slice_membership_block_longer_than_output():
    # no block fits: every frequency is 0, off by k^-m
    assert not slice_membership(T1, 2, 3, Fraction(1, 16), C2, (0, 0))
    assert slice_membership(T1, 2, 3, Fraction(1, 8), C2, (0, 0))


def test_tiny_slice_matches_naive():
    x = ChampernowneSource(2)
    spec = SliceSpec(1, 2)
    assert slice_measure(spec, x, (), 2) == naive_slice_measure(spec, x, (), 2) == 1


def test_decided_cylinders():
    x = ChampernowneSource(3)
    spec = SliceSpec(1, 2)
    for v in itertools.product(range(3), repeat=4):
        mu = slice_measure(spec, x, v, 3, family=TERNARY)
        assert mu in (0, Fraction(1, 81))
        assert mu == naive_slice_measure(spec, x, v, 3, family=TERNARY)


def test_ternary_measures_match_naive():
    x = ChampernowneSource(3)
    for N in (2, 3):
        spec = SliceSpec(1, N)
        assert slice_measure(spec, x, (), 3, family=TERNARY) == naive_slice_measure(
            spec, x, (), 3, max_enum=1 << 16, family=TERNARY)
    assert slice_measure(SliceSpec(1, 2), x, (), 3, family=TERNARY) == Fraction(2, 3)


@st.composite
def configs(draw):
    k = draw(st.integers(2, 3))
    Q = draw(st.integers(1, 2))
    fam = []
    for _ in range(draw(st.integers(1, 2))):
        delta = tuple(tuple(draw(st.integers(0, Q - 1)) for _ in range(k)) for _ in range(Q))
        tau = tuple(draw(st.sampled_from((1, 2))) for _ in range(Q))
        fam.append(Shuffler(k, Q, draw(st.integers(0, Q - 1)), delta, tau))
    t = draw(st.integers(1, 2))
    N = draw(st.integers(2, 3 if k == 2 else 2))
    x = tuple(draw(st.lists(st.integers(0, k - 1), min_size=N * N, max_size=N * N)))
    v = tuple(draw(st.lists(st.integers(0, k - 1), max_size=3)))
    return k, CyclicFamily(tuple(fam)), SliceSpec(t, N), LiteralSource("".join(map(str, x)), k), v


@settings(max_examples=40)
@given(configs())
def test_lazy_measure_matches_naive(cfg):
    k, fam, spec, x, v = cfg
    mu = slice_measure(spec, x, v, k, family=fam)
    assert mu == naive_slice_measure(spec, x, v, k, family=fam)
    assert 0 <= mu <= Fraction(1, k ** len(v))
    assert mu == sum(slice_measure(spec, x, v + (a,), k, family=fam) for a in range(k))


@settings(max_examples=30)
@given(configs(), st.integers(2, 3))
def test_shrinking_intersections(cfg, N2):
    k, fam, spec, x, v = cfg
    specs = (SliceSpec(1, 2), SliceSpec(2, N2))
    x = LiteralSource("".join(map(str, champernowne_prefix(k, 9))), k)
    oracle = SliceOracle(x, k, family=fam)
    mus = [oracle.measure(specs[:L], v) for L in range(3)]
    assert mus[0] == Fraction(1, k ** len(v))
    assert mus[0] >= mus[1] >= mus[2]


def test_choose_cutoffs_without_lookahead_is_least_passing_window():
    x = ChampernowneSource(2)
    specs = choose_cutoffs(x, 1, 2, Caps(max_window=4, lookahead=False))
    assert specs == [SliceSpec(1, 2)]
    assert naive_slice_measure(SliceSpec(1, 2), x, (), 2) >= Fraction(3, 4)


def test_choose_cutoffs_with_lookahead():
    x = ChampernowneSource(2)
    search = search_cutoffs(x, 1, 2, Caps(max_window=4))
    # N=2 passes stage 1 but has no stage-2 window M <= 4 with a stage-3 witness
    assert search.specs == [SliceSpec(1, 3)]
    assert search.witnesses == [(2, 8), (3, 54)]
    assert search.measures[(1, 2)] == 1
    assert search.measures[(2, 7)] == 1 and search.measures[(3, 49)] < Fraction(63, 64)
    two = search_cutoffs(x, 2, 2, Caps(max_window=100))
    assert [s.N for s in two.specs] == [3, 8] and two.witnesses == [(3, 54)]
    for a, b in zip(two.specs, two.specs[1:]):
        assert a.N < b.N <= a.N ** 2


def test_cutoff_cap_exhaustion():
    with pytest.raises(BudgetExceeded, match="stage 1"):
        choose_cutoffs(ChampernowneSource(2), 1, 2, Caps(max_window=2))
    with pytest.raises(BudgetExceeded, match="stage 3"):
        choose_cutoffs(ChampernowneSource(2), 3, 2, Caps(max_window=100))


def test_extract_without_stages_gives_zeros():
    y, trace = extract(ChampernowneSource(2), [], 40, 2)
    assert y == (0,) * 40
    assert replay_trace(trace, 2) == []
    y, rep = build_companion(ChampernowneSource(2), 0, 10, 2)
    assert y == (0,) * 10 and rep.ok


def test_extract_cap():
    with pytest.raises(BudgetExceeded):
        extract(ChampernowneSource(2), [], 10, 2, Caps(max_level=3))


def test_ternary_companion():
    x = ChampernowneSource(3)
    caps = Caps(max_window=6, lookahead=False)
    y, rep = build_companion(x, 1, 12, 3, caps, family=TERNARY)
    assert rep.ok and rep.specs == [SliceSpec(1, 3)]
    assert rep.stage_measures[1] == Fraction(214, 243)
    assert y == (0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0)
    assert recount_membership(SliceSpec(1, 3), x, y, 3, TERNARY) is True
    assert recount_membership(SliceSpec(1, 3), x, (0,) * 9, 3, TERNARY) is False
    assert recount_membership(SliceSpec(1, 3), x, y[:8], 3, TERNARY) is None
    # every symbol choice is the least one clearing the threshold
    assert replay_trace(rep.trace, 3) == []
    assert build_companion(x, 1, 12, 3, caps, family=TERNARY)[0] == y


def test_replay_detects_tampering():
    x = ChampernowneSource(3)
    _, rep = build_companion(x, 1, 6, 3, Caps(max_window=6, lookahead=False), family=TERNARY)
    entry = rep.trace[1]
    entry.chosen = 2
    assert replay_trace(rep.trace, 3)


def test_enumeration_cap():
    with pytest.raises(BudgetExceeded, match="terminal nodes"):
        slice_measure(SliceSpec(1, 4), ChampernowneSource(3), (), 3, max_enum=100, family=TERNARY)
    with pytest.raises(BudgetExceeded):
        naive_slice_measure(SliceSpec(1, 4), ChampernowneSource(2), (), 2, max_enum=100)
