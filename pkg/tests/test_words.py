from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from fsindep.errors import FsiError
from fsindep.words import (ChampernowneSource, LiteralSource, WordSource, all_words, champernowne_prefix,
                           format_word, max_deviation, occ_aligned, occ_overlapping, open_source, parse_word,
                           read_word_file, run_test, write_word_file)


def W(s):
    return parse_word(s, 36)


def words(k=2, max_size=40):
    return st.lists(st.integers(0, k - 1), max_size=max_size).map(tuple)


def test_occ_overlapping_examples():
    assert occ_overlapping(W("000"), W("00")) == 2
    assert occ_overlapping(W("0101"), W("01")) == 2
    assert occ_overlapping(W("01"), W("011")) == 0
    with pytest.raises(FsiError):
        occ_overlapping(W("01"), ())


def test_occ_aligned_examples():
    assert occ_aligned(W("0000"), W("00"), 2) == 2
    assert occ_aligned(W("001"), W("00"), 2) == 1
    assert occ_aligned(W("0101"), W("10"), 2) == 0
    with pytest.raises(FsiError):
        occ_aligned(W("0101"), W("1"), 2)


def test_max_deviation_examples():
    assert max_deviation(W("01"), 1, 2) == 0
    assert max_deviation(W("00"), 1, 2) == Fraction(1, 2)
    # 2-blocks of 0101: 01 x2, 10 x1, 00 and 11 absent; divisor |u| = 4
    assert max_deviation(W("0101"), 2, 2) == Fraction(1, 4)
    with pytest.raises(FsiError):
        max_deviation(W("01"), 3, 2)


def test_run_test_examples():
    assert run_test(W("01"), 1, Fraction(0), 2)
    assert not run_test(W("00"), 1, Fraction(1, 4), 2)
    assert run_test(W("00"), 1, Fraction(1, 2), 2)  # non-strict


def test_champernowne_examples():
    assert format_word(champernowne_prefix(10, 10)) == "1234567891"
    assert format_word(champernowne_prefix(2, 6)) == "110111"
    assert champernowne_prefix(3, 0) == ()
    # independent oracle: Python's own base-2 rendering
    ref = "".join(bin(i)[2:] for i in range(1, 2000))[:5000]
    assert format_word(champernowne_prefix(2, 5000)) == ref


def test_word_text_format(tmp_path):
    assert parse_word(" 0a\n1 ", 11) == (0, 10, 1)
    with pytest.raises(FsiError):
        parse_word("2", 2)
    p = tmp_path / "w.txt"
    write_word_file(p, (1, 0, 35))
    assert read_word_file(p, 36) == (1, 0, 35)
    write_word_file(p, ())
    assert p.read_text() == ""


def test_sources(tmp_path):
    src = ChampernowneSource(2)
    assert src.prefix(3) == (1, 1, 0)
    assert src.prefix(100)[:3] == (1, 1, 0)
    lit = open_source("literal:0110", 2)
    assert lit.prefix(4) == (0, 1, 1, 0)
    with pytest.raises(FsiError):
        lit.prefix(5)
    (tmp_path / "x").write_text("01\n10")
    assert open_source(f"file:{tmp_path / 'x'}", 2).prefix(4) == (0, 1, 1, 0)
    with pytest.raises(FsiError):
        open_source("nope", 2)


def test_inconsistent_source_detected():
    class Flaky(WordSource):
        calls = 0

        def _compute(self, n):
            self.calls += 1
            return [self.calls % 2] * n

    src = Flaky(2)
    src.prefix(2)
    with pytest.raises(FsiError):
        src.prefix(4)


@given(words(), st.integers(1, 3))
def test_aligned_counts_partition(u, r):
    total = 0
    for w in all_words(r, 2):
        c = occ_aligned(u, w, r)
        assert c <= len(u) // r
        total += c
    assert total == len(u) // r


@given(words(k=3), st.integers(1, 3))
def test_overlapping_counts_sum(u, m):
    if len(u) >= m:
        assert sum(occ_overlapping(u, w) for w in all_words(m, 3)) == len(u) - m + 1


@given(words(max_size=30).filter(len), st.data())
def test_one_symbol_change_moves_aligned_count_by_one(u, data):
    pos = data.draw(st.integers(0, len(u) - 1))
    r = data.draw(st.integers(1, 3))
    v = u[:pos] + (1 - u[pos],) + u[pos + 1:]
    for w in all_words(r, 2):
        assert abs(occ_aligned(u, w, r) - occ_aligned(v, w, r)) <= 1


@given(words(max_size=30).filter(len), st.fractions(0, 1), st.fractions(0, 1))
def test_run_test_monotone_in_eps(u, e1, e2):
    lo, hi = sorted((e1, e2))
    if run_test(u, 1, lo, 2):
        assert run_test(u, 1, hi, 2)
    assert run_test(u, 1, Fraction(1), 2)


@given(st.integers(0, 300), st.integers(0, 300), st.integers(2, 5))
def test_champernowne_prefix_consistency(n1, n2, k):
    a, b = sorted((n1, n2))
    src = ChampernowneSource(k)
    long = src.prefix(b)
    assert src.prefix(a) == long[:a] == champernowne_prefix(k, a)


def test_literal_source_prefix_consistency():
    src = LiteralSource("0110100110010110", 2)
    for a in range(17):
        for b in range(a, 17):
            assert src.prefix(b)[:a] == src.prefix(a)
