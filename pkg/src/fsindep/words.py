"""Words over the alphabet {0, ..., k-1}, word sources and block statistics.

A word is a tuple of ints. On disk and on the command line a word is one
character per symbol (``0-9`` then ``a-z``), so alphabets up to k = 36 are
supported; whitespace is ignored when reading.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Sequence

from .errors import FsiError

Word = tuple  # tuple[int, ...]

DIGITS = "0123456789abcdefghijklmnopqrstuvwxyz"
MAX_K = len(DIGITS)


def check_alphabet(k: int) -> int:
    if not 2 <= k <= MAX_K:
        raise FsiError(f"alphabet size must be in [2, {MAX_K}], got {k}")
    return k


def parse_word(text: str, k: int) -> Word:
    symbols = []
    for ch in text:
        if ch.isspace():
            continue
        v = DIGITS.find(ch.lower())
        if v < 0 or v >= k:
            raise FsiError(f"symbol {ch!r} not in alphabet of size {k}")
        symbols.append(v)
    return tuple(symbols)


def format_word(word: Sequence[int]) -> str:
    return "".join(DIGITS[a] for a in word)


def all_words(r: int, k: int) -> Iterator[Word]:
    """All words of length r in lexicographic order."""
    return itertools.product(range(k), repeat=r)


def occ_overlapping(u: Sequence[int], w: Sequence[int]) -> int:
    m = len(w)
    if m == 0:
        raise FsiError("block must be non-empty")
    w = tuple(w)
    u = tuple(u)
    return sum(1 for t in range(len(u) - m + 1) if u[t:t + m] == w)


def occ_aligned(u: Sequence[int], w: Sequence[int], r: int) -> int:
    if r < 1 or len(w) != r:
        raise FsiError(f"aligned count needs |w| = r >= 1, got |w|={len(w)}, r={r}")
    w = tuple(w)
    u = tuple(u)
    return sum(1 for j in range(len(u) // r) if u[j * r:j * r + r] == w)


def overlapping_counts(u: Sequence[int], m: int) -> dict:
    """Map each block of length m occurring in u to its overlapping count."""
    u = tuple(u)
    counts: dict = {}
    for t in range(len(u) - m + 1):
        b = u[t:t + m]
        counts[b] = counts.get(b, 0) + 1
    return counts


def max_deviation(u: Sequence[int], m: int, k: int) -> Fraction:
    """max over w in Sigma^m of |occ(u, w)/|u| - k^-m|, exactly.

    The divisor is |u| (not |u| - m + 1).
    """
    n = len(u)
    if m < 1 or m > n:
        raise FsiError(f"block length must satisfy 1 <= m <= |u|, got m={m}, |u|={n}")
    counts = overlapping_counts(u, m)
    km = k ** m
    # scaled by n * k^m: |c k^m - n|
    worst = max((abs(c * km - n) for c in counts.values()), default=0)
    if len(counts) < km:
        worst = max(worst, n)
    return Fraction(worst, n * km)


def run_test(u: Sequence[int], m: int, eps: Fraction, k: int) -> bool:
    if eps < 0:
        raise FsiError("tolerance must be non-negative")
    return max_deviation(u, m, k) <= eps


def champernowne_prefix(k: int, n: int) -> Word:
    """First n digits of 1, 2, 3, ... written in base k and concatenated."""
    check_alphabet(k)
    out: list = []
    i = 1
    while len(out) < n:
        digits = []
        j = i
        while j:
            j, d = divmod(j, k)
            digits.append(d)
        out.extend(reversed(digits))
        i += 1
    return tuple(out[:n])


class WordSource:
    """A (possibly infinite) word given by its prefixes.

    Subclasses implement ``_compute(n)``; prefixes are cached so the
    underlying oracle is asked at most once per larger length.
    """

    name = "source"

    def __init__(self, k: int):
        self.k = check_alphabet(k)
        self._cache: Word = ()

    def prefix(self, n: int) -> Word:
        if n < 0:
            raise FsiError("prefix length must be non-negative")
        if n > len(self._cache):
            got = tuple(self._compute(n))
            if len(got) < n:
                raise FsiError(f"{self.name}: only {len(got)} symbols available, {n} requested")
            if got[:len(self._cache)] != self._cache:
                raise FsiError(f"{self.name}: prefix oracle is inconsistent")
            self._cache = got
        return self._cache[:n]

    def _compute(self, n: int) -> Sequence[int]:
        raise NotImplementedError


class ChampernowneSource(WordSource):
    name = "champernowne"

    def _compute(self, n):
        # grow geometrically to keep repeated small extensions cheap
        return champernowne_prefix(self.k, max(n, 2 * len(self._cache)))


class LiteralSource(WordSource):
    """A finite word; asking past its end is an error."""

    name = "literal"

    def __init__(self, text: str, k: int):
        super().__init__(k)
        self._word = parse_word(text, k)

    def _compute(self, n):
        return self._word


class FileSource(LiteralSource):
    def __init__(self, path, k: int):
        self.name = f"file:{path}"
        super().__init__(Path(path).read_text(), k)


def open_source(spec: str, k: int) -> WordSource:
    """``champernowne``, ``file:<path>`` or ``literal:<symbols>``."""
    if spec == "champernowne":
        return ChampernowneSource(k)
    if spec.startswith("file:"):
        return FileSource(spec[5:], k)
    if spec.startswith("literal:"):
        return LiteralSource(spec[8:], k)
    raise FsiError(f"unknown word source {spec!r}")


def read_word_file(path, k: int) -> Word:
    return parse_word(Path(path).read_text(), k)


def write_word_file(path, word: Sequence[int]) -> None:
    text = format_word(word)
    Path(path).write_text(text + "\n" if text else "")
