"""Exact law of aligned block counts of shuffled output under prefix conditioning.

Probabilities over output length n are integer numerators with the implicit
denominator k**n; they are reduced to Fractions only at the edges.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath

from .errors import BudgetExceeded, FsiError
from .shuffler import Shuffler, run_n
from .words import format_word, occ_aligned, parse_word


@dataclass(frozen=True)
class BaseKProb:
    numerator: int
    steps: int
    k: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.k ** self.steps)

    def __add__(self, other: "BaseKProb") -> "BaseKProb":
        if (self.steps, self.k) != (other.steps, other.k):
            raise FsiError("BaseKProb addition needs equal denominators")
        return BaseKProb(self.numerator + other.numerator, self.steps, self.k)


@dataclass(frozen=True)
class CountDistribution:
    """Law of C = alocc_{w,r}(output[1..n]); ``mass[c]`` is a numerator over k**n."""

    n: int
    r: int
    w: tuple
    k: int
    mass: tuple

    @property
    def m(self) -> int:
        return self.n // self.r

    def prob(self, c: int) -> Fraction:
        if not 0 <= c < len(self.mass):
            return Fraction(0)
        return Fraction(self.mass[c], self.k ** self.n)

    def base_k(self, c: int) -> BaseKProb:
        return BaseKProb(self.mass[c] if 0 <= c < len(self.mass) else 0, self.n, self.k)

    def as_dict(self) -> dict:
        return {c: self.prob(c) for c, v in enumerate(self.mass) if v}

    def total(self) -> int:
        return sum(self.mass)

    def serialize(self) -> str:
        lines = [f"{self.n} {self.r} {format_word(self.w)} {self.k}"]
        lines.extend(f"{c} {v}" for c, v in enumerate(self.mass))
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "CountDistribution":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        n, r, w, k = rows[0]
        k = int(k)
        mass = [0] * (int(n) // int(r) + 1)
        for c, v in rows[1:]:
            mass[int(c)] = int(v)
        return cls(int(n), int(r), parse_word(w, k), k, tuple(mass))


def _check_instance(S: Shuffler, n: int, r: int, w, up, vp):
    if r < 1 or len(w) != r:
        raise FsiError(f"block must have length r >= 1 (r={r}, |w|={len(w)})")
    if len(up) != len(vp):
        raise FsiError("conditioning prefixes must have equal length")
    if len(up) > n:
        raise FsiError(f"prefix length {len(up)} exceeds n={n}")
    if any(not 0 <= a < S.k for a in itertools.chain(w, up, vp)):
        raise FsiError("symbol outside the alphabet")


def dp_count_distribution(S: Shuffler, n: int, r: int, w: Sequence[int],
                          up: Sequence[int], vp: Sequence[int]) -> CountDistribution:
    """Forward DP over output time for the law of the aligned count of w.

    States are (q, a, b, sigma, c) with the block offset s = t mod r implied
    by t. Head positions are capped at L' = |up|: past the fixed prefix every
    read is uniform, so the exact position no longer matters.
    """
    w, up, vp = tuple(w), tuple(up), tuple(vp)
    _check_instance(S, n, r, w, up, vp)
    return _dp(S, n, r, w, up, vp)


@lru_cache(maxsize=1 << 16)
def _dp(S: Shuffler, n: int, r: int, w: tuple, up: tuple, vp: tuple) -> CountDistribution:
    k = S.k
    Lp = len(up)
    delta, tau = S.delta, S.tau
    m = n // r
    layer = {(S.start, 0, 0, 1, 0): 1}
    for t in range(n):
        s = t % r
        closes = s == r - 1
        want = w[s]
        nxt: dict = {}
        get = nxt.get
        for (q, a, b, sig, c), mass in layer.items():
            if tau[q] == 1:
                fixed = up[a] if a < Lp else None
                a2, b2 = min(a + 1, Lp), b
            else:
                fixed = vp[b] if b < Lp else None
                a2, b2 = a, min(b + 1, Lp)
            if fixed is None:
                branches = range(k)
                weight = mass
            else:
                branches = (fixed,)
                weight = mass * k
            for alpha in branches:
                sig2 = sig if alpha == want else 0
                if closes:
                    key = (delta[q][alpha], a2, b2, 1, c + sig2)
                else:
                    key = (delta[q][alpha], a2, b2, sig2, c)
                nxt[key] = get(key, 0) + weight
        layer = nxt
    mass = [0] * (m + 1)
    for (_q, _a, _b, _sig, c), v in layer.items():
        mass[c] += v
    return CountDistribution(n, r, w, k, tuple(mass))


def output_law(S: Shuffler, n: int, up: Sequence[int], vp: Sequence[int], budget: int = 1 << 20) -> dict:
    """Map output word -> number of equally likely tape extensions producing it."""
    up, vp = tuple(up), tuple(vp)
    return dict(_output_law(S, n, up, vp, budget))


@lru_cache(maxsize=256)
def _output_law(S, n, up, vp, budget):
    k = S.k
    free = n - len(up)
    size = k ** (2 * free)
    if size > budget:
        raise BudgetExceeded(f"brute force needs {size} tape pairs, budget {budget}")
    tails = list(itertools.product(range(k), repeat=free))
    law: dict = {}
    for xt in tails:
        xp = up + xt
        for yt in tails:
            out, _ = run_n(S, xp, vp + yt, n)
            law[out] = law.get(out, 0) + 1
    return tuple(law.items())


def brute_force_distribution(S: Shuffler, n: int, r: int, w: Sequence[int],
                             up: Sequence[int], vp: Sequence[int],
                             budget: int = 1 << 20) -> CountDistribution:
    """Same law as ``dp_count_distribution``, by enumerating every extension."""
    w, up, vp = tuple(w), tuple(up), tuple(vp)
    _check_instance(S, n, r, w, up, vp)
    k = S.k
    free = n - len(up)
    mass = [0] * (n // r + 1)
    for out, count in _output_law(S, n, up, vp, budget):
        mass[occ_aligned(out, w, r)] += count
    # each of the k^(2 free) extension pairs has probability k^-(2 free); rescale to k^-n
    scale = k ** n
    denom = k ** (2 * free)
    assert all(v * scale % denom == 0 for v in mass)
    return CountDistribution(n, r, w, k, tuple(v * scale // denom for v in mass))


def failing_counts(m: int, r: int, k: int, eps: Fraction) -> list:
    """Counts c in [0, m] with |c - m/k^r| >= eps*m."""
    kr = k ** r
    # |c k^r - m| >= eps m k^r, cleared of eps's denominator
    p, q = Fraction(eps).numerator, Fraction(eps).denominator
    return [c for c in range(m + 1) if abs(c * kr - m) * q >= p * m * kr]


def failure_probability(dist: CountDistribution, eps: Fraction) -> Fraction:
    """Pr[|C - m/k^r| >= eps*m], the complement of the strict good event."""
    if eps < 0:
        raise FsiError("tolerance must be non-negative")
    bad = failing_counts(dist.m, dist.r, dist.k, eps)
    return Fraction(sum(dist.mass[c] for c in bad), dist.k ** dist.n)


def chernoff_bound(M: int, p: Fraction, delta: Fraction) -> float:
    """2 exp(-delta^2 M p / 3), rounded upward to a float."""
    p, delta = Fraction(p), Fraction(delta)
    if not 0 < delta <= 1:
        raise FsiError("delta must lie in (0, 1]")
    if not 0 < p <= 1:
        raise FsiError("p must lie in (0, 1]")
    if M < 0:
        raise FsiError("M must be non-negative")
    x = delta * delta * M * p / 3
    ctx = mpmath.iv
    saved = ctx.prec
    ctx.prec = 96
    try:
        enclosure = ctx.exp(-ctx.mpf(x.numerator) / x.denominator)
        upper = 2 * enclosure.b
    finally:
        ctx.prec = saved
    hi = float(upper)
    if mpmath.mpf(hi) < upper:
        hi = math.nextafter(hi, math.inf)
    return hi


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise FsiError(f"bad rational {text!r}: {exc}") from None
