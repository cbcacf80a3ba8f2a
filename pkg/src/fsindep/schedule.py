"""Test parameters per output length and the checkpoint/activation schedule.

For n >= 3: t_n = n shufflers, block lengths r <= ell_n = floor(log_k(n) / 3),
tolerance eps_n = 2 sqrt(ln n * log_k n / n) = 2 ln n / sqrt(n ln k), stored
as a dyadic rational rounded *down* at ``eps_bits`` fractional bits.
Checkpoints are N_j = (j + m0)^4, activated from A_j = (j + m0)^2 on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

import mpmath
from mpmath.libmp import round_floor, to_int

from .errors import FsiError
from .shuffler import Shuffler, nth_shuffler

# partial sum bound for sum_j (j + m0)^-8, then an integral tail
SUM_TERMS = 10_000
_SUM_BITS = 256


def block_limit(n: int, k: int) -> int:
    """floor(log_k(n) / 3), the largest ell with k^(3 ell) <= n."""
    ell = 0
    while k ** (3 * (ell + 1)) <= n:
        ell += 1
    return ell


def block_count(n: int, r: int) -> int:
    if not 1 <= r <= n:
        raise FsiError(f"need 1 <= r <= n, got r={r}, n={n}")
    return n // r


def _floor_bounds(x) -> tuple:
    """Exact floors of an interval's endpoints (mpmath.floor rounds to 53 bits)."""
    lo, hi = x._mpi_
    return to_int(lo, round_floor), to_int(hi, round_floor)


@lru_cache(maxsize=None)
def dyadic_eps(n: int, k: int, bits: int, scale: Fraction = Fraction(1)) -> Fraction:
    """floor(scale * eps_n * 2^bits) / 2^bits, certified by interval arithmetic."""
    if n < 3:
        raise FsiError("eps_n is defined for n >= 3")
    ctx = mpmath.iv
    saved = ctx.prec
    prec = bits + 64
    try:
        while True:
            ctx.prec = prec
            ln_n = ctx.log(n)
            val = 2 * ln_n / ctx.sqrt(n * ctx.log(k))
            val = val * scale.numerator / scale.denominator * ctx.mpf(2) ** bits
            lo, hi = _floor_bounds(val)
            if lo == hi:
                return Fraction(lo, 2 ** bits)
            prec *= 2
    finally:
        ctx.prec = saved


@lru_cache(maxsize=None)
def tail_sum_upper(m0: int, terms: int = SUM_TERMS) -> Fraction:
    """A certified upper bound on sum_{j>=1} (j + m0)^-8."""
    one = 1 << _SUM_BITS
    # each term rounded up to a multiple of 2^-_SUM_BITS
    partial = sum(-(-one // (j + m0) ** 8) for j in range(1, terms + 1))
    tail = Fraction(1, 7 * (terms + m0) ** 7)  # integral of (x + m0)^-8 over [terms, inf)
    return Fraction(partial, one) + tail


def choose_m0(n0: int) -> int:
    """Least m0 with sum_j N_j^-2 < 1/4 and N_1 = (1 + m0)^4 >= n0."""
    if n0 < 1:
        raise FsiError("n0 must be at least 1")
    m0 = 0
    while (1 + m0) ** 4 < n0 or tail_sum_upper(m0) >= Fraction(1, 4):
        m0 += 1
    return m0


@dataclass(frozen=True)
class Schedule:
    """Parameters shared by the pair builder.

    ``eps_scale`` multiplies eps_n before rounding (1 reproduces the
    construction; smaller values make the tests bite at small n).
    ``family`` overrides the shuffler enumeration i -> S_i.
    """

    k: int = 2
    m0: int = 1
    n0: int = 1
    eps_bits: int = 64
    eps_scale: Fraction = Fraction(1)
    family: Optional[Callable[[int], Shuffler]] = None

    def __post_init__(self):
        if self.k < 2:
            raise FsiError("alphabet size must be at least 2")
        if self.m0 < 0 or self.n0 < 1 or self.eps_bits < 1:
            raise FsiError("m0 >= 0, n0 >= 1 and eps_bits >= 1 are required")
        if not self.eps_scale > 0:
            raise FsiError("eps_scale must be positive")
        object.__setattr__(self, "eps_scale", Fraction(self.eps_scale))
        if (1 + self.m0) ** 4 < self.n0:
            raise FsiError(f"N_1 = {(1 + self.m0) ** 4} is below n0 = {self.n0}")
        if tail_sum_upper(self.m0) >= Fraction(1, 4):
            raise FsiError(f"m0 = {self.m0}: sum of N_j^-2 is not certified below 1/4")

    @classmethod
    def auto(cls, n0: int, **kw) -> "Schedule":
        return cls(m0=choose_m0(n0), n0=n0, **kw)

    def shuffler(self, i: int) -> Shuffler:
        if self.family is not None:
            return self.family(i)
        return nth_shuffler(i, self.k)

    def eps(self, n: int) -> Fraction:
        return dyadic_eps(n, self.k, self.eps_bits, self.eps_scale)

    def params_of(self, n: int):
        """(t_n, ell_n, eps_n) with eps_n the stored dyadic value."""
        if n < 3:
            raise FsiError("test parameters are defined for n >= 3")
        return n, block_limit(n, self.k), self.eps(n)

    def checkpoint(self, j: int):
        """(N_j, A_j)."""
        if j < 1:
            raise FsiError("checkpoint indices start at 1")
        return (j + self.m0) ** 4, (j + self.m0) ** 2

    def active_set(self, L: int) -> list:
        """J(L) = {j >= 1 : A_j <= L <= N_j}, ascending."""
        out = []
        j = 1
        while (j + self.m0) ** 2 <= L:
            if L <= (j + self.m0) ** 4:
                out.append(j)
            j += 1
        return out

    def activated_at(self, L: int) -> list:
        """Indices with A_j = L."""
        root = math.isqrt(L)
        if root * root != L or root - self.m0 < 1:
            return []
        return [root - self.m0]

    def checkpoints_upto(self, length: int) -> list:
        out = []
        j = 1
        while (j + self.m0) ** 4 <= length:
            out.append(j)
            j += 1
        return out


def eps_real(n: int, k: int) -> float:
    """Unrounded eps_n as a float, for reports only."""
    return 2 * math.log(n) / math.sqrt(n * math.log(k))


CONFIG_KEYS = {"k": int, "m0": int, "n0": int, "eps_bits": int, "eps_scale": Fraction}


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise FsiError(f"config line without '=': {raw!r}")
        out[key] = value.strip()
    return out
