"""Randomised invariant suites shared by ``verify all`` and the test-suite.

Every suite is seeded, returns a SuiteResult and never raises on a failed
check; the first counterexample is kept in ``detail``.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .companion import SliceSpec, naive_slice_measure, slice_measure
from .exactprob import brute_force_distribution, dp_count_distribution
from .pairbuilder import PrefixPair, bad_mass, potential
from .schedule import Schedule, dyadic_eps, eps_real
from .shuffler import Shuffler, decode, encode, nth_bitstring, run_n
from .words import LiteralSource, all_words, format_word

# eps_n scaled down so the block tests can fail at n <= 16
BITE_SCALE = Fraction(1, 8)


@dataclass
class SuiteResult:
    name: str
    ok: bool
    cases: int
    detail: str = ""

    def line(self) -> str:
        text = f"SUITE {self.name} {'pass' if self.ok else 'fail'} {self.cases} cases"
        return text + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class CyclicFamily:
    """i -> shufflers[(i - 1) mod len]; picklable stand-in for the enumeration."""

    shufflers: tuple

    def __call__(self, i: int) -> Shuffler:
        return self.shufflers[(i - 1) % len(self.shufflers)]


def random_shuffler(rng: random.Random, k: int, max_states: int) -> Shuffler:
    Q = rng.randint(1, max_states)
    delta = tuple(tuple(rng.randrange(Q) for _ in range(k)) for _ in range(Q))
    tau = tuple(rng.choice((1, 2)) for _ in range(Q))
    return Shuffler(k, Q, rng.randrange(Q), delta, tau)


def random_word(rng: random.Random, n: int, k: int) -> tuple:
    return tuple(rng.randrange(k) for _ in range(n))


def random_family(rng: random.Random, k: int = 2, size: int = 3, max_states: int = 3) -> CyclicFamily:
    return CyclicFamily(tuple(random_shuffler(rng, k, max_states) for _ in range(size)))


def biting_schedule(rng: random.Random, k: int = 2) -> Schedule:
    return Schedule(k=k, eps_scale=BITE_SCALE, family=random_family(rng, k))


def _suite(name: str, cases: Sequence, check: Callable) -> SuiteResult:
    for n, case in enumerate(cases, 1):
        problem = check(case)
        if problem:
            return SuiteResult(name, False, n, problem)
    return SuiteResult(name, True, len(cases))


def encoding_suite(seed: int = 0, trials: int = 1000, max_states: int = 8) -> SuiteResult:
    rng = random.Random(seed)
    machines = [random_shuffler(rng, rng.randint(2, 4), max_states) for _ in range(trials)]

    def check(S):
        back = decode(encode(S), S.k)
        if back != S:
            return f"round trip changed {S}"
        return None
    return _suite("encoding", machines, check)


def bitstring_suite(limit: int = 1 << 12, k: int = 2) -> SuiteResult:
    """encode(decode(b)) = b for every valid b_i with i < limit."""
    def check(i):
        b = nth_bitstring(i)
        S = decode(b, k)
        if S is not None and encode(S) != b:
            return f"b_{i}={b!r} does not re-encode"
        if S is not None and S.num_states > len(b):
            return f"b_{i} has more states than bits"
        return None
    return _suite("bitstrings", range(1, limit), check)


def prefix_suite(seed: int = 0, trials: int = 200, k: int = 2) -> SuiteResult:
    rng = random.Random(seed)
    cases = []
    for _ in range(trials):
        S = random_shuffler(rng, k, 8)
        n = rng.randint(0, 20)
        x, y = random_word(rng, n, k), random_word(rng, n, k)
        extra = rng.randint(0, 10)
        cases.append((S, n, x, y, x + random_word(rng, extra, k), y + random_word(rng, extra, k)))

    def check(case):
        S, n, x, y, x2, y2 = case
        out, st = run_n(S, x, y, n)
        if run_n(S, x2, y2, n)[0] != out:
            return f"extension changed output of {S} at n={n}"
        if st.a + st.b != n:
            return "heads do not add up to n"
        for n2 in range(n + 1):
            if run_n(S, x, y, n2)[0] != out[:n2]:
                return f"output at n={n2} is not a prefix of the output at n={n}"
        return None
    return _suite("prefix-determinism", cases, check)


def dp_oracle_cases(seed: int = 0, machines: int = 50, max_n: int = 8, max_r: int = 2, k: int = 2):
    """Every (S, n, L', r, w) for the given machines, with random prefixes."""
    rng = random.Random(seed)
    for _ in range(machines):
        S = random_shuffler(rng, k, 4)
        for n in range(1, max_n + 1):
            for Lp in range(n + 1):
                up, vp = random_word(rng, Lp, k), random_word(rng, Lp, k)
                for r in range(1, min(max_r, n) + 1):
                    for w in all_words(r, k):
                        yield S, n, r, w, up, vp


def dp_oracle_suite(seed: int = 0, machines: int = 5, max_n: int = 6) -> SuiteResult:
    def check(case):
        S, n, r, w, up, vp = case
        dp = dp_count_distribution(S, n, r, w, up, vp)
        bf = brute_force_distribution(S, n, r, w, up, vp)
        if dp != bf:
            return f"dp {dp.as_dict()} != oracle {bf.as_dict()} for {S}, n={n}, w={format_word(w)}"
        if dp.total() != S.k ** n:
            return "mass does not sum to 1"
        return None
    return _suite("dp-oracle", list(dp_oracle_cases(seed, machines, max_n)), check)


def conditioning_suite(seed: int = 0, trials: int = 50, k: int = 2) -> SuiteResult:
    rng = random.Random(seed)
    cases = []
    for _ in range(trials):
        n = rng.randint(2, 12)
        L = rng.randint(0, n - 1)
        r = rng.randint(1, min(3, n))
        cases.append((random_shuffler(rng, k, 4), n, r, random_word(rng, r, k),
                      random_word(rng, L, k), random_word(rng, L, k)))

    def check(case):
        S, n, r, w, up, vp = case
        whole = dp_count_distribution(S, n, r, w, up, vp).mass
        parts = [dp_count_distribution(S, n, r, w, up + (a,), vp + (b,)).mass
                 for a in range(k) for b in range(k)]
        summed = [sum(col) for col in zip(*parts)]
        if [v * k * k for v in whole] != summed:
            return f"refinements of {S} at n={n} do not average to the parent"
        return None
    return _suite("conditioning", cases, check)


def tower_cases(seed: int = 0, trials: int = 100, k: int = 2):
    rng = random.Random(seed)
    for _ in range(trials):
        sched = biting_schedule(rng, k)
        n = rng.randint(8, 16)
        L = rng.randint(0, 6)
        yield sched, n, PrefixPair(random_word(rng, L, k), random_word(rng, L, k))


def tower_suite(seed: int = 0, trials: int = 20) -> SuiteResult:
    def check(case):
        sched, n, pair = case
        k = sched.k
        lhs = bad_mass(n, pair, sched)
        rhs = sum(bad_mass(n, pair.extend(a, b), sched) for a in range(k) for b in range(k)) / (k * k)
        if lhs != rhs:
            return f"B_{n} = {lhs} but the average of refinements is {rhs}"
        return None
    return _suite("tower", list(tower_cases(seed, trials)), check)


def integrality_cases(seed: int = 0, trials: int = 50, k: int = 2):
    rng = random.Random(seed)
    for _ in range(trials):
        sched = biting_schedule(rng, k)
        n = rng.randint(3, 12)
        yield sched, n, PrefixPair(random_word(rng, n, k), random_word(rng, n, k))


def integrality_suite(seed: int = 0, trials: int = 20) -> SuiteResult:
    def check(case):
        sched, n, pair = case
        B = bad_mass(n, pair, sched)
        if B.denominator != 1:
            return f"B_{n} = {B} on a fully fixed pair"
        return None
    return _suite("integrality", list(integrality_cases(seed, trials)), check)


def one_step_cases(seed: int = 0, trials: int = 100, k: int = 2, max_L: int = 7):
    rng = random.Random(seed)
    for _ in range(trials):
        sched = biting_schedule(rng, k)
        L = rng.randint(0, max_L)
        yield sched, L, PrefixPair(random_word(rng, L, k), random_word(rng, L, k))


def one_step_suite(seed: int = 0, trials: int = 20) -> SuiteResult:
    def check(case):
        sched, L, pair = case
        k = sched.k
        best = min(potential(L + 1, pair.extend(a, b), sched) for a in range(k) for b in range(k))
        avg = sum((bad_mass(sched.checkpoint(j)[0], pair, sched) for j in sched.active_set(L + 1)),
                  Fraction(0))
        if best > avg:
            return f"min Phi_{L + 1} = {best} exceeds the average {avg}"
        return None
    return _suite("one-step", list(one_step_cases(seed, trials)), check)


def schedule_suite(max_L: int = 3000, max_n: int = 400) -> SuiteResult:
    sched = Schedule()

    def check(L):
        now, nxt = set(sched.active_set(L)), set(sched.active_set(L + 1))
        js = range(1, math.isqrt(L + 1) + 2)
        born = {j for j in js if sched.checkpoint(j)[1] == L + 1}
        dead = {j for j in js if sched.checkpoint(j)[0] == L}
        if nxt - now != born or now - nxt != dead:
            return f"activation identities fail at L={L}"
        if len(now) ** 2 > L:
            return f"|J({L})| exceeds sqrt(L)"
        if 3 <= L <= max_n:
            e = dyadic_eps(L, 2, 64)
            if abs(Fraction(eps_real(L, 2)) - e) > Fraction(1, 1 << 40):
                return f"eps_{L} = {float(e)} far from {eps_real(L, 2)}"
        return None
    return _suite("schedule", range(max_L), check)


def slice_suite(seed: int = 0, trials: int = 6, k: int = 2) -> SuiteResult:
    """Lazy slice measures against the naive extension count."""
    rng = random.Random(seed)
    cases = []
    for _ in range(trials):
        fam = random_family(rng, k, size=2, max_states=2)
        t, N = rng.randint(1, 2), rng.randint(2, 3)
        x = LiteralSource("".join(str(rng.randrange(k)) for _ in range(N * N)), k)
        v = random_word(rng, rng.randint(0, 3), k)
        cases.append((SliceSpec(t, N), x, v, fam))

    def check(case):
        spec, x, v, fam = case
        lazy = slice_measure(spec, x, v, k, family=fam)
        naive = naive_slice_measure(spec, x, v, k, family=fam)
        if lazy != naive:
            return f"slice {spec} on [{format_word(v)}]: {lazy} != {naive}"
        return None
    return _suite("slice-measure", cases, check)


def run_all(seed: int = 0) -> list:
    return [
        encoding_suite(seed, 300),
        bitstring_suite(),
        prefix_suite(seed, 100),
        dp_oracle_suite(seed),
        conditioning_suite(seed),
        tower_suite(seed),
        integrality_suite(seed),
        one_step_suite(seed),
        schedule_suite(),
        slice_suite(seed),
    ]
