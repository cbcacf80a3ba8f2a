"""Effective construction of a companion word y for a computable word x.

A slice H_t(N)(x) is the set of y such that, for every shuffler S_i with
i <= t, every block length l <= t and every output length n in [N, N^2],
the output S_i(x, y)[1..n] has all l-block frequencies within 2^-t of
uniform. Slices are clopen, so their measures are exact rationals; the
companion is extracted one symbol at a time from cylinder-measure thresholds.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .errors import BudgetExceeded, FsiError
from .exactprob import format_fraction
from .shuffler import RunState, Shuffler, advance, nth_shuffler, run_n
from .words import Word, WordSource, all_words, format_word, run_test

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SliceSpec:
    t: int
    N: int

    def __post_init__(self):
        if self.t < 1 or self.N < 2:
            raise FsiError(f"slice needs t >= 1 and N >= 2, got t={self.t}, N={self.N}")

    @property
    def tolerance(self) -> Fraction:
        return Fraction(1, 2 ** self.t)

    @property
    def horizon(self) -> int:
        return self.N * self.N

    @property
    def target(self) -> Fraction:
        """The measure a stage-t cutoff must reach."""
        return 1 - Fraction(1, 4 ** self.t)


@dataclass(frozen=True)
class Caps:
    max_window: int = 4          # largest cutoff N_t accepted for a stage t <= T
    max_enum: int = 1 << 16      # terminal nodes per exact measure computation
    max_horizon: int = 1 << 16   # longest output window N^2 any slice may need
    max_level: int = 256         # largest L tried by the extraction search
    lookahead: bool = True


def tail(L: int) -> Fraction:
    """sum_{t > L} 4^-t = 4^-L / 3."""
    if L < 0:
        raise FsiError("tail index must be non-negative")
    return Fraction(1, 3 * 4 ** L)


def slice_membership(S: Shuffler, n: int, m: int, eps: Fraction, xp: Sequence[int], yp: Sequence[int]) -> bool:
    """Test(S(x, y)[1..n]; m, eps) on the given prefixes."""
    if len(xp) < n or len(yp) < n:
        raise FsiError(f"membership at n={n} needs prefixes of length >= {n}")
    if m > n:
        # no block fits: every frequency is 0, off by exactly k^-m
        return Fraction(1, S.k ** m) <= eps
    out, _ = run_n(S, xp, yp, n)
    return run_test(out, m, eps, S.k)


class _Track:
    """One shuffler's run plus incremental block counts for its window tests."""

    __slots__ = ("S", "horizon", "tests", "ells", "state", "counts", "checked", "failed", "done")

    def __init__(self, S: Shuffler, horizon: int, tests: list):
        self.S = S
        self.horizon = horizon
        self.tests = tests  # (ell, p, q, lo, hi): |occ/n - k^-ell| <= p/q for n in [lo, hi]
        self.ells = sorted({t[0] for t in tests})
        self.state = RunState(S.start)
        self.counts = {ell: {} for ell in self.ells}
        self.checked = 0
        self.failed = False
        self.done = False

    def copy(self) -> "_Track":
        new = object.__new__(_Track)
        new.S, new.horizon, new.tests, new.ells = self.S, self.horizon, self.tests, self.ells
        new.state = self.state.copy()
        new.counts = {ell: dict(c) for ell, c in self.counts.items()}
        new.checked, new.failed, new.done = self.checked, self.failed, self.done
        return new

    def step(self, xp, yp) -> None:
        self.done = advance(self.S, self.state, xp, yp, self.horizon)
        out = self.state.out
        k = self.S.k
        for n in range(self.checked + 1, len(out) + 1):
            for ell in self.ells:
                if n >= ell:
                    block = tuple(out[n - ell:n])
                    c = self.counts[ell]
                    c[block] = c.get(block, 0) + 1
            for ell, p, q, lo, hi in self.tests:
                if lo <= n <= hi and not self._passes(n, ell, p, q, k):
                    self.failed = True
                    self.checked = n
                    return
        self.checked = len(out)

    def _passes(self, n, ell, p, q, k) -> bool:
        kl = k ** ell
        counts = self.counts[ell]
        worst = max((abs(c * kl - n) for c in counts.values()), default=0)
        if len(counts) < kl:
            worst = max(worst, n)
        return worst * q <= p * n * kl


class SliceOracle:
    """Exact measures of intersections of slices with cylinders, for a fixed x.

    Only the y-symbols a shuffler actually reads are branched on, and a
    branch is cut as soon as any window test fails, so the count of terminal
    nodes is at most the naive k^(N^2 - |v|).
    """

    def __init__(self, x: WordSource, k: int, max_enum: int = 1 << 16, max_horizon: int = 1 << 16,
                 family: Optional[Callable[[int], Shuffler]] = None):
        if x.k != k:
            raise FsiError(f"source alphabet {x.k} differs from k={k}")
        self.x = x
        self.k = k
        self.max_enum = max_enum
        self.max_horizon = max_horizon
        self.family = family
        self._memo: dict = {}
        self.queries: list = []  # (specs, v) in first-query order
        self.terminal_nodes = 0

    def shuffler(self, i: int) -> Shuffler:
        return self.family(i) if self.family is not None else nth_shuffler(i, self.k)

    def _tracks(self, specs) -> list:
        plan: dict = {}
        for spec in specs:
            tol = spec.tolerance
            for i in range(1, spec.t + 1):
                S = self.shuffler(i)
                horizon, tests = plan.get(S, (0, set()))
                tests = tests | {(ell, tol.numerator, tol.denominator, spec.N, spec.horizon)
                                 for ell in range(1, spec.t + 1)}
                plan[S] = (max(horizon, spec.horizon), tests)
        return [_Track(S, h, sorted(tests)) for S, (h, tests) in plan.items()]

    def measure(self, specs: Sequence[SliceSpec], v: Sequence[int]) -> Fraction:
        """mu(intersection of the slices, restricted to the cylinder [v])."""
        specs, v = tuple(specs), tuple(v)
        key = (specs, v)
        if key in self._memo:
            return self._memo[key]
        self.queries.append(key)
        value = self._compute(specs, v)
        self._memo[key] = value
        return value

    def _compute(self, specs, v) -> Fraction:
        k = self.k
        if not specs:
            return Fraction(1, k ** len(v))
        horizon = max(s.horizon for s in specs)
        if horizon > self.max_horizon:
            raise BudgetExceeded(f"slice window N^2={horizon} exceeds max horizon {self.max_horizon}")
        xp = self.x.prefix(horizon)
        acc = Fraction(0)
        nodes = 0
        stack = [(v, self._tracks(specs))]
        while stack:
            y, tracks = stack.pop()
            for tr in tracks:
                if not tr.done:
                    tr.step(xp, y)
                if tr.failed:
                    break
            if any(tr.failed for tr in tracks):
                nodes += 1
            elif all(tr.done for tr in tracks):
                nodes += 1
                acc += Fraction(1, k ** len(y))
            else:
                for a in reversed(range(k)):
                    stack.append((y + (a,), [tr.copy() for tr in tracks]))
                continue
            if nodes > self.max_enum:
                naive = k ** max(0, horizon - len(v))
                raise BudgetExceeded(
                    f"measure of {len(specs)} slice(s) on a cylinder of length {len(v)} needs more than "
                    f"{self.max_enum} terminal nodes (naive enumeration size {naive})")
        self.terminal_nodes += nodes
        return acc


def slice_measure(spec: SliceSpec, x: WordSource, v: Sequence[int], k: int, max_enum: int = 1 << 16,
                  family: Optional[Callable[[int], Shuffler]] = None) -> Fraction:
    """Exact mu(H_t(N)(x) & [v])."""
    return SliceOracle(x, k, max_enum, max(spec.horizon, 1), family).measure((spec,), v)


def naive_slice_measure(spec: SliceSpec, x: WordSource, v: Sequence[int], k: int, max_enum: int = 1 << 16,
                        family: Optional[Callable[[int], Shuffler]] = None) -> Fraction:
    """The same measure by testing every extension of v to the deciding length N^2."""
    v = tuple(v)
    H = spec.horizon
    free = max(0, H - len(v))
    if k ** free > max_enum:
        raise BudgetExceeded(f"naive enumeration needs {k ** free} extensions, cap {max_enum}")
    xp = x.prefix(H)
    shufflers = [family(i) if family else nth_shuffler(i, k) for i in range(1, spec.t + 1)]
    passing = 0
    for ext in all_words(free, k):
        y = v + ext
        if all(slice_membership(S, n, ell, spec.tolerance, xp, y)
               for S in shufflers
               for ell in range(1, spec.t + 1)
               for n in range(spec.N, H + 1)):
            passing += 1
    return Fraction(passing, k ** (len(v) + free))


@dataclass
class CutoffSearch:
    specs: list
    witnesses: list  # (t, N) found by lookahead beyond the last stage
    measures: dict   # (t, N) -> measure of every slice evaluated


def search_cutoffs(x: WordSource, T: int, k: int, caps: Caps = Caps(),
                   oracle: Optional[SliceOracle] = None) -> CutoffSearch:
    """Cutoffs N_1 < ... < N_T with mu(H_t(N_t)) >= 1 - 4^-t and N_{t+1} <= N_t^2.

    With lookahead, stage 1 accepts N only if some M in (N, N^2] passes
    stage 2 with a stage-3 witness in (M, M^2]; later stages pick the least
    M in (N_t, N_t^2] passing stage t+1 with a stage t+2 witness.
    """
    if T < 0:
        raise FsiError("number of stages must be non-negative")
    oracle = oracle or SliceOracle(x, k, caps.max_enum, caps.max_horizon)
    seen: dict = {}

    def ok(t: int, N: int) -> bool:
        spec = SliceSpec(t, N)
        if spec.horizon > caps.max_horizon:
            return False
        if (t, N) not in seen:
            seen[(t, N)] = oracle.measure((spec,), ())
        return seen[(t, N)] >= spec.target

    def chain(t: int, lo: int, hi: int, depth: int) -> Optional[list]:
        """Least M in (lo, hi] passing stage t, followed by its lookahead witnesses."""
        for M in range(lo + 1, hi + 1):
            if M * M > caps.max_horizon:
                return None
            if not ok(t, M):
                continue
            if depth == 0:
                return [M]
            rest = chain(t + 1, M, M * M, depth - 1)
            if rest is not None:
                return [M] + rest
        return None

    def fail(t: int, lo: int, hi: int):
        tried = {N: m for (s, N), m in seen.items() if s == t and lo <= N <= hi}
        best = max(tried.items(), key=lambda kv: kv[1], default=None)
        detail = f"best measure {format_fraction(best[1])} at N={best[0]}" if best else "no window evaluated"
        raise BudgetExceeded(f"stage {t}: no cutoff in [{lo}, {hi}] within caps ({detail}; "
                             f"target {format_fraction(SliceSpec(t, 2).target)})")

    if T == 0:
        return CutoffSearch([], [], seen)
    depth = 1 if caps.lookahead else 0
    cutoffs: list = []
    last: tuple = (1, [])
    for N in range(2, caps.max_window + 1):
        if not ok(1, N):
            continue
        if depth == 0:
            last = (1, [N])
            break
        hi = N * N if T == 1 else min(N * N, caps.max_window)
        rest = chain(2, N, hi, depth)
        if rest is not None:
            last = (1, [N] + rest)
            break
    else:
        fail(1, 2, caps.max_window)
    cutoffs.extend(last[1][:min(T, 2)])  # stage 1 fixes N_1 and N_2 only
    while len(cutoffs) < T:
        t = len(cutoffs)  # choosing N_{t+1}
        Nt = cutoffs[-1]
        hi = min(Nt * Nt, caps.max_window)
        found = chain(t + 1, Nt, hi, depth)
        if found is None:
            fail(t + 1, Nt + 1, hi)
        cutoffs.append(found[0])
        last = (t + 1, found)
    first_stage, values = last
    witnesses = [(first_stage + d, M) for d, M in enumerate(values) if first_stage + d > T]
    specs = [SliceSpec(t, N) for t, N in enumerate(cutoffs[:T], start=1)]
    for a, b in zip(specs, specs[1:]):
        assert a.N < b.N <= a.N * a.N
    return CutoffSearch(specs, witnesses, seen)


def choose_cutoffs(x: WordSource, T: int, k: int, caps: Caps = Caps(),
                   oracle: Optional[SliceOracle] = None) -> list:
    return search_cutoffs(x, T, k, caps, oracle).specs


@dataclass
class TraceEntry:
    ell: int
    L: int
    mu: Fraction                 # mu([v] & F_L)
    tail: Fraction
    symbol_measures: list        # mu([v a] & F_L) for each a
    chosen: int
    rejected: list = field(default_factory=list)  # (L', mu) for L' < L

    def line(self) -> str:
        return (f"{self.ell} {self.L} mu={format_fraction(self.mu)} "
                f"tail={format_fraction(self.tail)} chose {self.chosen}")


def extract(x: WordSource, specs: Sequence[SliceSpec], length: int, k: int, caps: Caps = Caps(),
            oracle: Optional[SliceOracle] = None):
    """Emit y[1..length] inside every G_t = H_t(N_t)(x) listed in ``specs``.

    F_L intersects G_t for t <= min(L, T); the tail sums always run over the
    whole geometric series 4^-t, t > L.
    """
    if length < 0:
        raise FsiError("length must be non-negative")
    oracle = oracle or SliceOracle(x, k, caps.max_enum, caps.max_horizon)
    specs = tuple(specs)
    v: Word = ()
    trace = []
    for ell in range(length):
        rejected = []
        for L in range(caps.max_level + 1):
            F = specs[:min(L, len(specs))]
            mu = oracle.measure(F, v)
            if mu > k * tail(L):
                break
            rejected.append((L, mu))
        else:
            raise BudgetExceeded(f"position {ell}: no L <= {caps.max_level} with mu([v] & F_L) > k Tail(L)")
        per = [oracle.measure(F, v + (a,)) for a in range(k)]
        chosen = next((a for a in range(k) if per[a] > tail(L)), None)
        if chosen is None:
            raise FsiError(f"position {ell}: additivity broken, no symbol clears Tail({L})")
        trace.append(TraceEntry(ell, L, mu, tail(L), per, chosen, rejected))
        v = v + (chosen,)
    return v, trace


def replay_trace(trace: Sequence[TraceEntry], k: int) -> list:
    """Re-check every recorded threshold decision; returns the problems found."""
    problems = []
    for e in trace:
        if e.tail != tail(e.L):
            problems.append(f"{e.ell}: tail mismatch")
        if not e.mu > k * tail(e.L):
            problems.append(f"{e.ell}: mu does not clear k Tail(L)")
        if [L for L, _ in e.rejected] != list(range(e.L)):
            problems.append(f"{e.ell}: L was not searched from 0")
        if any(mu > k * tail(L) for L, mu in e.rejected):
            problems.append(f"{e.ell}: a smaller L already cleared the threshold")
        if not e.symbol_measures[e.chosen] > e.tail:
            problems.append(f"{e.ell}: chosen symbol misses Tail(L)")
        if any(m > e.tail for m in e.symbol_measures[:e.chosen]):
            problems.append(f"{e.ell}: a smaller symbol cleared Tail(L)")
        if sum(e.symbol_measures) != e.mu:
            problems.append(f"{e.ell}: symbol measures do not add up to mu")
    return problems


def recount_membership(spec: SliceSpec, x: WordSource, y: Sequence[int], k: int,
                       family: Optional[Callable[[int], Shuffler]] = None) -> Optional[bool]:
    """Direct check that y lies in H_t(N)(x); None if y is shorter than N^2."""
    H = spec.horizon
    if len(y) < H:
        return None
    xp = x.prefix(H)
    y = tuple(y[:H])
    for i in range(1, spec.t + 1):
        S = family(i) if family else nth_shuffler(i, k)
        for ell in range(1, spec.t + 1):
            for n in range(spec.N, H + 1):
                if not slice_membership(S, n, ell, spec.tolerance, xp, y):
                    return False
    return True


@dataclass
class CompanionReport:
    specs: list
    witnesses: list
    stage_measures: dict
    intersection_measure: Fraction
    trace: list
    recounts: dict
    additivity_failures: list
    monotonicity_failures: list
    replay_problems: list
    queried: int = 0

    @property
    def ok(self) -> bool:
        return (self.intersection_measure >= Fraction(2, 3) and not self.additivity_failures
                and not self.monotonicity_failures and not self.replay_problems
                and all(r is not False for r in self.recounts.values()))

    def text(self) -> str:
        lines = ["# cutoffs: t N tolerance measure"]
        for s in self.specs:
            lines.append(f"CUTOFF {s.t} {s.N} {format_fraction(s.tolerance)} "
                         f"{format_fraction(self.stage_measures[s.t])}")
        for t, N in self.witnesses:
            lines.append(f"WITNESS {t} {N}")
        lines.append(f"INTERSECTION mu={format_fraction(self.intersection_measure)}")
        lines.append("# trace: ell L mu tail choice")
        lines.extend(e.line() for e in self.trace)
        for t, res in sorted(self.recounts.items()):
            word = {True: "member", False: "not-member", None: "undecided"}[res]
            lines.append(f"RECOUNT {t} {word}")
        lines.append(f"ADDITIVITY {'ok' if not self.additivity_failures else 'failed'} "
                     f"{self.queried} cylinders")
        lines.append(f"MONOTONICITY {'ok' if not self.monotonicity_failures else 'failed'}")
        lines.append(f"REPLAY {'ok' if not self.replay_problems else 'failed'}")
        return "\n".join(lines) + "\n"


def build_companion(x: WordSource, T: int, length: int, k: int, caps: Caps = Caps(),
                    family: Optional[Callable[[int], Shuffler]] = None):
    """Choose cutoffs, extract y[1..length] and audit the run."""
    oracle = SliceOracle(x, k, caps.max_enum, caps.max_horizon, family)
    search = search_cutoffs(x, T, k, caps, oracle)
    specs = search.specs
    stage = {s.t: oracle.measure((s,), ()) for s in specs}
    inter = oracle.measure(tuple(specs), ())
    y, trace = extract(x, specs, length, k, caps, oracle)

    additivity, monotone = [], []
    for F, v in list(oracle.queries):
        mu = oracle.measure(F, v)
        if mu > Fraction(1, k ** len(v)):
            monotone.append((F, v))
        if sum(oracle.measure(F, v + (a,)) for a in range(k)) != mu:
            additivity.append((F, v))
    recounts = {s.t: recount_membership(s, x, y, k, family) for s in specs}
    report = CompanionReport(specs, search.witnesses, stage, inter, trace, recounts,
                             additivity, monotone, replay_trace(trace, k), len(oracle.queries))
    return y, report
