"""Greedy construction of a finite-state independent pair of prefixes.

The bad mass B_n(u, v) sums, over the first n shufflers, block lengths
r <= ell_n and blocks w, the exact conditional probability that the aligned
count of w in the first n shuffled symbols misses its expectation by at
least eps_n * floor(n/r). The potential Phi_L sums B_{N_j} over the active
checkpoints; each step appends the symbol pair that minimises Phi_{L+1}.
"""
from __future__ import annotations

import logging
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import FsiError
from .exactprob import dp_count_distribution, failing_counts, format_fraction
from .schedule import Schedule
from .shuffler import run_n
from .words import Word, all_words, format_word, occ_aligned

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrefixPair:
    u: Word
    v: Word

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(self.u))
        object.__setattr__(self, "v", tuple(self.v))
        if len(self.u) != len(self.v):
            raise FsiError("prefix pair must have equal lengths")

    def __len__(self):
        return len(self.u)

    def extend(self, a: int, b: int) -> "PrefixPair":
        return PrefixPair(self.u + (a,), self.v + (b,))


def shuffler_groups(n: int, sched: Schedule) -> list:
    """[(S, multiplicity, first index)] for S_1..S_n, grouped by identity."""
    counts: Counter = Counter()
    first: dict = {}
    for i in range(1, n + 1):
        S = sched.shuffler(i)
        counts[S] += 1
        first.setdefault(S, i)
    return [(S, counts[S], first[S]) for S in sorted(counts, key=first.get)]


def bad_mass(n: int, pair: PrefixPair, sched: Schedule) -> Fraction:
    """Exact B_n(u, v)."""
    if n < 3:
        raise FsiError("B_n is defined for n >= 3")
    if len(pair) > n:
        raise FsiError(f"prefix length {len(pair)} exceeds n={n}")
    _, ell, eps = sched.params_of(n)
    k = sched.k
    total = Fraction(0)
    groups = None
    for r in range(1, ell + 1):
        if not failing_counts(n // r, r, k, eps):
            continue  # every event of this block length is sure
        if groups is None:
            groups = shuffler_groups(n, sched)
        for w in all_words(r, k):
            for S, mult, _ in groups:
                dist = dp_count_distribution(S, n, r, w, pair.u, pair.v)
                bad = failing_counts(dist.m, r, k, eps)
                total += mult * Fraction(sum(dist.mass[c] for c in bad), k ** n)
    return total


def potential(L: int, pair: PrefixPair, sched: Schedule, max_checkpoint: Optional[int] = None) -> Fraction:
    """Phi_L(u, v); checkpoints with N_j above ``max_checkpoint`` are left out."""
    if len(pair) != L:
        raise FsiError(f"potential at length {L} needs prefixes of length {L}")
    total = Fraction(0)
    for j in sched.active_set(L):
        N, _ = sched.checkpoint(j)
        if max_checkpoint is None or N <= max_checkpoint:
            total += bad_mass(N, pair, sched)
    return total


@dataclass
class Violation:
    i: int
    r: int
    w: Word
    count: int

    def __str__(self):
        return f"i={self.i},r={self.r},w={format_word(self.w)},C={self.count}"


@dataclass
class CheckpointResult:
    j: int
    n: int
    ok: bool
    violations: list = field(default_factory=list)

    def line(self) -> str:
        text = f"CHECKPOINT {self.j} {'pass' if self.ok else 'fail'}"
        if self.violations:
            text += " [" + " ".join(str(v) for v in self.violations) + "]"
        return text


def recount(n: int, x: Word, y: Word, sched: Schedule) -> list:
    """Every constraint of F_n violated by the prefixes, found by direct counting."""
    _, ell, eps = sched.params_of(n)
    k = sched.k
    out_by_shuffler: dict = {}
    bad = []
    for i in range(1, n + 1):
        S = sched.shuffler(i)
        if S not in out_by_shuffler:
            out_by_shuffler[S] = run_n(S, x, y, n)[0]
        z = out_by_shuffler[S]
        for r in range(1, ell + 1):
            m = n // r
            for w in all_words(r, k):
                C = occ_aligned(z, w, r)
                # good iff |C - m/k^r| < eps*m
                if not abs(C - Fraction(m, k ** r)) < eps * m:
                    bad.append(Violation(i, r, w, C))
    return bad


def verify_checkpoints(x: Word, y: Word, sched: Schedule, max_checkpoint: Optional[int] = None) -> list:
    """Recount F_{N_j} for every checkpoint N_j the prefixes reach."""
    length = min(len(x), len(y))
    results = []
    for j in sched.checkpoints_upto(length):
        N, _ = sched.checkpoint(j)
        if max_checkpoint is not None and N > max_checkpoint:
            break
        bad = recount(N, tuple(x[:N]), tuple(y[:N]), sched)
        results.append(CheckpointResult(j, N, not bad, bad))
    if not results:
        log.info("prefixes of length %d reach no checkpoint", length)
    return results


@dataclass
class Step:
    L: int
    a: int
    b: int
    phi: Fraction
    certified: bool  # every activation certificate so far held


@dataclass
class Activation:
    j: int
    N: int
    L: int
    value: Optional[Fraction]
    bound: Fraction

    @property
    def ok(self) -> bool:
        return self.value is not None and self.value <= self.bound

    def line(self) -> str:
        if self.value is None:
            return f"SKIP {self.j} N={self.N} above max-checkpoint"
        return (f"ACTIVATE {self.j} B={format_fraction(self.value)} "
                f"bound={format_fraction(self.bound)} {'ok' if self.ok else 'violated'}")


@dataclass
class BuildReport:
    steps: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    events: list = field(default_factory=list)  # report lines in order
    phi_violations: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    def text(self) -> str:
        return "".join(line + "\n" for line in self.events)


def _candidate_phi(args):
    L1, pair, sched, cap = args
    return potential(L1, pair, sched, cap)


def greedy_build(N: int, sched: Schedule, max_checkpoint: Optional[int] = None, workers: int = 1):
    """The greedy loop: returns (x prefix, y prefix, BuildReport).

    Ties go to the lexicographically least (a, b). Violations of Phi < 1 or of
    an activation certificate are recorded in the report, never raised.
    """
    if N < 0:
        raise FsiError("N must be non-negative")
    k = sched.k
    report = BuildReport()
    pair = PrefixPair((), ())
    certified = True
    started = time.perf_counter()
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for L in range(N):
            L1 = L + 1
            for j in sched.activated_at(L1):
                Nj, _ = sched.checkpoint(j)
                if max_checkpoint is not None and Nj > max_checkpoint:
                    act = Activation(j, Nj, L, None, Fraction(1, Nj * Nj))
                else:
                    act = Activation(j, Nj, L, bad_mass(Nj, pair, sched), Fraction(1, Nj * Nj))
                    certified = certified and act.ok
                report.activations.append(act)
                report.events.append(act.line())
            cands = [(a, b) for a in range(k) for b in range(k)]
            jobs = [(L1, pair.extend(a, b), sched, max_checkpoint) for a, b in cands]
            phis = list(pool.map(_candidate_phi, jobs)) if pool else [_candidate_phi(job) for job in jobs]
            best = min(range(len(cands)), key=lambda idx: (phis[idx], idx))
            a, b = cands[best]
            pair = pair.extend(a, b)
            step = Step(L, a, b, phis[best], certified)
            report.steps.append(step)
            report.events.append(f"{L} {a} {b} {format_fraction(step.phi)}")
            if step.phi >= 1:
                report.phi_violations.append(L)
                report.events.append(f"PHI-VIOLATION {L}")
            for j in sched.checkpoints_upto(L1):
                Nj, _ = sched.checkpoint(j)
                if Nj == L1 and (max_checkpoint is None or Nj <= max_checkpoint):
                    bad = recount(Nj, pair.u, pair.v, sched)
                    res = CheckpointResult(j, Nj, not bad, bad)
                    report.checkpoints.append(res)
                    report.events.append(res.line())
    finally:
        if pool:
            pool.shutdown()
    report.counters["seconds"] = time.perf_counter() - started
    report.counters["steps"] = N
    return pair.u, pair.v, report


def potential_budget(sched: Schedule, L: int, max_checkpoint: Optional[int] = None) -> Fraction:
    """sum over j with A_j <= L of N_j^-2 (the bound Phi_L stays under)."""
    total = Fraction(0)
    j = 1
    while True:
        N, A = sched.checkpoint(j)
        if A > L:
            return total
        if max_checkpoint is None or N <= max_checkpoint:
            total += Fraction(1, N * N)
        j += 1
