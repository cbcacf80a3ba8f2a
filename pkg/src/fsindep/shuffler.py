"""Deterministic two-tape shufflers.

A shuffler reads, in state q, the next unused symbol of tape ``tau[q]``
(1 = x, 2 = y), writes it to the output and moves to ``delta[q][symbol]``.

Canonical bit encoding, with Q states and s = ceil(log2 Q) (s = 0 for Q = 1)::

    1^Q 0 | tau bits (0 = tape 1, 1 = tape 2) | q0 in s bits | delta row-major, s bits each

Fields are big-endian. A string is valid iff its length is exactly
Q + 1 + Q + s + Q*k*s and every s-bit field is < Q. The alphabet size is
not encoded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

from .errors import FsiError, TapeExhausted

ENCODING_VERSION = "unary-Q/tau/q0/delta-v1"


@dataclass(frozen=True)
class Shuffler:
    k: int
    num_states: int
    start: int
    delta: tuple  # delta[q][a] -> state
    tau: tuple    # tau[q] in {1, 2}

    def __post_init__(self):
        Q = self.num_states
        if Q < 1:
            raise FsiError("a shuffler needs at least one state")
        if not 0 <= self.start < Q:
            raise FsiError(f"start state {self.start} out of range")
        if len(self.tau) != Q or any(t not in (1, 2) for t in self.tau):
            raise FsiError("tau must give tape 1 or 2 for every state")
        if len(self.delta) != Q or any(len(row) != self.k for row in self.delta):
            raise FsiError(f"delta must be a {Q}x{self.k} table")
        if any(not 0 <= p < Q for row in self.delta for p in row):
            raise FsiError("delta entry out of range")

    @classmethod
    def reader(cls, tape: int, k: int) -> "Shuffler":
        """The one-state shuffler that only ever reads ``tape``."""
        return cls(k, 1, 0, ((0,) * k,), (tape,))

    @classmethod
    def alternator(cls, k: int) -> "Shuffler":
        return cls(k, 2, 0, ((1,) * k, (0,) * k), (1, 2))


@dataclass
class RunState:
    q: int
    a: int = 0
    b: int = 0
    out: list = field(default_factory=list)

    def copy(self) -> "RunState":
        return RunState(self.q, self.a, self.b, list(self.out))


def start_state(S: Shuffler) -> RunState:
    return RunState(S.start)


def advance(S: Shuffler, state: RunState, xp: Sequence[int], yp: Sequence[int], n: int) -> bool:
    """Run ``state`` forward in place until n symbols are output.

    Returns False, leaving the state just before the blocked read, when the
    tape to be read next has no symbol left in the supplied prefix.
    """
    q, a, b, out = state.q, state.a, state.b, state.out
    delta, tau = S.delta, S.tau
    lx, ly = len(xp), len(yp)
    done = True
    while a + b < n:
        if tau[q] == 1:
            if a >= lx:
                done = False
                break
            c = xp[a]
            a += 1
        else:
            if b >= ly:
                done = False
                break
            c = yp[b]
            b += 1
        out.append(c)
        q = delta[q][c]
    state.q, state.a, state.b = q, a, b
    return done


def run_n(S: Shuffler, xp: Sequence[int], yp: Sequence[int], n: int):
    """First n output symbols of S on tapes starting with xp and yp.

    Returns ``(out, final_state)``. Raises TapeExhausted if a prefix is too
    short; |xp| >= n and |yp| >= n is always enough.
    """
    state = start_state(S)
    if not advance(S, state, xp, yp, n):
        tape = S.tau[state.q]
        raise TapeExhausted(tape, (state.a if tape == 1 else state.b) + 1)
    return tuple(state.out), state


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def state_bits(Q: int) -> int:
    return (Q - 1).bit_length()


def encode(S: Shuffler) -> str:
    Q = S.num_states
    s = state_bits(Q)
    parts = ["1" * Q + "0", "".join("0" if t == 1 else "1" for t in S.tau), _bits(S.start, s)]
    parts.extend(_bits(p, s) for row in S.delta for p in row)
    return "".join(parts)


def decode(bits: str, k: int) -> Optional[Shuffler]:
    """Inverse of ``encode``; None when ``bits`` is not a canonical encoding."""
    Q = 0
    while Q < len(bits) and bits[Q] == "1":
        Q += 1
    if Q == 0 or Q >= len(bits) or bits[Q] != "0":
        return None
    s = state_bits(Q)
    if len(bits) != Q + 1 + Q + s + Q * k * s or set(bits) - {"0", "1"}:
        return None
    pos = Q + 1
    tau = tuple(1 if c == "0" else 2 for c in bits[pos:pos + Q])
    pos += Q
    fields = []
    while pos < len(bits):
        v = int(bits[pos:pos + s], 2) if s else 0
        if v >= Q:
            return None
        fields.append(v)
        pos += s
    if s == 0:
        fields = [0] * (1 + Q * k)
    start, flat = fields[0], fields[1:]
    delta = tuple(tuple(flat[q * k:(q + 1) * k]) for q in range(Q))
    return Shuffler(k, Q, start, delta, tau)


def nth_bitstring(i: int) -> str:
    """b_i in the length-lexicographic order lambda, 0, 1, 00, 01, ... (i >= 1)."""
    if i < 1:
        raise FsiError("enumeration index starts at 1")
    return bin(i)[3:]


@lru_cache(maxsize=None)
def nth_shuffler(i: int, k: int) -> Shuffler:
    """S_i: decode(b_i) if valid, else the tape-1 reader."""
    return decode(nth_bitstring(i), k) or Shuffler.reader(1, k)


def format_shuffler(S: Shuffler) -> str:
    lines = [f"{S.k} {S.num_states} {S.start}", "".join(str(t) for t in S.tau)]
    lines.extend(" ".join(str(p) for p in row) for row in S.delta)
    return "\n".join(lines) + "\n"


def parse_shuffler(text: str) -> Shuffler:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    try:
        k, Q, q0 = (int(v) for v in lines[0])
        tau = tuple(int(c) for c in lines[1][0])
        delta = tuple(tuple(int(v) for v in row) for row in lines[2:])
    except (IndexError, ValueError) as exc:
        raise FsiError(f"malformed shuffler text: {exc}") from None
    if len(tau) != Q or len(lines[1]) != 1:
        raise FsiError("tau line must hold exactly Q characters")
    return Shuffler(k, Q, q0, delta, tau)


def read_shuffler(path) -> Shuffler:
    return parse_shuffler(Path(path).read_text())
