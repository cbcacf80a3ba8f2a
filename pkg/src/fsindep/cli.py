"""Command-line entry point.

Exit status: 0 success, 1 domain error or failed verification, 2 a cap or
budget was exhausted, 64 usage error. Every exact quantity is printed as a
reduced ``num/den``.
"""
from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .companion import Caps, build_companion
from .errors import BudgetExceeded, FsiError
from .exactprob import (brute_force_distribution, chernoff_bound, dp_count_distribution,
                        failure_probability, format_fraction, parse_fraction)
from .pairbuilder import greedy_build, verify_checkpoints
from .schedule import CONFIG_KEYS, Schedule, choose_m0, read_config
from .shuffler import ENCODING_VERSION, decode, encode, format_shuffler, nth_bitstring, nth_shuffler, read_shuffler, run_n
from .words import (check_alphabet, format_word, max_deviation, open_source, overlapping_counts, parse_word,
                    read_word_file, run_test, write_word_file)
from . import verify as suites

EX_USAGE = 64
log = logging.getLogger("fsindep")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.stderr.write(self.format_help())
        sys.exit(EX_USAGE)


def _rational(text: str) -> Fraction:
    try:
        return parse_fraction(text)
    except FsiError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker processes for candidate evaluation (default 1)")
    p.add_argument("--config", default=argparse.SUPPRESS, help="key=value file (k, m0, n0, eps_bits, eps_scale)")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def _schedule_flags(p, with_k=True):
    if with_k:
        p.add_argument("--k", type=int)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--m0", type=int)
    g.add_argument("--auto-m0", action="store_true", default=None)
    p.add_argument("--n0", type=int)
    p.add_argument("--eps-bits", type=int)
    p.add_argument("--eps-scale", type=_rational, help="multiplier on eps_n (1 = the construction)")
    p.add_argument("--max-checkpoint", type=int, help="leave out checkpoints N_j above this")


def build_parser() -> Parser:
    common = _common()
    top = Parser(prog="fsindep", description="Finite-state independence toolkit.", parents=[common])
    top.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = top.add_subparsers(dest="group", metavar="COMMAND", required=True)

    def sub(parent, name, help_):
        return parent.add_parser(name, help=help_, parents=[common], description=help_)

    sh = sub(groups, "shuffler", "inspect shufflers").add_subparsers(dest="cmd", required=True)
    p = sub(sh, "list", "print S_i for a range of indices")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--start", type=int, default=1)
    p.add_argument("--count", type=int, default=16)
    p = sub(sh, "decode", "decode a bitstring into text form")
    p.add_argument("bits")
    p.add_argument("--k", type=int, default=2)
    p = sub(sh, "run", "first n output symbols of a shuffler")
    p.add_argument("--shuffler", required=True, help="shuffler text file")
    p.add_argument("--x", required=True, help="tape 1 prefix")
    p.add_argument("--y", required=True, help="tape 2 prefix")
    p.add_argument("--n", type=int, required=True)

    st = sub(groups, "stats", "block statistics of a word").add_subparsers(dest="cmd", required=True)
    for name, help_ in (("freq", "overlapping block counts and max deviation"),
                        ("test", "Test(u; m, eps) with the non-strict bound")):
        p = sub(st, name, help_)
        p.add_argument("--source", required=True, help="champernowne | file:<path> | literal:<symbols>")
        p.add_argument("--k", type=int, default=2)
        p.add_argument("--length", type=int, required=True)
        p.add_argument("--m", type=int, default=1)
        if name == "test":
            p.add_argument("--eps", type=_rational, required=True)
        else:
            p.add_argument("--curve", help="write n,delta CSV rows to this path")
            p.add_argument("--step", type=int, default=1000)

    pr = sub(groups, "prob", "exact count laws").add_subparsers(dest="cmd", required=True)
    for name, help_ in (("dp", "law of the aligned count by dynamic programming"),
                        ("oracle", "the same law by exhaustive enumeration")):
        p = sub(pr, name, help_)
        p.add_argument("--shuffler", required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--r", type=int, required=True)
        p.add_argument("--w", required=True)
        p.add_argument("--prefix-x", default="")
        p.add_argument("--prefix-y", default="")
        p.add_argument("--eps", type=_rational, help="also print Pr[|C - m/k^r| >= eps m]")
        p.add_argument("--raw", action="store_true", help="header plus one numerator over k^n per count")
        if name == "oracle":
            p.add_argument("--budget", type=int, default=1 << 20)
    p = sub(pr, "bound", "2 exp(-delta^2 M p / 3) rounded up")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--p", type=_rational, required=True)
    p.add_argument("--delta", type=_rational, required=True)

    pa = sub(groups, "pair", "greedy pair construction").add_subparsers(dest="cmd", required=True)
    p = sub(pa, "build", "run the greedy builder for N steps")
    p.add_argument("--N", type=int, required=True)
    _schedule_flags(p)
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-y", required=True)
    p.add_argument("--report", required=True)
    p = sub(pa, "verify", "recount every checkpoint the prefixes reach")
    p.add_argument("--x", required=True, help="word file")
    p.add_argument("--y", required=True, help="word file")
    _schedule_flags(p)

    co = sub(groups, "companion", "companion construction").add_subparsers(dest="cmd", required=True)
    p = sub(co, "build", "choose cutoffs and extract a companion prefix")
    p.add_argument("--source", required=True, help="champernowne | file:<path> | literal:<symbols>")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--stages", type=int, required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--max-window", type=int, default=Caps.max_window)
    p.add_argument("--max-enum", type=int, default=Caps.max_enum)
    p.add_argument("--max-horizon", type=int, default=Caps.max_horizon)
    p.add_argument("--max-level", type=int, default=Caps.max_level)
    p.add_argument("--no-lookahead", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)

    ve = sub(groups, "verify", "invariant suites").add_subparsers(dest="cmd", required=True)
    p = sub(ve, "all", "run every randomised invariant suite")
    p.add_argument("--seed", type=int, default=0)
    return top


def _need(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _schedule(args) -> Schedule:
    """Flags override the config file, which overrides the defaults."""
    conf = {}
    if getattr(args, "config", None):
        raw = read_config(args.config)
        for key, value in raw.items():
            if key not in CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            try:
                conf[key] = CONFIG_KEYS[key](value)
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"bad value for {key}: {value!r}") from None
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            conf[key] = flag
    k = conf.get("k", 2)
    n0 = conf.get("n0", 1)
    _need(k >= 2, "--k must be at least 2")
    _need(n0 >= 1, "--n0 must be at least 1")
    if args.auto_m0 or ("m0" not in conf):
        m0 = choose_m0(n0)
    else:
        m0 = conf["m0"]
    return Schedule(k=check_alphabet(k), m0=m0, n0=n0, eps_bits=conf.get("eps_bits", 64),
                    eps_scale=conf.get("eps_scale", Fraction(1)))


def _emit(text: str, path: Optional[str] = None):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_shuffler(args) -> int:
    if args.cmd == "list":
        check_alphabet(args.k)
        _need(args.start >= 1 and args.count >= 0, "--start >= 1 and --count >= 0 required")
        for i in range(args.start, args.start + args.count):
            b = nth_bitstring(i)
            S = nth_shuffler(i, args.k)
            kind = "valid" if decode(b, args.k) is not None else "fallback"
            tau = "".join(str(t) for t in S.tau)
            print(f"{i} {b or '-'} {kind} Q={S.num_states} q0={S.start} tau={tau} code={encode(S)}")
        return 0
    if args.cmd == "decode":
        check_alphabet(args.k)
        S = decode(args.bits.strip(), args.k)
        if S is None:
            raise FsiError(f"{args.bits!r} is not a canonical encoding for k={args.k}")
        sys.stdout.write(format_shuffler(S))
        return 0
    S = read_shuffler(args.shuffler)
    _need(args.n >= 0, "--n must be non-negative")
    out, _ = run_n(S, parse_word(args.x, S.k), parse_word(args.y, S.k), args.n)
    print(format_word(out))
    return 0


def cmd_stats(args) -> int:
    check_alphabet(args.k)
    _need(args.length >= 1, "--length must be positive")
    _need(1 <= args.m <= args.length, "need 1 <= --m <= --length")
    u = open_source(args.source, args.k).prefix(args.length)
    if args.cmd == "test":
        _need(args.eps >= 0, "--eps must be non-negative")
        ok = run_test(u, args.m, args.eps, args.k)
        print(f"TEST m={args.m} eps={format_fraction(args.eps)} "
              f"delta={format_fraction(max_deviation(u, args.m, args.k))} {'pass' if ok else 'fail'}")
        return 0
    _need(args.step >= 1, "--step must be positive")
    counts = overlapping_counts(u, args.m)
    for w in sorted(counts):
        print(f"{format_word(w)} {counts[w]}")
    print(f"DELTA m={args.m} n={len(u)} {format_fraction(max_deviation(u, args.m, args.k))}")
    if args.curve:
        rows = ["n,delta"]
        for n in list(range(args.step, len(u), args.step)) + [len(u)]:
            if n >= args.m:
                rows.append(f"{n},{float(max_deviation(u[:n], args.m, args.k))!r}")
        Path(args.curve).write_text("\n".join(rows) + "\n")
    return 0


def cmd_prob(args) -> int:
    if args.cmd == "bound":
        print(repr(chernoff_bound(args.M, args.p, args.delta)))
        return 0
    S = read_shuffler(args.shuffler)
    w = parse_word(args.w, S.k)
    up, vp = parse_word(args.prefix_x, S.k), parse_word(args.prefix_y, S.k)
    if args.cmd == "dp":
        dist = dp_count_distribution(S, args.n, args.r, w, up, vp)
    else:
        dist = brute_force_distribution(S, args.n, args.r, w, up, vp, args.budget)
    if args.raw:
        sys.stdout.write(dist.serialize())
    else:
        for c, p in dist.as_dict().items():
            print(f"{c} {format_fraction(p)}")
    if args.eps is not None:
        print(f"FAILURE {format_fraction(failure_probability(dist, args.eps))}")
    return 0


def cmd_pair(args) -> int:
    sched = _schedule(args)
    cap = args.max_checkpoint
    _need(cap is None or cap >= 1, "--max-checkpoint must be positive")
    header = [f"# encoding {ENCODING_VERSION}",
              f"# k={sched.k} m0={sched.m0} n0={sched.n0} eps_bits={sched.eps_bits} "
              f"eps_scale={format_fraction(sched.eps_scale)} max_checkpoint={cap if cap else 'none'}",
              "# eps_n above 1 makes every event of F_n sure; expected for small n"]
    if args.cmd == "build":
        _need(args.N >= 0, "--N must be non-negative")
        threads = getattr(args, "threads", 1)
        x, y, report = greedy_build(args.N, sched, cap, workers=threads)
        write_word_file(args.out_x, x)
        write_word_file(args.out_y, y)
        Path(args.report).write_text("\n".join(header) + "\n" + report.text())
        log.info("built %d steps in %.2fs", args.N, report.counters["seconds"])
        return 0
    x, y = read_word_file(args.x, sched.k), read_word_file(args.y, sched.k)
    results = verify_checkpoints(x, y, sched, cap)
    for res in results:
        print(res.line())
    return 0 if all(r.ok for r in results) else 1


def cmd_companion(args) -> int:
    check_alphabet(args.k)
    _need(args.stages >= 0 and args.length >= 0, "--stages and --length must be non-negative")
    _need(args.max_window >= 2 and args.max_enum >= 1, "--max-window >= 2 and --max-enum >= 1 required")
    caps = Caps(args.max_window, args.max_enum, args.max_horizon, args.max_level, not args.no_lookahead)
    x = open_source(args.source, args.k)
    y, report = build_companion(x, args.stages, args.length, args.k, caps)
    write_word_file(args.out, y)
    Path(args.report).write_text(f"# encoding {ENCODING_VERSION}\n" + report.text())
    return 0 if report.ok else 1


def cmd_verify(args) -> int:
    failed = 0
    for res in suites.run_all(args.seed):
        print(res.line(), flush=True)
        failed += not res.ok
    return 1 if failed else 0


COMMANDS = {"shuffler": cmd_shuffler, "stats": cmd_stats, "prob": cmd_prob, "pair": cmd_pair,
            "companion": cmd_companion, "verify": cmd_verify}


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    threads = getattr(args, "threads", 1)
    try:
        if threads < 1:
            raise UsageError("--threads must be at least 1")
        return COMMANDS[args.group](args)
    except UsageError as exc:
        parser.error(str(exc))
    except BudgetExceeded as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return 2
    except FsiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())
