"""Command-line driver.

    fpcert [options] script.g        prove the script's property block
    fpcert [options] -               read the script from standard input
    fpcert check script.g proof.cert replay a certificate

Exit status: 0 when every goal is resolved, 1 on script or hint errors,
2 when some goal is unproved, 3 on resource exhaustion.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import certificate
from .engine import Options, ResourceLimit
from .numeric import Interval, render_decimal
from .prover import HintRejected, Report, prove
from .syntax import ScriptError, load_script

__all__ = ["main", "run"]


def _render_interval(iv: Interval) -> str:
    return f"[{render_decimal(iv.lo, 'down')}, {render_decimal(iv.hi, 'up')}]"


def _render_exact(iv: Interval) -> str:
    return f"[{iv.lo}, {iv.hi}]"


def _print_report(report: Report, out) -> None:
    script = report.script
    names = script.names()
    for w in report.hint_warnings:
        print(w, file=out)
    for w in report.unused_hint_warnings:
        print(w, file=out)
    for w in report.assumption_warnings:
        print(w, file=out)
    unproved = []
    for res in report.results:
        text = res.goal.describe(names)
        if res.status == "contradiction":
            print(f"{text} is proved (the hypotheses are contradictory)", file=out)
        elif res.status in ("proved", "computed"):
            print(f"{text} in {_render_interval(res.enclosure)}  "
                  f"# exact {_render_exact(res.enclosure)}", file=out)
        else:
            unproved.append(res)
    for res in unproved:
        print(f"Warning: no path was found for {res.goal.describe(names)}.",
              file=out)
        for diag in res.diagnostics:
            print(f"  - {diag}", file=out)
    if report.hypothesis_echo:
        echo = " and ".join(f"{text} in {_render_interval(iv)}"
                            for text, iv in report.hypothesis_echo)
        print(f"Results for {echo}:", file=out)
    if unproved:
        print("Warning: some enclosures were not satisfied.", file=out)


def run(argv: list[str], stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr

    argv = ["--unconstrained" if a == "-Munconstrained" else a for a in argv]
    if argv and argv[0] == "check":
        return _run_check(argv[1:], out, err)

    parser = argparse.ArgumentParser(
        prog="fpcert",
        description="prove range and rounding-error bounds of straight-line "
                    "floating-point code")
    parser.add_argument("script", help="script path, or - for standard input")
    parser.add_argument("--unconstrained", action="store_true",
                        help="assume unprovable nonzero side conditions, "
                             "with warnings")
    parser.add_argument("--strict-hints", action="store_true",
                        help="reject rewrite hints that are not identities")
    parser.add_argument("--precision", type=int,
                        default=int(os.environ.get("FPCERT_PRECISION", "80")),
                        help="working precision in mantissa bits (default 80)")
    parser.add_argument("--budget", type=int, default=1_000_000,
                        help="rule-firing budget (default 1000000)")
    parser.add_argument("--depth", type=int, default=32,
                        help="maximum dichotomy depth (default 32)")
    parser.add_argument("--cert", metavar="PATH",
                        help="write the proof certificate to PATH")
    args = parser.parse_args(argv)
    if args.precision < 24:
        print("fpcert: precision must be at least 24 bits", file=err)
        return 1

    try:
        text = stdin.read() if args.script == "-" else _read(args.script)
    except OSError as exc:
        print(f"fpcert: {exc}", file=err)
        return 1
    options = Options(precision=args.precision, unconstrained=args.unconstrained,
                      budget=args.budget, strict_hints=args.strict_hints,
                      max_depth=args.depth)
    try:
        script = load_script(text)
        report = prove(script, options)
    except (ScriptError, HintRejected) as exc:
        print(f"fpcert: {exc}", file=err)
        return 1
    _print_report(report, out)
    if args.cert and report.bundle is not None:
        with open(args.cert, "w") as fh:
            fh.write(certificate.emit(report.bundle))
    if report.resource_limited:
        return 3
    return 0 if report.all_resolved() else 2


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _run_check(argv: list[str], out, err) -> int:
    parser = argparse.ArgumentParser(prog="fpcert check")
    parser.add_argument("script")
    parser.add_argument("certificate")
    args = parser.parse_args(argv)
    try:
        script = load_script(_read(args.script))
        cert_text = _read(args.certificate)
    except (OSError, ScriptError) as exc:
        print(f"fpcert: {exc}", file=err)
        return 1
    try:
        result = certificate.check(cert_text, script)
    except certificate.HashMismatch as exc:
        print(f"certificate: hash mismatch ({exc})", file=out)
        return 1
    if result.status == "pass":
        print("certificate: pass", file=out)
        return 0
    if result.status == "pass-with-axioms":
        print("certificate: pass-with-axioms", file=out)
        for a in result.axioms:
            print(f"  assumed: {a}", file=out)
        return 0
    print(f"certificate: fail ({result.detail})", file=out)
    return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
