"""Command-line entry point: ``pmth run|audit|decompose|depth|fmt``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ParseError, PmthError
from .htva import depth
from .interleave import DEFAULT_FUEL, run
from .scenario import format_scenario, parse_scenario
from .tracing import decompose, parse_trace, render_trace, stats


class UsageError(PmthError):
    code = "E_USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOError(f"{path}: {exc.strerror or exc}") from None


def _write(text: str, path: str | None) -> None:
    data = text.encode("utf-8")
    if path is None:
        sys.stdout.flush()
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def parse_classifier(text: str) -> tuple[list[tuple[str, str]], str | None]:
    """``PREFIX NAME`` per line; ``* NAME`` sets the fallback thread."""
    rules: list[tuple[str, str]] = []
    default = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError("classifier lines need PREFIX NAME", lineno)
        if parts[0] == "*":
            default = parts[1]
        else:
            rules.append((parts[0], parts[1]))
    return rules, default


def cmd_run(args) -> int:
    sc = parse_scenario(_read(args.scenario), allow_invalid=args.allow_invalid)
    if sc.report is not None and not sc.report.ok:
        for c in sc.report.failed():
            print(f"warning: {c.name} fails ({c.detail})", file=sys.stderr)
    policy = sc.policy
    if args.policy:
        policy = replace(policy, kind=args.policy)
    if args.seed is not None:
        policy = replace(policy, seed=args.seed)
    trace, _ = run(sc.to_state(), policy, args.max_steps, sc.meta)
    _write(render_trace(trace), args.trace)
    return 0


def cmd_audit(args) -> int:
    sc = parse_scenario(_read(args.scenario), allow_invalid=True)
    _write(sc.report.render(), None)
    failed = sc.report.failed()
    if failed:
        print(f"E_VALID: {len(failed)} check(s) failed: {', '.join(c.name for c in failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_decompose(args) -> int:
    trace = parse_trace(_read(args.trace))
    if args.provenance:
        mt = decompose(trace, provenance=True, now_step=args.now)
    else:
        rules, default = parse_classifier(_read(args.classify)) if args.classify else ([], None)
        mt = decompose(trace, rules, default or args.default, now_step=args.now)
    _write(stats(mt).render(), None)
    return 0


def cmd_depth(args) -> int:
    sc = parse_scenario(_read(args.scenario), allow_invalid=True)
    _write(f"{depth(sc.root)}\n", None)
    return 0


def cmd_fmt(args) -> int:
    sc = parse_scenario(_read(args.scenario), allow_invalid=True)
    _write(format_scenario(sc), None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pmth", description="Deterministic personal multi-threading simulator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and emit its trace")
    r.add_argument("scenario")
    r.add_argument("--policy", choices=["cyclic", "poly", "random", "arbitrary", "weighted"])
    r.add_argument("--seed", type=int)
    r.add_argument("--max-steps", type=int, default=DEFAULT_FUEL)
    r.add_argument("--trace", help="write the trace here instead of stdout")
    r.add_argument("--allow-invalid", action="store_true", help="downgrade validation failures to warnings")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("audit", help="print the validation report")
    a.add_argument("scenario")
    a.set_defaults(func=cmd_audit)

    d = sub.add_parser("decompose", help="split a trace into revealed threads")
    d.add_argument("trace")
    g = d.add_mutually_exclusive_group()
    g.add_argument("--classify", metavar="FILE")
    g.add_argument("--provenance", action="store_true")
    d.add_argument("--default", default="other", help="revealed thread for unmatched actions")
    d.add_argument("--now", type=int, metavar="STEP", help="past/future boundary step")
    d.set_defaults(func=cmd_decompose)

    h = sub.add_parser("depth", help="print the HTVA depth")
    h.add_argument("scenario")
    h.set_defaults(func=cmd_depth)

    f = sub.add_parser("fmt", help="print the canonical form of a scenario")
    f.add_argument("scenario")
    f.set_defaults(func=cmd_fmt)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except PmthError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"{exc.code}: {msg}", file=sys.stderr)
        return 2 if exc.code == "E_USAGE" else 1
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"E_CONFIG: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
