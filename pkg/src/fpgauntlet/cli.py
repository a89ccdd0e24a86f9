"""Command-line entry point.

Exit codes: 0 on success, 2 on usage, parse, size-limit or config errors,
1 when a configured expectation (or a selftest invariant) fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import ExperimentConfig, load_config, parse_config
from .defaults import default_config
from .errors import ConfigError, FpGauntletError
from .experiments import check_expectations, lit, run_detect, run_netlab, run_verify, tree_text
from .fpcore import FloatFormat, RoundingMode, parse_literal
from .oracle import LIMIT_ENV, oracle_limit, reachable_values
from .report import build_report, load_report, render, to_table
from .selftest import CHECKS, FAULTS, run_selftest

OUTPUT_FORMATS = ("json", "csv", "table")


class UsageError(Exception):
    """Bad input detected after argument parsing; maps to exit code 2."""


def _global_options(parser: argparse.ArgumentParser, *, suppress: bool, with_format: bool = True) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="experiment config (JSON)")
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument("--out", default=default, help="write the report here instead of stdout")
    if with_format:
        parser.add_argument("--format", dest="out_format", choices=OUTPUT_FORMATS, default=default,
                            help="report format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpgauntlet",
        description="Bit-exact experiments on floating-point soundness of verifier bounds.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="reachable outputs of a sum over every expression tree")
    _global_options(p, suppress=True, with_format=False)
    p.add_argument("values", nargs="+", help="summands as decimal or dyadic literals, e.g. 2^53")
    p.add_argument("--format", dest="fp_format", default="b64",
                   choices=("b32", "b64", "binary32", "binary64"), help="number format")
    p.add_argument("--mode", default="ne", choices=[m.value for m in RoundingMode])
    p.add_argument("--limit", type=int, default=None,
                   help=f"summand cap (default {LIMIT_ENV} or 14; 0 disables)")
    p.add_argument("--report", dest="out_format", choices=OUTPUT_FORMATS + ("text",),
                   default=argparse.SUPPRESS, help="output style (default text)")

    for name, text in (("verify", "verdict matrix of verifiers against deployments"),
                       ("netlab", "backdoored networks across environments"),
                       ("detect", "detector truth tables")):
        p = sub.add_parser(name, help=text)
        _global_options(p, suppress=True)

    p = sub.add_parser("selftest", help="run the quick invariant suite")
    _global_options(p, suppress=True)
    p.add_argument("--fault", choices=sorted(FAULTS), help="inject a known fault (should fail)")
    p.add_argument("--only", action="append", choices=sorted(CHECKS), help="run only these checks")

    p = sub.add_parser("report", help="re-render a JSON report")
    _global_options(p, suppress=True)
    p.add_argument("path", help="JSON report produced by verify/netlab/detect")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(args, command: str) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config(default_config(command))
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if os.environ.get(LIMIT_ENV):
        updates["oracle_limit"] = oracle_limit()
    return cfg.model_copy(update=updates) if updates else cfg


def _render(report: dict, fmt: str) -> str:
    return to_table(report) if fmt == "table" else render(report, fmt)


# -- subcommands ------------------------------------------------------------------


def cmd_oracle(args) -> int:
    fmt = FloatFormat.from_tag(args.fp_format)
    mode = RoundingMode(args.mode)
    try:
        values = [parse_literal(v, fmt) for v in args.values]
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    reach = reachable_values(values, mode, args.limit)
    ordered = reach.sorted()
    entries = [(v, reach.witness(v)) for v in ordered]
    out_format = args.out_format or "text"
    if out_format == "text":
        lines = [f"summands ({len(values)}, {fmt.tag}/{mode.value}): "
                 + " ".join(lit(v) for v in values),
                 f"reachable ({len(ordered)}): {{" + ", ".join(lit(v) for v in ordered) + "}",
                 f"L_r = {lit(ordered[0])}  witness {tree_text(entries[0][1])}",
                 f"U_r = {lit(ordered[-1])}  witness {tree_text(entries[-1][1])}",
                 "witnesses:"]
        lines += [f"  {lit(v)}  {tree_text(t)}" for v, t in entries]
        _emit("\n".join(lines) + "\n", args.out)
        return 0
    rows = [{"value": lit(v), "bits": v.to_json()["bits"], "witness": tree_text(t)} for v, t in entries]
    doc = {
        "metadata": {"tool": "fpgauntlet", "version": __version__, "command": "oracle",
                     "columns": ["value", "bits", "witness"]},
        "format": fmt.tag, "mode": mode.value, "summands": [lit(v) for v in values],
        "L_r": lit(ordered[0]), "U_r": lit(ordered[-1]),
        "min_witness": tree_text(entries[0][1]), "max_witness": tree_text(entries[-1][1]),
        "rows": rows,
    }
    _emit(_render(doc, out_format), args.out)
    return 0


def _experiment(args, command: str, runner) -> int:
    cfg = _load(args, command)
    rows = runner(cfg)
    if command == "verify":
        failures = check_expectations(cfg, rows)
    elif command == "netlab":
        failures = [f"{r['network']} in {r['environment']}: expected {r['expected']}, got {r['behaviour']}"
                    for r in rows if not r["ok"]]
    else:
        failures = []
    report = build_report(command, rows, cfg.sha256(), cfg.seed, failures)
    out_format = args.out_format or cfg.output.format
    _emit(_render(report, out_format), args.out or cfg.output.path)
    for msg in failures:
        print(f"expectation failed: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_selftest(args) -> int:
    start = time.perf_counter()
    results = run_selftest(args.fault)
    if args.only:
        results = [r for r in results if r.name in args.only]
    for r in results:
        status = "ok  " if r.ok else "FAIL"
        line = f"{status} {r.name:34s} {r.seconds:6.2f}s"
        print(line + (f"  {r.message}" if r.message else ""))
    failed = [r.name for r in results if not r.ok]
    print(f"runtime: {time.perf_counter() - start:.2f}s")
    if failed:
        print("failing invariants: " + ", ".join(failed), file=sys.stderr)
        return 1
    print(f"all {len(results)} invariants hold")
    return 0


def cmd_report(args) -> int:
    try:
        report = load_report(Path(args.path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read report {args.path}: {exc}") from exc
    _emit(_render(report, args.out_format or "table"), args.out)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for attr in ("config", "seed", "out", "out_format"):
        if not hasattr(args, attr):
            setattr(args, attr, None)
    try:
        if args.command == "oracle":
            return cmd_oracle(args)
        if args.command == "verify":
            return _experiment(args, "verify", run_verify)
        if args.command == "netlab":
            return _experiment(args, "netlab", run_netlab)
        if args.command == "detect":
            return _experiment(args, "detect", run_detect)
        if args.command == "selftest":
            return cmd_selftest(args)
        return cmd_report(args)
    except (UsageError, ConfigError, FpGauntletError, json.JSONDecodeError) as exc:
        print(f"fpgauntlet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
