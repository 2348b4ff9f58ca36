"""Command-line driver: ``coda run <bundle-dir | files...>``."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .bundle import builtin_bundle, load_bundle_dir
from .errors import CodaError
from .events import RunResult, run
from .syntax import pretty

EXIT_CODES = {"value": 0, "load_error": 1, "adaptation_failure": 2, "stuck": 3, "budget_exceeded": 4}
TRACE_LEVELS = ("steps", "deltas", "full")


@dataclass
class RunReport:
    outcome: str
    result: str
    master_steps: int
    slave_steps: int
    handler_steps: int
    events_queued: int
    trace_records: int
    trace_path: str | None = None

    @classmethod
    def from_result(cls, res: RunResult, trace_path=None) -> RunReport:
        if res.kind == "value":
            text = pretty(res.value)
        elif res.kind == "adaptation_failure":
            text = f"{res.detail} at {pretty(res.detail.expr)}"
        elif res.kind == "stuck":
            text = f"{res.detail.reason}: {res.detail.detail}"
        else:
            text = str(res.detail)
        c = res.counts
        return cls(res.kind, text, c["master"], c["Eexpr"], c["Ehdr1"], c["Enew"], len(res.trace),
                   str(trace_path) if trace_path else None)

    def lines(self) -> list[str]:
        out = [
            f"outcome: {self.outcome}",
            f"result: {self.result}",
            f"steps: master={self.master_steps} application={self.slave_steps} "
            f"handler={self.handler_steps} events={self.events_queued}",
            f"trace records: {self.trace_records}",
        ]
        if self.trace_path:
            out.append(f"trace: {self.trace_path}")
        return out


def _resolve(paths: list[str]) -> list[Path]:
    out = []
    for raw in paths:
        p = Path(raw)
        if not p.exists() and os.sep not in raw.rstrip("/\\"):
            try:
                p = builtin_bundle(raw.rstrip("/\\"))
            except FileNotFoundError:
                pass
        out.append(p)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coda", description="Run context-oriented programs with event-driven adaptation.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a bundle")
    r.add_argument("paths", nargs="+", help="bundle directory and/or .cml/.ctx/.hdl/.scn/.stubs files")
    r.add_argument("--scenario", default="auto", help="scenario file, or 'none' for an eventless run")
    r.add_argument("--max-steps", type=int, default=10_000, help="master step budget (default 10000)")
    r.add_argument("--trace", help="write the trace to this file ('-' for stdout)")
    r.add_argument("--format", choices=("text", "structured"), default="structured", help="trace format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("CODA_TRACE_LEVEL", "full")
    if level not in TRACE_LEVELS:
        print(f"coda: CODA_TRACE_LEVEL must be one of {', '.join(TRACE_LEVELS)}", file=sys.stderr)
        return EXIT_CODES["load_error"]
    if args.max_steps <= 0:
        print("coda: --max-steps must be positive", file=sys.stderr)
        return EXIT_CODES["load_error"]
    try:
        bundle = load_bundle_dir(*_resolve(args.paths), scenario=args.scenario)
    except (CodaError, OSError, UnicodeDecodeError) as exc:
        print(f"coda: load error: {exc}", file=sys.stderr)
        return EXIT_CODES["load_error"]

    res = run(bundle.program, bundle.ctx, bundle.handlers, bundle.scenario, args.max_steps)
    trace_text = res.render_trace(args.format, level)
    if args.trace == "-":
        sys.stdout.write(trace_text)
    elif args.trace:
        Path(args.trace).write_text(trace_text, encoding="utf-8")
    report = RunReport.from_result(res, args.trace if args.trace not in (None, "-") else None)
    for line in report.lines():
        print(line)
    if res.kind != "value":
        print(f"coda: {res.kind.replace('_', ' ')}: {report.result}", file=sys.stderr)
    return EXIT_CODES[res.kind]


if __name__ == "__main__":
    sys.exit(main())
