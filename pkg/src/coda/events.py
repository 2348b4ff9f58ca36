"""Master transition system: event queue, atomic handlers and the scheduler.

The master rules are applied with a fixed priority so runs are replayable:
a running handler first (Ehdr1/Ehdr2), then the queue front (Eman), and
only with an empty queue the application itself (Eexpr). New events (Enew)
enter from a scenario schedule, or from an optional thread-safe inbox.
"""

from __future__ import annotations

import json
import queue as _queue
from collections.abc import Mapping
from dataclasses import dataclass, field

from .datalog import EV, PLAIN, Context, retract_fact, tell_fact
from .interpreter import Done, Failed, Next, PEnv, SlaveConfig, step_slave
from .syntax import UNIT, is_value, pretty


@dataclass(frozen=True)
class EventDef:
    name: str
    effects: tuple = ()  # (("tell" | "retract", Atom), ...)

    def __post_init__(self):
        for op, fact in self.effects:
            if op not in ("tell", "retract"):
                raise ValueError(f"unknown effect {op!r}")
            if not fact.is_ground():
                raise ValueError(f"event {self.name}: effect fact {fact} is not ground")


def apply_event(ctx: Context, edef: EventDef | None) -> Context:
    """Fold the event's effects into the context and raise the ev mark."""
    for op, fact in (edef.effects if edef is not None else ()):
        ctx = tell_fact(ctx, fact) if op == "tell" else retract_fact(ctx, fact)
    return ctx.with_mark(EV)


@dataclass(frozen=True)
class Plain:
    expr: object


@dataclass(frozen=True)
class Suspended:
    handler: object
    app: object


class HandlerTable(Mapping):
    """Event name -> handler expression; unbound events map to unit."""

    def __init__(self, handlers=None):
        self._h = dict(handlers or {})

    def __getitem__(self, name):
        return self._h[name]

    def __iter__(self):
        return iter(self._h)

    def __len__(self):
        return len(self._h)

    def lookup(self, name):
        return self._h.get(name, UNIT)


@dataclass(frozen=True)
class MasterConfig:
    queue: tuple
    env: PEnv
    ctx: Context
    prog: object  # Plain | Suspended


@dataclass(frozen=True)
class Scenario:
    events: Mapping = field(default_factory=dict)  # name -> EventDef
    schedule: tuple = ()  # ((inject_at, name), ...) with inject_at nondecreasing

    def __post_init__(self):
        last = None
        for at, _ in self.schedule:
            if at < 0 or (last is not None and at < last):
                raise ValueError("scenario injection steps must be nonnegative and nondecreasing")
            last = at


def enqueue(cfg: MasterConfig, event: str) -> MasterConfig:
    return MasterConfig(cfg.queue + (event,), cfg.env, cfg.ctx, cfg.prog)


@dataclass(frozen=True)
class MasterStep:
    config: MasterConfig
    rule: str  # Eman | Ehdr1 | Ehdr2 | Eexpr
    slave: str | None = None
    note: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Terminal:
    kind: str  # value | adaptation_failure | stuck
    config: MasterConfig
    outcome: object  # slave Done / Failed / Stuck
    rule: str | None = None


def step_master(cfg: MasterConfig, handlers, events=None):
    """Apply one master rule; returns MasterStep, or Terminal when nothing (more) can run."""
    events = events or {}
    handlers = handlers if isinstance(handlers, HandlerTable) else HandlerTable(handlers)
    prog = cfg.prog
    if isinstance(prog, Suspended):
        if is_value(prog.handler):
            # Ehdr2; a handler finishing on a non-unit value is discarded the same way
            return MasterStep(MasterConfig(cfg.queue, cfg.env, cfg.ctx, Plain(prog.app)), "Ehdr2")
        # the handler must not consume the application's event notification
        out = step_slave(SlaveConfig(cfg.env, cfg.ctx.with_mark(PLAIN), prog.handler))
        if not isinstance(out, Next):
            return Terminal(_kind(out), cfg, out, "Ehdr1")
        nxt = out.config
        ctx = nxt.ctx.with_mark(cfg.ctx.mark)
        return MasterStep(
            MasterConfig(cfg.queue, nxt.env, ctx, Suspended(nxt.expr, prog.app)), "Ehdr1", out.rule, out.note
        )
    if cfg.queue:
        alpha, rest = cfg.queue[0], cfg.queue[1:]
        ctx = apply_event(cfg.ctx, events.get(alpha))
        return MasterStep(
            MasterConfig(rest, cfg.env, ctx, Suspended(handlers.lookup(alpha), prog.expr)),
            "Eman",
            note={"event": alpha},
        )
    out = step_slave(SlaveConfig(cfg.env, cfg.ctx, prog.expr))
    if not isinstance(out, Next):
        return Terminal(_kind(out), cfg, out, None if isinstance(out, Done) else "Eexpr")
    nxt = out.config
    return MasterStep(MasterConfig((), nxt.env, nxt.ctx, Plain(nxt.expr)), "Eexpr", out.rule, out.note)


def _kind(out) -> str:
    if isinstance(out, Done):
        return "value"
    if isinstance(out, Failed):
        return "adaptation_failure"
    return "stuck"


# ---------------------------------------------------------------------------
# Runs and traces


def prog_text(prog) -> str:
    if isinstance(prog, Suspended):
        return f"[{pretty(prog.handler)}] {pretty(prog.app)}"
    return pretty(prog.expr)


@dataclass(frozen=True)
class TraceRecord:
    step: int
    rule: str
    config: MasterConfig
    added: tuple = ()
    removed: tuple = ()
    slave: str | None = None
    note: dict = field(default_factory=dict)

    @property
    def queue(self) -> tuple:
        return self.config.queue

    @property
    def mark(self) -> str:
        return self.config.ctx.mark

    def as_dict(self, level: str = "full") -> dict:
        out = {"step": self.step, "rule": self.rule, "queue": list(self.queue), "mark": self.mark}
        if level in ("deltas", "full"):
            out["delta"] = {"+": [str(f) for f in self.added], "-": [str(f) for f in self.removed]}
        if level == "full":
            out["expr"] = prog_text(self.config.prog)
            if self.slave:
                out["slave"] = self.slave
            if self.note:
                out["note"] = {k: self.note[k] for k in sorted(self.note)}
        return out

    def render(self, fmt: str = "structured", level: str = "full") -> str:
        d = self.as_dict(level)
        if fmt == "structured":
            return json.dumps(d, ensure_ascii=False, separators=(", ", ": "))
        rule = d["rule"] + (f"[{d['slave']}]" if d.get("slave") else "")
        parts = [f"{d['step']:>5} {rule:<18} q=[{' '.join(d['queue'])}] mark={d['mark']}"]
        if "delta" in d:
            delta = " ".join(["+" + f for f in d["delta"]["+"]] + ["-" + f for f in d["delta"]["-"]])
            parts.append(f"delta={{{delta}}}")
        if "expr" in d:
            parts.append("| " + d["expr"])
        if "note" in d:
            parts.append("  " + " ".join(f"{k}={v}" for k, v in d["note"].items()))
        return " ".join(parts)


@dataclass
class RunResult:
    kind: str  # value | adaptation_failure | stuck | budget_exceeded
    config: MasterConfig
    trace: list
    value: object = None
    detail: object = None
    counts: dict = field(default_factory=dict)

    def render_trace(self, fmt: str = "structured", level: str = "full") -> str:
        return "".join(r.render(fmt, level) + "\n" for r in self.trace)


def _delta(before: Context, after: Context):
    added = tuple(f for f in after.facts if f not in before)
    removed = tuple(f for f in before.facts if f not in after)
    return added, removed


def run(
    program,
    ctx: Context,
    handlers=None,
    scenario: Scenario | None = None,
    max_steps: int = 10_000,
    env: PEnv | None = None,
    inbox: _queue.SimpleQueue | None = None,
) -> RunResult:
    """Drive the master system until the application yields a value or gets stuck.

    Before master step k every scheduled event with ``inject_at == k`` is queued.
    When the application has finished and the queue is empty but injections are
    still pending, the step counter jumps to the next injection index.
    Events put on ``inbox`` by another thread are queued at the next opportunity.
    """
    scenario = scenario or Scenario()
    handlers = handlers if isinstance(handlers, HandlerTable) else HandlerTable(handlers)
    cfg = MasterConfig((), env if env is not None else PEnv(), ctx, Plain(program))
    pending = list(scenario.schedule)
    trace: list[TraceRecord] = []
    counts = dict.fromkeys(("master", "Enew", "Eman", "Ehdr1", "Ehdr2", "Eexpr"), 0)
    k = 0

    def finish(kind, value=None, detail=None):
        return RunResult(kind, cfg, trace, value, detail, counts)

    while True:
        if inbox is not None:
            while True:
                try:
                    alpha = inbox.get_nowait()
                except _queue.Empty:
                    break
                cfg = enqueue(cfg, alpha)
                counts["Enew"] += 1
                trace.append(TraceRecord(k, "Enew", cfg, note={"event": alpha}))
        idle = isinstance(cfg.prog, Plain) and is_value(cfg.prog.expr) and not cfg.queue
        if idle:
            if not pending:
                return finish("value", cfg.prog.expr)
            k = max(k, pending[0][0])
        while pending and pending[0][0] <= k:
            _, alpha = pending.pop(0)
            cfg = enqueue(cfg, alpha)
            counts["Enew"] += 1
            trace.append(TraceRecord(k, "Enew", cfg, note={"event": alpha}))
        if counts["master"] >= max_steps:
            return finish("budget_exceeded", detail=f"no result after {max_steps} master steps")
        res = step_master(cfg, handlers, scenario.events)
        if isinstance(res, Terminal):
            if res.kind == "value":
                return finish("value", res.outcome.value)
            if res.kind == "adaptation_failure":
                return finish("adaptation_failure", detail=res.outcome.failure)
            return finish("stuck", detail=res.outcome)
        added, removed = _delta(cfg.ctx, res.config.ctx)
        cfg = res.config
        counts["master"] += 1
        counts[res.rule] += 1
        trace.append(TraceRecord(k, res.rule, cfg, added, removed, res.slave, res.note))
        k += 1
