"""Loading and cross-validating program bundles.

A bundle directory holds one program (``*.cml``) and one context
(``*.ctx``), and optionally handlers (``*.hdl``), a scenario (``*.scn``)
and primitive stubs (``*.stubs``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .datalog import Context, parse_atom
from .errors import FreeVarError, LinkError
from .events import EventDef, HandlerTable, Scenario
from .lexer import TokenStream, tokenize
from .parser import parse_expr, parse_handlers, parse_stubs
from .syntax import Prim, closed_check, free_vars, substitute

SUFFIXES = {".cml": "program", ".ctx": "context", ".hdl": "handlers", ".scn": "scenario", ".stubs": "stubs"}


def parse_scenario(text: str, source: str | None = None) -> Scenario:
    """``event NAME := tell f(..); retract g(..);`` definitions and ``at STEP inject NAME`` lines."""
    ts = TokenStream(tokenize(text, source), source)
    events: dict[str, EventDef] = {}
    schedule: list[tuple[int, str]] = []
    while not ts.at("EOF"):
        tok = ts.peek()
        if ts.at_kw("event"):
            ts.next()
            name = ts.expect("ID").text
            if name in events:
                raise ts.error(f"event {name!r} defined twice", tok)
            ts.expect("OP", ":=")
            effects = []
            while ts.at_kw("tell", "retract"):
                op = ts.next().text
                fact = parse_atom(ts, bare_vars=False)
                if not fact.is_ground():
                    raise ts.error(f"event effect {fact} must be ground")
                effects.append((op, fact))
                ts.expect("OP", ";")
            events[name] = EventDef(name, tuple(effects))
        elif ts.at_kw("at"):
            ts.next()
            step = ts.expect("INT")
            if not ts.at_kw("inject"):
                raise ts.error("expected 'inject'")
            ts.next()
            name = ts.expect("ID").text
            if step.value < 0 or (schedule and step.value < schedule[-1][0]):
                raise ts.error("injection steps must be nonnegative and nondecreasing", step)
            schedule.append((step.value, name))
        else:
            raise ts.error(f"expected 'event' or 'at', found {tok.text!r}", tok)
    return Scenario(events, tuple(schedule))


@dataclass
class Bundle:
    program: object
    ctx: Context
    handlers: HandlerTable = field(default_factory=HandlerTable)
    scenario: Scenario = field(default_factory=Scenario)
    stubs: dict = field(default_factory=dict)  # name -> (arity, Const)
    paths: dict = field(default_factory=dict)


def link_stubs(expr, stubs: dict):
    for name in sorted(free_vars(expr)):
        if name in stubs:
            arity, result = stubs[name]
            expr = substitute(expr, name, Prim(name, arity, result))
    return expr


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def find_files(paths) -> dict[str, Path]:
    """Map bundle roles to files, given a bundle directory and/or explicit files."""
    found: dict[str, Path] = {}
    for p in map(Path, paths):
        if not p.exists():
            raise FileNotFoundError(p)
        candidates = sorted(p.iterdir()) if p.is_dir() else [p]
        for f in candidates:
            role = SUFFIXES.get(f.suffix)
            if role is None:
                if not p.is_dir():
                    raise LinkError(f"{f}: unknown bundle file type {f.suffix!r}")
                continue
            if role in found and found[role] != f:
                raise LinkError(f"two {role} files: {found[role]} and {f}")
            found[role] = f
    return found


def load_bundle(program, ctx, handlers=None, scenario=None, stubs=None) -> Bundle:
    """Load and link a bundle from file paths (handlers, scenario and stubs optional)."""
    paths = {"program": Path(program), "context": Path(ctx)}
    stub_table = parse_stubs(_read(Path(stubs)), str(stubs)) if stubs else {}
    prog = link_stubs(parse_expr(_read(paths["program"]), str(program)), stub_table)
    try:
        params = closed_check(prog)
    except FreeVarError as exc:
        raise LinkError(f"{program}: undeclared identifier {exc.name!r} (not bound and no stub)") from None
    if params:
        raise LinkError(f"{program}: parameters used outside any dlet: "
                        + ", ".join("~" + p for p in sorted(params)))
    context = Context.from_text(_read(paths["context"]), str(ctx))

    table = {}
    if handlers:
        paths["handlers"] = Path(handlers)
        for name, expr in parse_handlers(_read(Path(handlers)), str(handlers)).items():
            expr = link_stubs(expr, stub_table)
            try:
                closed_check(expr)
            except FreeVarError as exc:
                raise LinkError(f"{handlers}: handler for {name!r} uses undeclared identifier {exc.name!r}") from None
            table[name] = expr

    scn = Scenario()
    if scenario:
        paths["scenario"] = Path(scenario)
        scn = parse_scenario(_read(Path(scenario)), str(scenario))
        for _, name in scn.schedule:
            if name not in scn.events:
                raise LinkError(f"{scenario}: event {name!r} is injected but never defined")
    if stubs:
        paths["stubs"] = Path(stubs)
    return Bundle(prog, context, HandlerTable(table), scn, stub_table, paths)


def load_bundle_dir(*paths, scenario="auto") -> Bundle:
    """Load from a directory and/or explicit files; ``scenario`` may be a path, "none" or "auto"."""
    files = find_files(paths)
    for role in ("program", "context"):
        if role not in files:
            raise LinkError(f"bundle has no {role} file ({'*.cml' if role == 'program' else '*.ctx'})")
    scn = files.get("scenario")
    if scenario == "none":
        scn = None
    elif scenario not in ("auto", None):
        scn = Path(scenario)
    return load_bundle(files["program"], files["context"], files.get("handlers"), scn, files.get("stubs"))


def builtin_bundle(name: str) -> Path:
    """Directory of a bundle shipped with the package (e.g. ``museum``)."""
    root = resources.files("coda") / "bundles" / name
    path = Path(str(root))
    if not path.is_dir():
        raise FileNotFoundError(f"no built-in bundle {name!r}")
    return path
