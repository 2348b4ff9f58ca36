"""Abstract syntax of the functional layer, plus the name-handling utilities.

Values: constants, recursive functions, behavioural variations, facts and
primitive stubs. Two auxiliary forms exist only at run time: a checkpointed
expression (annotated with the goal, parameter environment and resume
expression of the dispatch that produced it) and an overlined dlet body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .datalog import (
    Atom,
    Constraint,
    Negation,
    Variable,
    format_goal,
    format_term,
    goal_variables,
)
from .errors import FreeVarError

# ---------------------------------------------------------------------------
# Nodes


@dataclass(frozen=True, eq=False)
class Const:
    """Unit (``None``), boolean, integer or string."""

    value: object = None

    def _key(self):
        return (type(self.value), self.value)

    def __eq__(self, other):
        return isinstance(other, Const) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


UNIT = Const(None)
TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class DynVar:
    name: str


@dataclass(frozen=True)
class Fun:
    """``fun name(param) = body``; ``name`` is None for an anonymous lambda."""

    name: str | None
    param: str
    body: Expr


@dataclass(frozen=True)
class Case:
    goal: tuple
    body: Expr


@dataclass(frozen=True)
class BehVar:
    param: str
    cases: tuple  # tuple[Case, ...], nonempty

    def __post_init__(self):
        if not self.cases:
            raise ValueError("a behavioural variation needs at least one case")


@dataclass(frozen=True)
class FactVal:
    fact: Atom


@dataclass(frozen=True)
class Prim:
    """An external primitive stub: after ``arity`` arguments it yields ``result``."""

    name: str
    arity: int
    result: Const
    args: tuple = ()


@dataclass(frozen=True)
class App:
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Let:
    name: str
    bound: Expr
    body: Expr


@dataclass(frozen=True)
class Dlet:
    param: str
    bound: Expr
    goal: tuple
    body: Expr


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Expr
    else_: Expr


@dataclass(frozen=True)
class Tell:
    expr: Expr


@dataclass(frozen=True)
class Retract:
    expr: Expr


@dataclass(frozen=True)
class Append:
    left: Expr
    right: Expr


@dataclass(frozen=True)
class VaApp:
    fn: Expr
    arg: Expr


@dataclass(frozen=True)
class Checkpoint:
    goal: tuple
    env: object  # PEnv snapshot
    resume: Expr


@dataclass(frozen=True)
class Checkpointed:
    expr: Expr
    ann: Checkpoint


@dataclass(frozen=True)
class Overlined:
    """Body of a dlet whose binding for ``param`` is live in the environment."""

    expr: Expr
    param: str


Value = Union[Const, Fun, BehVar, FactVal, Prim]
Expr = Union[Value, Var, DynVar, App, Let, Dlet, If, Tell, Retract, Append, VaApp, Checkpointed, Overlined]

VALUE_TYPES = (Const, Fun, BehVar, FactVal, Prim)


def is_value(e) -> bool:
    return isinstance(e, VALUE_TYPES)


def const_of(value) -> Const:
    """Lift a Datalog constant into the host language."""
    return Const(value)


# ---------------------------------------------------------------------------
# Names


def fresh_var(hint: str, avoid) -> str:
    if hint not in avoid:
        return hint
    base = re.sub(r"\d+$", "", hint) or hint
    n = 1
    while f"{base}{n}" in avoid:
        n += 1
    return f"{base}{n}"


def goal_var_names(goal) -> set[str]:
    """Host-level names bound by a goal (written ``?x`` in source)."""
    return {"?" + v for v in goal_variables(goal)}


def free_vars(e) -> set[str]:
    match e:
        case Var(name):
            return {name}
        case Const() | FactVal() | Prim() | DynVar():
            return set()
        case Fun(name, param, body):
            return free_vars(body) - {param, name}
        case BehVar(param, cases):
            out: set[str] = set()
            for c in cases:
                out |= free_vars(c.body) - goal_var_names(c.goal)
            return out - {param}
        case App(a, b) | Append(a, b) | VaApp(a, b):
            return free_vars(a) | free_vars(b)
        case Let(name, bound, body):
            return free_vars(bound) | (free_vars(body) - {name})
        case Dlet(_, bound, goal, body):
            return (free_vars(bound) - goal_var_names(goal)) | free_vars(body)
        case If(c, t, f):
            return free_vars(c) | free_vars(t) | free_vars(f)
        case Tell(x) | Retract(x) | Overlined(x, _):
            return free_vars(x)
        case Checkpointed(x, ann):
            return free_vars(x) | free_vars(ann.resume)
    raise TypeError(f"not an expression: {e!r}")


def all_names(e) -> set[str]:
    """Every ordinary variable name occurring in e, bound or free."""
    match e:
        case Var(name):
            return {name}
        case Const() | FactVal() | Prim() | DynVar():
            return set()
        case Fun(name, param, body):
            return all_names(body) | {param} | ({name} if name else set())
        case BehVar(param, cases):
            out = {param}
            for c in cases:
                out |= all_names(c.body) | goal_var_names(c.goal)
            return out
        case App(a, b) | Append(a, b) | VaApp(a, b):
            return all_names(a) | all_names(b)
        case Let(name, bound, body):
            return {name} | all_names(bound) | all_names(body)
        case Dlet(_, bound, goal, body):
            return all_names(bound) | all_names(body) | goal_var_names(goal)
        case If(c, t, f):
            return all_names(c) | all_names(t) | all_names(f)
        case Tell(x) | Retract(x) | Overlined(x, _):
            return all_names(x)
        case Checkpointed(x, ann):
            return all_names(x) | all_names(ann.resume)
    raise TypeError(f"not an expression: {e!r}")


def substitute(e, x: str, v):
    """Capture-avoiding e{v/x}."""
    fv = free_vars(v)

    def binder(name, body):
        # Rename a binder that would capture a free variable of v.
        if name in fv:
            new = fresh_var(name, fv | all_names(body) | {x})
            return new, substitute(body, name, Var(new))
        return name, body

    def go(e):
        match e:
            case Var(name):
                return v if name == x else e
            case Const() | FactVal() | Prim() | DynVar():
                return e
            case Fun(name, param, body):
                if x in (name, param):
                    return e
                if name is not None:
                    name, body = binder(name, body)
                param, body = binder(param, body)
                return Fun(name, param, go(body))
            case BehVar(param, cases):
                if x == param:
                    return e
                param, cases = _rename_cases(param, cases, fv, x)
                return BehVar(param, tuple(
                    c if x in goal_var_names(c.goal) else Case(c.goal, go(c.body)) for c in cases
                ))
            case App(a, b):
                return App(go(a), go(b))
            case Append(a, b):
                return Append(go(a), go(b))
            case VaApp(a, b):
                return VaApp(go(a), go(b))
            case Let(name, bound, body):
                bound = go(bound)
                if name == x:
                    return Let(name, bound, body)
                name, body = binder(name, body)
                return Let(name, bound, go(body))
            case Dlet(p, bound, goal, body):
                if x not in goal_var_names(goal):
                    bound = go(bound)
                return Dlet(p, bound, goal, go(body))
            case If(c, t, f):
                return If(go(c), go(t), go(f))
            case Tell(a):
                return Tell(go(a))
            case Retract(a):
                return Retract(go(a))
            case Overlined(a, p):
                return Overlined(go(a), p)
            case Checkpointed(a, ann):
                return Checkpointed(go(a), Checkpoint(ann.goal, ann.env, go(ann.resume)))
        raise TypeError(f"not an expression: {e!r}")

    return go(e)


def _rename_cases(param, cases, fv, x):
    if param not in fv:
        return param, cases
    avoid = set(fv) | {x}
    for c in cases:
        avoid |= all_names(c.body)
    new = fresh_var(param, avoid)
    return new, tuple(Case(c.goal, substitute(c.body, param, Var(new))) for c in cases)


def instantiate(e, theta: dict):
    """Replace goal variables ``?y`` in e by the constants chosen by a dispatch."""
    for name, value in theta.items():
        e = substitute(e, "?" + name, Const(value))
    return e


def closed_check(e, allowed=frozenset()) -> set[str]:
    """Free parameters of e; raises FreeVarError on a free ordinary variable.

    Parameters bound by an enclosing dlet are not reported.
    """
    for name in sorted(free_vars(e)):
        if name not in allowed:
            raise FreeVarError(name)
    return free_params(e)


def free_params(e) -> set[str]:
    match e:
        case DynVar(name):
            return {name}
        case Var() | Const() | FactVal() | Prim():
            return set()
        case Fun(_, _, body):
            return free_params(body)
        case BehVar(_, cases):
            out: set[str] = set()
            for c in cases:
                out |= free_params(c.body)
            return out
        case App(a, b) | Append(a, b) | VaApp(a, b) | Let(_, a, b):
            return free_params(a) | free_params(b)
        case Dlet(p, bound, _, body):
            # the bound expression runs wherever the parameter is used, i.e. inside the scope
            return (free_params(bound) | free_params(body)) - {p}
        case If(c, t, f):
            return free_params(c) | free_params(t) | free_params(f)
        case Tell(x) | Retract(x):
            return free_params(x)
        case Overlined(x, p):
            return free_params(x) - {p}
        case Checkpointed(x, ann):
            return free_params(x) | free_params(ann.resume)
    raise TypeError(f"not an expression: {e!r}")


def contains_aux(e) -> bool:
    match e:
        case Checkpointed() | Overlined():
            return True
        case Var() | DynVar() | Const() | FactVal() | Prim():
            return False
        case Fun(_, _, body):
            return contains_aux(body)
        case BehVar(_, cases):
            return any(contains_aux(c.body) for c in cases)
        case App(a, b) | Append(a, b) | VaApp(a, b) | Let(_, a, b) | Dlet(_, a, _, b):
            return contains_aux(a) or contains_aux(b)
        case If(c, t, f):
            return contains_aux(c) or contains_aux(t) or contains_aux(f)
        case Tell(x) | Retract(x):
            return contains_aux(x)
    raise TypeError(f"not an expression: {e!r}")


def strip_aux(e):
    """Drop checkpoint annotations and overlines (for display and comparisons)."""
    match e:
        case Checkpointed(x, _) | Overlined(x, _):
            return strip_aux(x)
        case Var() | DynVar() | Const() | FactVal() | Prim() | Fun() | BehVar():
            return e
        case App(a, b):
            return App(strip_aux(a), strip_aux(b))
        case VaApp(a, b):
            return VaApp(strip_aux(a), strip_aux(b))
        case Append(a, b):
            return Append(strip_aux(a), strip_aux(b))
        case Let(n, a, b):
            return Let(n, strip_aux(a), strip_aux(b))
        case Dlet(p, a, g, b):
            return Dlet(p, strip_aux(a), g, strip_aux(b))
        case If(c, t, f):
            return If(strip_aux(c), strip_aux(t), strip_aux(f))
        case Tell(x):
            return Tell(strip_aux(x))
        case Retract(x):
            return Retract(strip_aux(x))
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Printing

_ATOMIC = (Const, Var, DynVar, FactVal, Prim, BehVar, Tell, Retract, VaApp)


def _const_text(value) -> str:
    if value is None:
        return "()"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _goal_text(goal) -> str:
    return format_goal(goal)


def _fact_text(fact: Atom) -> str:
    return "'" + str(fact)


def pretty(e) -> str:
    """Concrete syntax for e; re-parses to the same tree when e has no auxiliary forms."""
    match e:
        case Const(value):
            return _const_text(value)
        case Var(name):
            return name
        case DynVar(name):
            return "~" + name
        case FactVal(fact):
            return _fact_text(fact)
        case Prim(name, _, _, args):
            if not args:
                return name
            return " ".join([name] + [_atom(a) for a in args])
        case Fun(None, param, body):
            return f"fn {param} => {pretty(body)}"
        case Fun(name, param, body):
            return f"fun {name}({param}) = {pretty(body)}"
        case BehVar(param, cases):
            inner = ", ".join(f"<- {_goal_text(c.goal)}. {pretty(c.body)}" for c in cases)
            return f"({param}){{ {inner} }}"
        case App(fn, arg):
            left = pretty(fn) if isinstance(fn, App) else _atom(fn)
            return f"{left} {_atom(arg)}"
        case Let(name, bound, body):
            return f"let {name} = {_atom(bound)} in {pretty(body)}"
        case Dlet(param, bound, goal, body):
            return f"dlet ~{param} = {_atom(bound)} when {_goal_text(goal)} in {pretty(body)}"
        case If(c, t, f):
            return f"if {_atom(c)} then {_atom(t)} else {pretty(f)}"
        case Tell(x):
            return f"tell({pretty(x)})"
        case Retract(x):
            return f"retract({pretty(x)})"
        case Append(a, b):
            return f"{_atom(a)} ∪ {_atom(b)}"
        case VaApp(fn, arg):
            if isinstance(fn, BehVar) or not isinstance(fn, _ATOMIC):
                return f"#({pretty(fn)}, {pretty(arg)})"
            return f"#{pretty(fn)}({pretty(arg)})"
        case Checkpointed(x, ann):
            return f"<<{pretty(x)} @ {_goal_text(ann.goal) or 'true'}>>"
        case Overlined(x, p):
            return f"[[{pretty(x)}]]~{p}"
    raise TypeError(f"not an expression: {e!r}")


def _atom(e) -> str:
    text = pretty(e)
    if isinstance(e, _ATOMIC) and not (isinstance(e, Prim) and e.args) and not (
        isinstance(e, Const) and isinstance(e.value, int) and e.value < 0
    ):
        return text
    return f"({text})"


__all__ = [
    "Const", "UNIT", "TRUE", "FALSE", "Var", "DynVar", "Fun", "Case", "BehVar", "FactVal", "Prim",
    "App", "Let", "Dlet", "If", "Tell", "Retract", "Append", "VaApp", "Checkpoint",
    "Checkpointed", "Overlined", "Value", "Expr", "is_value", "fresh_var", "free_vars",
    "all_names", "substitute", "instantiate", "closed_check", "free_params", "contains_aux",
    "strip_aux", "pretty", "Atom", "Variable", "Negation", "Constraint", "format_term",
]
