"""Small-step reduction of application expressions against the context.

One call to :func:`step_slave` performs exactly one reduction
``<rho, C, e> -> <rho', C', e'>``. Evaluation order is leftmost-innermost;
the congruence position reduced next is found by :func:`_focus`.

When the context carries the ``ev`` mark, the checkpoints on the path to
the redex are re-validated outside-in before anything else happens.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

from .datalog import EV, PLAIN, Context, format_goal, retract_fact, solve, substitute_goal, tell_fact
from .syntax import (
    FALSE,
    TRUE,
    UNIT,
    App,
    Append,
    BehVar,
    Case,
    Checkpoint,
    Checkpointed,
    Const,
    Dlet,
    DynVar,
    FactVal,
    Fun,
    If,
    Let,
    Overlined,
    Prim,
    Retract,
    Tell,
    VaApp,
    Var,
    all_names,
    fresh_var,
    instantiate,
    is_value,
    pretty,
    substitute,
)


class PEnv(Mapping):
    """Immutable map from parameter name to its variation (tuple of Case)."""

    __slots__ = ("_bindings", "_hash")

    def __init__(self, bindings=None):
        self._bindings = {k: tuple(v) for k, v in (bindings or {}).items() if v}
        self._hash = None

    def __getitem__(self, name):
        return self._bindings[name]

    def __iter__(self):
        return iter(self._bindings)

    def __len__(self):
        return len(self._bindings)

    def __eq__(self, other):
        if isinstance(other, PEnv):
            return self._bindings == other._bindings
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._bindings.items()))
        return self._hash

    def __repr__(self):
        return f"PEnv({self._bindings!r})"

    def push(self, name: str, case: Case) -> PEnv:
        out = dict(self._bindings)
        out[name] = (case,) + self._bindings.get(name, ())
        return PEnv(out)

    def pop(self, name: str) -> PEnv:
        out = dict(self._bindings)
        rest = out.pop(name)[1:]
        if rest:
            out[name] = rest
        return PEnv(out)


@dataclass(frozen=True)
class SlaveConfig:
    env: PEnv
    ctx: Context
    expr: object


@dataclass(frozen=True)
class AdaptationFailure:
    cases: tuple
    ctx: Context
    expr: object

    def __str__(self):
        goals = "; ".join(format_goal(c.goal) or "true" for c in self.cases)
        return f"no case holds in the current context (goals: {goals})"


@dataclass(frozen=True)
class Next:
    config: SlaveConfig
    rule: str
    note: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Done:
    value: object
    config: SlaveConfig


@dataclass(frozen=True)
class Failed:
    failure: AdaptationFailure
    config: SlaveConfig


@dataclass(frozen=True)
class Stuck:
    reason: str  # TypeMismatch | UnboundParameter | FreeVariable | StepBudgetExceeded
    detail: str
    expr: object
    config: SlaveConfig


class _StuckSignal(Exception):
    def __init__(self, reason, detail, expr):
        super().__init__(detail)
        self.reason, self.detail, self.expr = reason, detail, expr


class _FailSignal(Exception):
    def __init__(self, cases, expr):
        super().__init__("adaptation failure")
        self.cases, self.expr = cases, expr


# ---------------------------------------------------------------------------
# Dispatching


def dispatch(ctx: Context, cases) -> tuple[int, object, tuple] | None:
    """Index, instantiated body and instantiated goal of the first case whose goal holds."""
    for i, case in enumerate(cases):
        theta = solve(ctx, case.goal)
        if theta is not None:
            return i, instantiate(case.body, theta), substitute_goal(case.goal, theta)
    return None


def dsp(ctx: Context, cases) -> tuple[object, tuple] | None:
    hit = dispatch(ctx, cases)
    if hit is None:
        return None
    return hit[1], hit[2]


# ---------------------------------------------------------------------------
# Reduction


def _focus(e):
    """(child, rebuild) for the congruence position that reduces next, or None if e is the redex."""
    match e:
        case If(c, t, f) if not is_value(c):
            return c, lambda x: If(x, t, f)
        case Let(n, b, body) if not is_value(b):
            return b, lambda x: Let(n, x, body)
        case App(fn, arg):
            if not is_value(fn):
                return fn, lambda x: App(x, arg)
            if isinstance(fn, (Fun, Prim)) and not is_value(arg):
                return arg, lambda x: App(fn, x)
        case Tell(x) if not is_value(x):
            return x, Tell
        case Retract(x) if not is_value(x):
            return x, Retract
        case Overlined(x, p) if not is_value(x):
            return x, lambda y: Overlined(y, p)
        case Append(left, right):
            if not is_value(left):
                return left, lambda x: Append(x, right)
            if isinstance(left, BehVar) and not is_value(right):
                return right, lambda x: Append(left, x)
        case VaApp(fn, arg):
            if not is_value(fn):
                return fn, lambda x: VaApp(x, arg)
            if isinstance(fn, BehVar) and not is_value(arg):
                return arg, lambda x: VaApp(fn, x)
        case Checkpointed(x, ann) if not is_value(x):
            return x, lambda y: Checkpointed(y, ann)
    return None


def _mismatch(what, e):
    return _StuckSignal("TypeMismatch", f"{what}: {pretty(e)}", e)


def _reduce(env: PEnv, ctx: Context, e):
    """Apply the axiom rule for redex e; returns (env, ctx, e', rule, note)."""
    match e:
        case If(cond, then, else_):
            if cond == TRUE:
                return env, ctx, then, "If2", {}
            if cond == FALSE:
                return env, ctx, else_, "If3", {}
            raise _mismatch("condition is not a boolean", e)
        case Let(name, bound, body):
            return env, ctx, substitute(body, name, bound), "Let2", {}
        case App(Fun(name, param, body) as fn, arg):
            out = substitute(body, param, arg)
            if name is not None and name != param:
                out = substitute(out, name, fn)
            return env, ctx, out, "App3", {}
        case App(Prim(name, arity, result, args), arg):
            args = args + (arg,)
            if len(args) == arity:
                return env, ctx, result, "Prim", {"prim": name}
            return env, ctx, Prim(name, arity, result, args), "Prim", {"prim": name}
        case App():
            raise _mismatch("applying a non-function", e)
        case Tell(FactVal(fact)):
            return env, tell_fact(ctx, fact), UNIT, "Tell2", {}
        case Retract(FactVal(fact)):
            return env, retract_fact(ctx, fact), UNIT, "Retract2", {}
        case Tell() | Retract():
            raise _mismatch("context update needs a fact", e)
        case Dlet(param, bound, goal, body):
            return env.push(param, Case(goal, bound)), ctx, Overlined(body, param), "Dlet1", {"param": param}
        case Overlined(value, param):
            if param not in env:
                raise _StuckSignal("UnboundParameter", f"no binding of ~{param} to pop", e)
            return env.pop(param), ctx, value, "Dlet3", {"param": param}
        case Append(BehVar(x, va1), BehVar(y, va2)):
            avoid = all_names(e.left) | all_names(e.right)
            z = fresh_var(x, avoid)
            cases = tuple(Case(c.goal, substitute(c.body, x, Var(z))) for c in va1) + tuple(
                Case(c.goal, substitute(c.body, y, Var(z))) for c in va2
            )
            return env, ctx, BehVar(z, cases), "Append3", {}
        case Append():
            raise _mismatch("∪ needs two behavioural variations", e)
        case VaApp(BehVar(param, cases), arg):
            hit = dispatch(ctx, cases)
            if hit is None:
                raise _FailSignal(cases, e)
            index, body, goal = hit
            out = Checkpointed(substitute(body, param, arg), Checkpoint(goal, env, e))
            return env, ctx, out, "VaApp3", {"case": index, "goal": format_goal(goal) or "true"}
        case VaApp():
            raise _mismatch("# needs a behavioural variation", e)
        case DynVar(name):
            if name not in env:
                raise _StuckSignal("UnboundParameter", f"parameter ~{name} is unbound", e)
            hit = dispatch(ctx, env[name])
            if hit is None:
                raise _FailSignal(env[name], e)
            index, body, goal = hit
            out = Checkpointed(body, Checkpoint(goal, env, e))
            return env, ctx, out, "Dynvar", {"param": name, "case": index, "goal": format_goal(goal) or "true"}
        case Checkpointed(value, _):
            return env, ctx, value, "Brk2", {}
        case Var(name):
            raise _StuckSignal("FreeVariable", f"free variable {name}", e)
    raise _StuckSignal("TypeMismatch", f"no rule applies to {pretty(e)}", e)


def _step(env, ctx, e):
    path = []
    node = e
    while True:
        hole = _focus(node)
        if hole is None:
            break
        path.append(hole[1])
        node = hole[0]
    env, ctx, node, rule, note = _reduce(env, ctx, node)
    for rebuild in reversed(path):
        node = rebuild(node)
    return env, ctx, node, rule, note


def _revalidate(ctx, e):
    """Outermost checkpoint on the path to the redex whose goal no longer holds.

    Returns (annotation, rebuilt expression with that node replaced by its resume
    expression), or None when every goal on the path still holds.
    """
    path = []
    node = e
    while True:
        if isinstance(node, Checkpointed) and solve(ctx, node.ann.goal) is None:
            out = node.ann.resume
            for rebuild in reversed(path):
                out = rebuild(out)
            return node.ann, out
        hole = _focus(node)
        if hole is None:
            return None
        path.append(hole[1])
        node = hole[0]


def checkpoints_on_path(e) -> list[Checkpoint]:
    """Checkpoint annotations from the root down to the next redex, outermost first."""
    out = []
    node = e
    while True:
        if isinstance(node, Checkpointed):
            out.append(node.ann)
        hole = _focus(node)
        if hole is None:
            return out
        node = hole[0]


def step_slave(cfg: SlaveConfig):
    """One reduction step; returns Next, Done, Failed or Stuck."""
    if is_value(cfg.expr):
        return Done(cfg.expr, cfg)
    ctx = cfg.ctx
    marked = ctx.mark == EV
    if marked:
        hit = _revalidate(ctx, cfg.expr)
        if hit is not None:
            ann, expr = hit
            note = {"restore": pretty(ann.resume), "failed_goal": format_goal(ann.goal) or "true"}
            return Next(SlaveConfig(ann.env, ctx.with_mark(PLAIN), expr), "Brk4", note)
    try:
        env, ctx, expr, rule, note = _step(cfg.env, ctx, cfg.expr)
    except _StuckSignal as sig:
        return Stuck(sig.reason, sig.detail, sig.expr, cfg)
    except _FailSignal as sig:
        return Failed(AdaptationFailure(sig.cases, cfg.ctx, sig.expr), cfg)
    if marked:
        if checkpoints_on_path(cfg.expr):
            rule = "Brk3/" + rule
        ctx = ctx.with_mark(PLAIN)
    return Next(SlaveConfig(env, ctx, expr), rule, note)


def run_to_value(cfg: SlaveConfig, max_steps: int = 10_000):
    """Iterate step_slave; returns (outcome, trace of Next records).

    The outcome is Done, Failed, Stuck, or Stuck("StepBudgetExceeded") once
    ``max_steps`` calls have been made without reaching a final outcome.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    trace = []
    for _ in range(max_steps):
        out = step_slave(cfg)
        if not isinstance(out, Next):
            return out, trace
        trace.append(out)
        cfg = out.config
    return Stuck("StepBudgetExceeded", f"no value after {max_steps} steps", cfg.expr, cfg), trace


__all__ = [
    "PEnv", "SlaveConfig", "AdaptationFailure", "Next", "Done", "Failed", "Stuck", "dispatch",
    "dsp", "step_slave", "run_to_value", "checkpoints_on_path", "EV", "PLAIN", "Const",
]
