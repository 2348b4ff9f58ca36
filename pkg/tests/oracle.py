"""Independent reference implementations used to check the engine.

Nothing here calls into coda's evaluation code: the Datalog model is a naive
generate-and-test fixpoint over the active domain, and dispatch / recovery
are re-derived from that model.
"""

from __future__ import annotations

from dataclasses import replace

from coda.datalog import Atom, Negation, Variable
from coda.syntax import (
    App, Append, BehVar, Checkpointed, Fun, If, Let, Overlined, Prim, Retract, Tell, VaApp, is_value,
)


def _levels(rules):
    level = {}
    for r in rules:
        level.setdefault(r.head.pred, 0)
        for lit in r.body:
            a = lit.atom if isinstance(lit, Negation) else lit
            if isinstance(a, Atom):
                level.setdefault(a.pred, 0)
    for _ in range(len(level) + 2):
        for r in rules:
            for lit in r.body:
                if isinstance(lit, Negation):
                    level[r.head.pred] = max(level[r.head.pred], level[lit.atom.pred] + 1)
                elif isinstance(lit, Atom):
                    level[r.head.pred] = max(level[r.head.pred], level[lit.pred])
    return level


def _val(term, asg):
    return asg[term.name] if isinstance(term, Variable) else term


def _cmp(op, a, b):
    same = type(a) is type(b) and a == b
    if op == "=":
        return same
    if op == "!=":
        return not same
    if type(a) is not int or type(b) is not int:
        return False
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]


def literal_true(lit, asg, model) -> bool:
    if isinstance(lit, Atom):
        return (lit.pred, tuple(_val(t, asg) for t in lit.args)) in model
    if isinstance(lit, Negation):
        return (lit.atom.pred, tuple(_val(t, asg) for t in lit.atom.args)) not in model
    return _cmp(lit.op, _val(lit.lhs, asg), _val(lit.rhs, asg))


def _vars_of(lit):
    a = lit.atom if isinstance(lit, Negation) else lit
    if isinstance(a, Atom):
        terms = a.args
    else:
        terms = (a.lhs, a.rhs)
    return [t.name for t in terms if isinstance(t, Variable)]


def assignments(body, domain, model):
    """Every assignment of the body's variables over `domain` making all literals true."""
    names = []
    for lit in body:
        for n in _vars_of(lit):
            if n not in names:
                names.append(n)
    # check each literal as soon as its variables are all assigned
    ready = [[] for _ in range(len(names) + 1)]
    for lit in body:
        vs = _vars_of(lit)
        ready[max((names.index(v) + 1 for v in vs), default=0)].append(lit)

    def go(i, asg):
        if not all(literal_true(l, asg, model) for l in ready[i]):
            return
        if i == len(names):
            yield dict(asg)
            return
        for c in domain:
            asg[names[i]] = c
            yield from go(i + 1, asg)
        asg.pop(names[i], None)

    yield from go(0, {})


def naive_model(facts, rules) -> set:
    """Set of (pred, args) derivable under the stratified semantics."""
    model = {(f.pred, tuple(f.args)) for f in facts}
    domain = []
    for f in facts:
        domain.extend(f.args)
    for r in rules:
        for lit in (r.head, *r.body):
            a = lit.atom if isinstance(lit, Negation) else lit
            terms = a.args if isinstance(a, Atom) else (a.lhs, a.rhs)
            domain.extend(t for t in terms if not isinstance(t, Variable))
    domain = list(dict.fromkeys((type(c), c) for c in domain))
    domain = [c for _, c in domain]
    level = _levels(rules)
    for lv in sorted(set(level.values()) or {0}):
        layer = [r for r in rules if level[r.head.pred] == lv]
        changed = True
        while changed:
            changed = False
            for r in layer:
                for asg in list(assignments(r.body, domain, model)):
                    fact = (r.head.pred, tuple(_val(t, asg) for t in r.head.args))
                    if fact not in model:
                        model.add(fact)
                        changed = True
    return model


def goal_domain(model, goal):
    dom = []
    for _, args in sorted(model, key=repr):
        dom.extend(args)
    for lit in goal:
        a = lit.atom if isinstance(lit, Negation) else lit
        terms = a.args if isinstance(a, Atom) else (a.lhs, a.rhs)
        dom.extend(t for t in terms if not isinstance(t, Variable))
    return [c for _, c in dict.fromkeys((type(c), c) for c in dom)]


def goal_holds(model, goal) -> bool:
    return next(iter(assignments(goal, goal_domain(model, goal), model)), None) is not None


def ground_goal_true(model, goal) -> bool:
    return all(literal_true(lit, {}, model) for lit in goal)


def first_case(model, cases):
    """Index of the first case whose goal the model satisfies, or None."""
    for i, c in enumerate(cases):
        if goal_holds(model, c.goal):
            return i
    return None


def apply_effects(facts: list, effects) -> list:
    """Event effects on a plain fact list, in order."""
    out = list(facts)
    for op, f in effects:
        if op == "tell":
            if f not in out:
                out.append(f)
        elif f in out:
            out.remove(f)
    return out


# ---------------------------------------------------------------------------
# Reference recovery (Brk rules), written against the AST directly


def _eval_slot(e):
    """Name of the field holding the subterm that reduces next, or None if e itself is the redex."""
    if isinstance(e, If):
        return None if is_value(e.cond) else "cond"
    if isinstance(e, Let):
        return None if is_value(e.bound) else "bound"
    if isinstance(e, (Tell, Retract)):
        return None if is_value(e.expr) else "expr"
    if isinstance(e, (Overlined, Checkpointed)):
        return None if is_value(e.expr) else "expr"
    if isinstance(e, App):
        if not is_value(e.fn):
            return "fn"
        return "arg" if isinstance(e.fn, (Fun, Prim)) and not is_value(e.arg) else None
    if isinstance(e, VaApp):
        if not is_value(e.fn):
            return "fn"
        return "arg" if isinstance(e.fn, BehVar) and not is_value(e.arg) else None
    if isinstance(e, Append):
        if not is_value(e.left):
            return "left"
        return "right" if isinstance(e.left, BehVar) and not is_value(e.right) else None
    return None


def reference_brk4(e, holds):
    """Brk4 by recursive descent: (restored expression, restored env) or None.

    ``holds(goal)`` decides satisfiability; the outermost failing checkpoint
    on the evaluation path is replaced by its resume expression.
    """
    if isinstance(e, Checkpointed) and not holds(e.ann.goal):
        return e.ann.resume, e.ann.env
    slot = _eval_slot(e)
    if slot is None:
        return None
    inner = reference_brk4(getattr(e, slot), holds)
    if inner is None:
        return None
    return replace(e, **{slot: inner[0]}), inner[1]


def model_of(ctx) -> set:
    return naive_model(list(ctx.facts), list(ctx.rules))
