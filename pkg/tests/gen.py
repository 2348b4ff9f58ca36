"""Seeded random generators for Datalog programs, variations and bundles."""

from __future__ import annotations

import random

from coda.datalog import Atom, Constraint, Context, Negation, Rule, Variable
from coda.events import EventDef, Scenario
from coda.interpreter import PEnv
from coda.syntax import (
    FALSE,
    TRUE,
    UNIT,
    App,
    Append,
    BehVar,
    Case,
    Const,
    Dlet,
    DynVar,
    FactVal,
    Fun,
    If,
    Let,
    Retract,
    Tell,
    VaApp,
    Var,
)

UNIVERSE = (0, 1, 2, 3, 4, "a", "b", "c", "d", "e")
OPS = ("<", "<=", ">", ">=", "=", "!=")


# ---------------------------------------------------------------------------
# Datalog


def _term(rng, bound_pool, p_var=0.7):
    if bound_pool and rng.random() < p_var:
        return Variable(rng.choice(bound_pool))
    return rng.choice(UNIVERSE)


def random_datalog(rng: random.Random):
    """A stratified program: <=4 predicates, <=20 facts, <=10 rules."""
    preds = [f"p{i}" for i in range(rng.randint(1, 4))]
    arity = {p: rng.randint(0, 2) for p in preds}
    level = {p: rng.randint(0, 2) for p in preds}
    facts = []
    for _ in range(rng.randint(0, 20)):
        p = rng.choice(preds)
        facts.append(Atom(p, tuple(rng.choice(UNIVERSE) for _ in range(arity[p]))))
    rules = []
    for _ in range(rng.randint(0, 10)):
        head = rng.choice(preds)
        pos = [p for p in preds if level[p] <= level[head]]
        neg = [p for p in preds if level[p] < level[head]]
        body = []
        bound: list[str] = []
        for _ in range(rng.randint(1, 3)):
            p = rng.choice(pos)
            args = []
            for _ in range(arity[p]):
                if rng.random() < 0.75:
                    v = rng.choice(("x", "y", "z"))
                    args.append(Variable(v))
                    if v not in bound:
                        bound.append(v)
                else:
                    args.append(rng.choice(UNIVERSE))
            body.append(Atom(p, tuple(args)))
        if neg and rng.random() < 0.35:
            p = rng.choice(neg)
            body.insert(rng.randint(0, len(body)), Negation(Atom(p, tuple(_term(rng, bound) for _ in range(arity[p])))))
        if bound and rng.random() < 0.35:
            c = Constraint(rng.choice(OPS), Variable(rng.choice(bound)), _term(rng, bound, 0.3))
            body.insert(rng.randint(0, len(body)), c)
        rules.append(Rule(Atom(head, tuple(_term(rng, bound, 0.8) for _ in range(arity[head]))), tuple(body)))
    return facts, rules, preds, arity


def random_goal(rng: random.Random, preds, arity):
    bound: list[str] = []
    goal = []
    for _ in range(1 if rng.random() < 0.6 else 2):
        p = rng.choice(preds)
        args = []
        for _ in range(arity[p]):
            if rng.random() < 0.6:
                v = rng.choice(("u", "v", "w"))
                args.append(Variable(v))
                if v not in bound:
                    bound.append(v)
            else:
                args.append(rng.choice(UNIVERSE))
        goal.append(Atom(p, tuple(args)))
    if rng.random() < 0.3:
        p = rng.choice(preds)
        goal.append(Negation(Atom(p, tuple(_term(rng, bound) for _ in range(arity[p])))))
    if bound and rng.random() < 0.3:
        goal.append(Constraint(rng.choice(OPS), Variable(rng.choice(bound)), _term(rng, bound, 0.3)))
    return tuple(goal)


# ---------------------------------------------------------------------------
# Host-level contexts, goals and expressions

FACT_POOL = tuple([Atom("f0"), Atom("f1"), Atom("f2")] + [Atom("r", (k,)) for k in range(3)])
CTX_RULES = (
    Rule(Atom("g0"), (Atom("f0"),)),
    Rule(Atom("g0"), (Atom("f1"), Atom("r", (1,)))),
    Rule(Atom("g1", (Variable("x"),)), (Atom("r", (Variable("x"),)), Negation(Atom("f2")))),
)


def random_context(rng: random.Random) -> Context:
    facts = [f for f in FACT_POOL if rng.random() < 0.5]
    rng.shuffle(facts)
    return Context(tuple(facts), CTX_RULES)


def random_case_goal(rng: random.Random):
    kind = rng.random()
    if kind < 0.1:
        return ()
    if kind < 0.55:
        return (rng.choice((Atom("f0"), Atom("f1"), Atom("f2"), Atom("g0"))),)
    if kind < 0.7:
        return (Atom("r", (Variable("k"),)),)
    if kind < 0.85:
        return (Atom("g1", (rng.randint(0, 2),)),)
    return (Atom("g0"), Negation(Atom(rng.choice(("f1", "f2")))))


def random_effects(rng: random.Random, n_max=3):
    return tuple(
        (rng.choice(("tell", "retract")), rng.choice(FACT_POOL)) for _ in range(rng.randint(0, n_max))
    )


class ExprGen:
    """Closed, terminating expressions (no recursion) over the host fact pool."""

    def __init__(self, rng: random.Random, dlet_bias=0.15):
        self.rng = rng
        self.dlet_bias = dlet_bias
        self.counter = 0

    def name(self, base):
        self.counter += 1
        return f"{base}{self.counter}"

    def leaf(self, scope, params):
        rng = self.rng
        r = rng.random()
        if scope and r < 0.3:
            return Var(rng.choice(scope))
        if params and r < 0.45:
            return DynVar(rng.choice(params))
        if r < 0.55:
            return UNIT
        return Const(rng.randint(0, 9))

    def variation(self, depth, scope, params, n=None):
        param = self.name("x")
        cases = []
        for _ in range(n or self.rng.randint(1, 3)):
            goal = random_case_goal(self.rng)
            inner = scope + [param] + (["?k"] if any(
                isinstance(l, Atom) and l.args and isinstance(l.args[0], Variable) for l in goal) else [])
            cases.append(Case(goal, self.expr(depth - 1, inner, params)))
        if self.rng.random() < 0.4:
            cases.append(Case((), self.expr(depth - 1, scope + [param], params)))
        return BehVar(param, tuple(cases))

    def expr(self, depth, scope=None, params=None):
        scope = list(scope or [])
        params = list(params or [])
        rng = self.rng
        if depth <= 0:
            return self.leaf(scope, params)
        r = rng.random()
        if r < 0.15:
            x = self.name("v")
            return Let(x, self.expr(depth - 1, scope, params), self.expr(depth - 1, scope + [x], params))
        if r < 0.25:
            cond = rng.choice((TRUE, FALSE))
            return If(cond, self.expr(depth - 1, scope, params), self.expr(depth - 1, scope, params))
        if r < 0.35:
            op = Tell if rng.random() < 0.5 else Retract
            x = self.name("u")
            return Let(x, op(FactVal(rng.choice(FACT_POOL))), self.expr(depth - 1, scope, params))
        if r < 0.55:
            return VaApp(self.variation(depth, scope, params), self.expr(depth - 1, scope, params))
        if r < 0.62:
            bv = Append(self.variation(depth, scope, params), self.variation(depth, scope, params))
            return VaApp(bv, self.expr(depth - 1, scope, params))
        if r < 0.62 + self.dlet_bias:
            p = self.name("p")
            return Dlet(p, self.expr(depth - 1, scope, params), random_case_goal(rng),
                        self.expr(depth - 1, scope, params + [p]))
        if r < 0.9:
            x = self.name("y")
            return App(Fun(None, x, self.expr(depth - 1, scope + [x], params)), self.expr(depth - 1, scope, params))
        return self.leaf(scope, params)


def random_bundle(rng: random.Random, max_inject=30):
    """(program, ctx, handlers, scenario) with 1-5 events and random injection steps."""
    g = ExprGen(rng)
    program = g.expr(rng.randint(2, 5))
    ctx = random_context(rng)
    names = [f"e{i}" for i in range(rng.randint(1, 5))]
    events = {n: EventDef(n, random_effects(rng)) for n in names}
    handlers = {}
    for n in names:
        if rng.random() < 0.7:
            handlers[n] = ExprGen(rng, dlet_bias=0.2).expr(rng.randint(0, 2))
    schedule = sorted((rng.randint(0, max_inject), rng.choice(names)) for _ in range(rng.randint(1, 5)))
    schedule.sort(key=lambda t: t[0])
    return program, ctx, handlers, Scenario(events, tuple(schedule))


def random_env(rng: random.Random) -> PEnv:
    env = PEnv()
    for p in ("q0", "q1")[: rng.randint(0, 2)]:
        env = env.push(p, Case(random_case_goal(rng), Const(rng.randint(0, 9))))
    return env


def _inner_variation(g: ExprGen):
    cases = [Case(random_case_goal(g.rng), Const(10 + i)) for i in range(g.rng.randint(1, 2))]
    if g.rng.random() < 0.5:
        cases.append(Case((), Const(19)))
    return BehVar(g.name("x"), tuple(cases))


def recovery_case(rng: random.Random):
    """Pieces for one recovery scenario.

    Returns (program, variation, context, event, handler, inject_after, env):
    the program applies the variation (possibly under a let), its case bodies
    take a few steps (possibly through a dlet or a nested application), and the
    event arrives after ``inject_after`` application steps.
    """
    g = ExprGen(rng)
    cases = []
    for i in range(rng.randint(1, 4)):
        body = Const(i)
        for _ in range(rng.randint(1, 3)):
            body = Let(g.name("w"), UNIT, body)
        if rng.random() < 0.4:
            body = Let(g.name("w"), VaApp(_inner_variation(g), UNIT), body)
        if rng.random() < 0.4:
            body = Dlet(g.name("p"), Const(i), random_case_goal(rng), body)
        cases.append(Case(random_case_goal(rng), body))
    bv = BehVar("x", tuple(cases))
    program = VaApp(bv, Const(rng.randint(0, 9)))
    if rng.random() < 0.5:
        program = Let("y", program, App(Fun(None, "z", Var("z")), Var("y")))
    ctx = random_context(rng)
    edef = EventDef("lost", falsifying_effects(rng, ctx))
    handler = ExprGen(rng, dlet_bias=0.2).expr(rng.randint(0, 2))
    return program, bv, ctx, edef, handler, rng.randint(1, 4), random_env(rng)


def falsifying_effects(rng: random.Random, ctx: Context):
    """Effects biased to change the truth of case goals: drop present facts, add absent ones."""
    out = []
    for f in FACT_POOL:
        if f in ctx and rng.random() < 0.6:
            out.append(("retract", f))
        elif f not in ctx and rng.random() < 0.25:
            out.append(("tell", f))
    rng.shuffle(out)
    return tuple(out)


def append_case(rng: random.Random):
    """(bv1, bv2, argument, context) for the append-equivalence check."""
    g = ExprGen(rng)
    bv1 = g.variation(2, [], [], n=rng.randint(1, 3))
    bv2 = g.variation(2, [], [], n=rng.randint(1, 3))
    return bv1, bv2, Const(rng.randint(0, 9)), random_context(rng)


def dlet_program(rng: random.Random):
    """A terminating program with at least two nested dlets."""
    g = ExprGen(rng, dlet_bias=0.25)
    body = g.expr(rng.randint(1, 3), params=["p_outer", "p_inner"])
    inner = Dlet("p_inner", g.expr(1, params=["p_outer"]), random_case_goal(rng), body)
    if rng.random() < 0.5:
        inner = Let("v0", inner, g.expr(2, scope=["v0"], params=["p_outer"]))
    return Dlet("p_outer", Const(rng.randint(0, 9)), (), inner)
