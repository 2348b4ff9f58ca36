"""The context: a stratified Datalog knowledge base.

Facts are kept in insertion order so that goal answers are deterministic.
Each stratum is saturated bottom-up (semi-naive); goals are then answered
by a left-to-right search over the computed model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Iterator, Union

from .errors import CyclicNegationError, RangeRestrictionError, UnboundConstraintError
from .lexer import TokenStream, tokenize

PLAIN = "plain"
EV = "ev"

Constant = Union[int, str]


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return "?" + self.name


Term = Union[Constant, Variable]


def is_ground(term: Term) -> bool:
    return not isinstance(term, Variable)


def format_term(term: Term) -> str:
    if isinstance(term, Variable):
        return str(term)
    if isinstance(term, int):
        return str(term)
    if re.fullmatch(r"[a-z][A-Za-z0-9_']*", term) and term not in _RESERVED:
        return term
    return '"' + term.replace("\\", "\\\\").replace('"', '\\"') + '"'


_RESERVED = frozenset({"not", "in", "when", "let", "dlet", "fun", "fn", "if", "then", "else",
                       "tell", "retract", "true", "false", "on", "event", "at", "inject"})


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()

    def variables(self) -> set[str]:
        return {a.name for a in self.args if isinstance(a, Variable)}

    def is_ground(self) -> bool:
        return all(is_ground(a) for a in self.args)

    def substitute(self, theta) -> Atom:
        return Atom(self.pred, tuple(_resolve(a, theta) for a in self.args))

    def __str__(self):
        if not self.args:
            return self.pred
        return f"{self.pred}({', '.join(format_term(a) for a in self.args)})"


# A fact is a ground atom; no separate class is needed.
Fact = Atom


@dataclass(frozen=True)
class Negation:
    atom: Atom

    def variables(self) -> set[str]:
        return self.atom.variables()

    def substitute(self, theta) -> Negation:
        return Negation(self.atom.substitute(theta))

    def __str__(self):
        return f"not {self.atom}"


_COMPARISONS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Constraint:
    op: str
    lhs: Term
    rhs: Term

    def variables(self) -> set[str]:
        return {t.name for t in (self.lhs, self.rhs) if isinstance(t, Variable)}

    def substitute(self, theta) -> Constraint:
        return Constraint(self.op, _resolve(self.lhs, theta), _resolve(self.rhs, theta))

    def holds(self, a: Constant, b: Constant) -> bool:
        same = type(a) is type(b) and a == b
        if self.op == "=":
            return same
        if self.op == "!=":
            return not same
        # Orderings are defined on integers only; anything else is simply false.
        if type(a) is not int or type(b) is not int:
            return False
        return _COMPARISONS[self.op](a, b)

    def __str__(self):
        return f"{format_term(self.lhs)} {self.op} {format_term(self.rhs)}"


Literal = Union[Atom, Negation, Constraint]
Goal = tuple  # tuple[Literal, ...]


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple = ()

    def __str__(self):
        return f"{self.head} <- {', '.join(map(str, self.body))}."


def _resolve(term: Term, theta) -> Term:
    if isinstance(term, Variable):
        return theta.get(term.name, term)
    return term


def goal_variables(goal) -> set[str]:
    out: set[str] = set()
    for lit in goal:
        out |= lit.variables()
    return out


def substitute_goal(goal, theta) -> tuple:
    return tuple(lit.substitute(theta) for lit in goal)


def format_goal(goal) -> str:
    return ", ".join(map(str, goal))


def check_range_restriction(head: Atom | None, body) -> None:
    bound: set[str] = set()
    for lit in body:
        if isinstance(lit, Atom):
            bound |= lit.variables()
    clause = Rule(head, tuple(body)) if head is not None else format_goal(body)
    if head is not None:
        for name in sorted(head.variables() - bound):
            raise RangeRestrictionError(name, clause)
    for lit in body:
        if not isinstance(lit, Atom):
            for name in sorted(lit.variables() - bound):
                raise RangeRestrictionError(name, clause)


# ---------------------------------------------------------------------------
# Stratification


def _predicate_graph(rules):
    edges: dict[str, set[tuple[str, bool]]] = {}
    preds: list[str] = []

    def note(p):
        if p not in edges:
            edges[p] = set()
            preds.append(p)

    for rule in rules:
        note(rule.head.pred)
        for lit in rule.body:
            if isinstance(lit, Atom):
                note(lit.pred)
                edges[rule.head.pred].add((lit.pred, False))
            elif isinstance(lit, Negation):
                note(lit.atom.pred)
                edges[rule.head.pred].add((lit.atom.pred, True))
    return preds, edges


def _path(edges, src, dst):
    """Predicate path src ->* dst following dependency edges, or None."""
    prev = {src: None}
    stack = [src]
    while stack:
        node = stack.pop()
        if node == dst:
            path = []
            while node is not None:
                path.append(node)
                node = prev[node]
            return path[::-1]
        for nxt, _ in sorted(edges.get(node, ())):
            if nxt not in prev:
                prev[nxt] = node
                stack.append(nxt)
    return None


def stratify(rules) -> list[list[Rule]]:
    """Partition rules into strata so negated dependencies point strictly down."""
    rules = list(rules)
    preds, edges = _predicate_graph(rules)
    level = dict.fromkeys(preds, 0)
    changed = True
    while changed:
        changed = False
        for head in preds:
            for dep, negated in edges[head]:
                want = level[dep] + 1 if negated else level[dep]
                if want > level[head]:
                    if want > len(preds):
                        raise CyclicNegationError(_negative_cycle(preds, edges))
                    level[head] = want
                    changed = True
    strata: dict[int, list[Rule]] = {}
    for rule in rules:
        strata.setdefault(level[rule.head.pred], []).append(rule)
    return [strata[k] for k in sorted(strata)]


def _negative_cycle(preds, edges) -> list[str]:
    for head in preds:
        for dep, negated in sorted(edges[head]):
            if negated:
                back = _path(edges, dep, head)
                if back is not None:
                    # head -not-> dep ->* head; report the loop once, starting at head
                    return [head] + back[:-1] if dep != head else [head]
    return list(preds)


@lru_cache(maxsize=256)
def _strata(rules: tuple) -> tuple:
    return tuple(tuple(s) for s in stratify(rules))


# ---------------------------------------------------------------------------
# Evaluation


@lru_cache(maxsize=1024)
def _plan(body: tuple) -> tuple:
    """Order body literals: positive atoms as written, each filter as soon as its variables are bound."""
    pending = [(i, lit) for i, lit in enumerate(body) if not isinstance(lit, Atom)]
    plan: list[tuple[int, Literal]] = []
    bound: set[str] = set()

    def flush():
        for item in list(pending):
            if item[1].variables() <= bound:
                plan.append(item)
                pending.remove(item)

    flush()
    for i, lit in enumerate(body):
        if isinstance(lit, Atom):
            plan.append((i, lit))
            bound |= lit.variables()
            flush()
    # Unsafe filters are left last; evaluating them raises.
    plan.extend(pending)
    return tuple(plan)


def _match(args, row, theta):
    if len(args) != len(row):
        return None
    out = theta
    for a, v in zip(args, row):
        if isinstance(a, Variable):
            cur = out.get(a.name, _UNSET)
            if cur is _UNSET:
                if out is theta:
                    out = dict(theta)
                out[a.name] = v
            elif not (type(cur) is type(v) and cur == v):
                return None
        elif not (type(a) is type(v) and a == v):
            return None
    return out


_UNSET = object()


def _ground(term, theta):
    if isinstance(term, Variable):
        try:
            return theta[term.name]
        except KeyError:
            raise UnboundConstraintError(f"variable ?{term.name} is unbound when its filter is evaluated") from None
    return term


def _search(plan, k, model, theta, override) -> Iterator[dict]:
    if k == len(plan):
        yield theta
        return
    index, lit = plan[k]
    if isinstance(lit, Atom):
        rows = override[1] if override is not None and override[0] == index else model.get(lit.pred, ())
        for row in list(rows):
            nxt = _match(lit.args, row, theta)
            if nxt is not None:
                yield from _search(plan, k + 1, model, nxt, override)
    elif isinstance(lit, Negation):
        key = tuple(_ground(a, theta) for a in lit.atom.args)
        if key not in model.get(lit.atom.pred, ()):
            yield from _search(plan, k + 1, model, theta, override)
    else:
        if lit.holds(_ground(lit.lhs, theta), _ground(lit.rhs, theta)):
            yield from _search(plan, k + 1, model, theta, override)


def evaluate(facts, rules) -> dict[str, dict[tuple, None]]:
    """Compute the stratified model: predicate -> ordered set of argument tuples."""
    model: dict[str, dict[tuple, None]] = {}
    for f in facts:
        model.setdefault(f.pred, {})[f.args] = None
    for stratum in _strata(tuple(rules)):
        local = {r.head.pred for r in stratum}
        delta: dict[str, dict[tuple, None]] = {}
        for rule in stratum:
            _fire(rule, model, None, delta)
        while delta:
            for pred, rows in delta.items():
                model.setdefault(pred, {}).update(rows)
            new: dict[str, dict[tuple, None]] = {}
            for rule in stratum:
                for i, lit in enumerate(rule.body):
                    if isinstance(lit, Atom) and lit.pred in local and lit.pred in delta:
                        _fire(rule, model, (i, delta[lit.pred]), new)
            delta = new
    return model


def _fire(rule, model, override, out):
    known = model.get(rule.head.pred, {})
    for theta in _search(_plan(rule.body), 0, model, {}, override):
        row = tuple(_ground(a, theta) for a in rule.head.args)
        if row not in known:
            out.setdefault(rule.head.pred, {})[row] = None


# ---------------------------------------------------------------------------
# Context


@dataclass(frozen=True, eq=False)
class Context:
    """Facts (insertion-ordered, duplicate-free), rules, and the event mark."""

    facts: tuple = ()
    rules: tuple = ()
    mark: str = PLAIN
    _members: frozenset = field(default=frozenset(), repr=False)

    def __post_init__(self):
        facts = tuple(dict.fromkeys(self.facts))
        for f in facts:
            if not f.is_ground():
                raise ValueError(f"context fact {f} is not ground")
        object.__setattr__(self, "facts", facts)
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "_members", frozenset(facts))
        if self.mark not in (PLAIN, EV):
            raise ValueError(f"bad mark {self.mark!r}")
        _strata(self.rules)

    def __eq__(self, other):
        if not isinstance(other, Context):
            return NotImplemented
        return (self._members, self.rules, self.mark) == (other._members, other.rules, other.mark)

    def __hash__(self):
        return hash((self._members, self.rules, self.mark))

    def __contains__(self, fact) -> bool:
        return fact in self._members

    @cached_property
    def model(self):
        return evaluate(self.facts, self.rules)

    def with_mark(self, mark: str) -> Context:
        if mark == self.mark:
            return self
        return replace(self, mark=mark)

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> Context:
        facts, rules = parse_datalog(text, source)
        return cls(tuple(facts), tuple(rules))


def solve(ctx: Context, goal) -> dict | None:
    """First substitution under which `goal` holds in `ctx`, or None."""
    goal = tuple(goal)
    wanted = goal_variables(goal)
    for theta in _search(_plan(goal), 0, ctx.model, {}, None):
        return {k: v for k, v in theta.items() if k in wanted}
    return None


def solutions(ctx: Context, goal) -> Iterator[dict]:
    """All substitutions for `goal`, in search order (duplicates possible)."""
    goal = tuple(goal)
    for theta in _search(_plan(goal), 0, ctx.model, {}, None):
        yield dict(theta)


def tell_fact(ctx: Context, fact: Atom) -> Context:
    if not fact.is_ground():
        raise ValueError(f"cannot tell non-ground fact {fact}")
    if fact in ctx:
        return ctx
    return replace(ctx, facts=ctx.facts + (fact,))


def retract_fact(ctx: Context, fact: Atom) -> Context:
    if fact not in ctx:
        return ctx
    return replace(ctx, facts=tuple(f for f in ctx.facts if f != fact))


# ---------------------------------------------------------------------------
# Concrete syntax

_CMP_OPS = ("<", "<=", ">", ">=", "=", "!=")
_CTX_VAR = re.compile(r"[A-Z][A-Za-z0-9_']*|[a-z][0-9']*")


def parse_term(ts: TokenStream, bare_vars: bool) -> Term:
    tok = ts.peek()
    if tok.kind == "INT" or tok.kind == "STR":
        ts.next()
        return tok.value
    if tok.kind == "QVAR":
        ts.next()
        return Variable(tok.value)
    if tok.kind == "ID":
        ts.next()
        if bare_vars and _CTX_VAR.fullmatch(tok.text):
            return Variable(tok.text)
        return tok.text
    raise ts.error(f"expected a term, found {tok.text or 'end of input'!r}")


def parse_atom(ts: TokenStream, bare_vars: bool) -> Atom:
    name = ts.expect("ID")
    if name.text == "not" or name.text in ("true", "false"):
        raise ts.error(f"{name.text!r} cannot name a predicate", name)
    args = []
    if ts.accept("OP", "("):
        if not ts.at_op(")"):
            args.append(parse_term(ts, bare_vars))
            while ts.accept("OP", ","):
                args.append(parse_term(ts, bare_vars))
        ts.expect("OP", ")")
    return Atom(name.text, tuple(args))


def parse_literal(ts: TokenStream, bare_vars: bool) -> Literal:
    if ts.at_kw("not"):
        ts.next()
        return Negation(parse_atom(ts, bare_vars))
    tok = ts.peek()
    starts_term = tok.kind in ("INT", "STR", "QVAR") or (
        tok.kind == "ID" and ts.peek(1).kind == "OP" and ts.peek(1).text in _CMP_OPS
    )
    if starts_term:
        lhs = parse_term(ts, bare_vars)
        op = ts.peek()
        if not (op.kind == "OP" and op.text in _CMP_OPS):
            raise ts.error("expected a comparison operator", op)
        ts.next()
        return Constraint(op.text, lhs, parse_term(ts, bare_vars))
    return parse_atom(ts, bare_vars)


def parse_goal_tokens(ts: TokenStream, bare_vars: bool = False, stop=(".",)) -> tuple:
    """Parse `lit, lit, ...` up to (not including) a stop token; empty goals are allowed."""
    start = ts.peek()
    lits: list[Literal] = []
    if not (ts.at_op(*stop) or ts.at_kw(*stop)):
        lits.append(parse_literal(ts, bare_vars))
        while ts.accept("OP", ","):
            lits.append(parse_literal(ts, bare_vars))
    try:
        check_range_restriction(None, lits)
    except RangeRestrictionError as exc:
        raise RangeRestrictionError(exc.variable, f"goal at {start.line}:{start.column}") from None
    return tuple(lits)


def parse_goal(text: str) -> tuple:
    """Parse a standalone goal such as ``ticket(?k), ?k != free``."""
    ts = TokenStream(tokenize(text))
    goal = parse_goal_tokens(ts, bare_vars=False, stop=(".",))
    ts.accept("OP", ".")
    ts.expect("EOF")
    return goal


def parse_datalog(text: str, source: str | None = None) -> tuple[list[Atom], list[Rule]]:
    ts = TokenStream(tokenize(text, source), source)
    facts: list[Atom] = []
    rules: list[Rule] = []
    while not ts.at("EOF"):
        head = parse_atom(ts, bare_vars=True)
        body: list[Literal] = []
        if ts.accept("OP", "<-"):
            body.append(parse_literal(ts, True))
            while ts.accept("OP", ","):
                body.append(parse_literal(ts, True))
        ts.expect("OP", ".")
        check_range_restriction(head, body)
        if body:
            rules.append(Rule(head, tuple(body)))
        elif head not in facts:
            facts.append(head)
    _strata(tuple(rules))
    return facts, rules
