"""Parser for program (`.cml`), handler (`.hdl`) and stub (`.stubs`) files.

Grammar (precedence from loosest to tightest)::

    expr    := "fun" ID "(" ID ")" "=" expr ["in" expr]
             | "fn" ID "=>" expr
             | "let" ID "=" expr "in" expr
             | "dlet" "~"ID "=" expr "when" goal "in" expr
             | "if" expr "then" expr "else" expr
             | union
    union   := app { "∪" app }                      (also spelled "++")
    app     := atomic { atomic }
    atomic  := "()" | "(" expr ")" | "(" ID ")" "{" cases "}"
             | "#" "(" expr "," expr ")" | "#" atomic "(" expr ")"
             | "tell" "(" expr ")" | "retract" "(" expr ")"
             | "'" atom | INT | STRING | "true" | "false" | ID | "~"ID | "?"ID
    cases   := "<-" goal "." expr { [","] "<-" goal "." expr }

Goals use ``?x`` for logic variables; bare identifiers are symbols.
"""

from __future__ import annotations

import re

from .datalog import parse_atom, parse_goal_tokens
from .errors import ParseError
from .lexer import TokenStream, tokenize
from .syntax import (
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

KEYWORDS = frozenset({"fun", "fn", "let", "dlet", "in", "when", "if", "then", "else",
                      "tell", "retract", "true", "false", "not"})


class _Parser:
    def __init__(self, ts: TokenStream, stop_words=frozenset()):
        self.ts = ts
        self.stop_words = stop_words

    def ident(self) -> str:
        tok = self.ts.expect("ID")
        if tok.text in KEYWORDS:
            raise self.ts.error(f"keyword {tok.text!r} used as a name", tok)
        return tok.text

    def expr(self):
        ts = self.ts
        if ts.at_kw("fun"):
            ts.next()
            name = self.ident()
            ts.expect("OP", "(")
            param = self.ident()
            ts.expect("OP", ")")
            ts.expect("OP", "=")
            fn = Fun(name, param, self.expr())
            if ts.at_kw("in"):
                ts.next()
                return Let(name, fn, self.expr())
            return fn
        if ts.at_kw("fn"):
            ts.next()
            param = self.ident()
            ts.expect("OP", "=>")
            return Fun(None, param, self.expr())
        if ts.at_kw("let"):
            ts.next()
            name = self.ident()
            ts.expect("OP", "=")
            bound = self.expr()
            self.keyword("in")
            return Let(name, bound, self.expr())
        if ts.at_kw("dlet"):
            ts.next()
            param = ts.expect("PVAR").value
            ts.expect("OP", "=")
            bound = self.expr()
            self.keyword("when")
            goal = parse_goal_tokens(ts, bare_vars=False, stop=("in",))
            self.keyword("in")
            return Dlet(param, bound, goal, self.expr())
        if ts.at_kw("if"):
            ts.next()
            cond = self.expr()
            self.keyword("then")
            then = self.expr()
            self.keyword("else")
            return If(cond, then, self.expr())
        return self.union()

    def keyword(self, word):
        if not self.ts.at_kw(word):
            tok = self.ts.peek()
            raise self.ts.error(f"expected {word!r}, found {tok.text or 'end of input'!r}", tok)
        self.ts.next()

    def union(self):
        left = self.app()
        while self.ts.accept("OP", "∪"):
            left = Append(left, self.app())
        return left

    def starts_atomic(self) -> bool:
        tok = self.ts.peek()
        if tok.kind in ("INT", "STR", "PVAR", "QVAR"):
            return True
        if tok.kind == "ID":
            if tok.text in self.stop_words:
                return False
            return tok.text not in KEYWORDS or tok.text in ("true", "false", "tell", "retract")
        return tok.kind == "OP" and tok.text in ("(", "#", "'")

    def app(self):
        if not self.starts_atomic():
            tok = self.ts.peek()
            raise self.ts.error(f"expected an expression, found {tok.text or 'end of input'!r}", tok)
        e = self.atomic()
        while self.starts_atomic():
            e = App(e, self.atomic())
        return e

    def variation_ahead(self) -> bool:
        ts = self.ts
        return (ts.at("OP", "(") and ts.at("ID", offset=1) and ts.at("OP", ")", offset=2)
                and ts.at("OP", "{", offset=3))

    def atomic(self):
        ts = self.ts
        tok = ts.peek()
        if tok.kind == "INT" or tok.kind == "STR":
            ts.next()
            return Const(tok.value)
        if tok.kind == "PVAR":
            ts.next()
            return DynVar(tok.value)
        if tok.kind == "QVAR":
            ts.next()
            return Var("?" + tok.value)
        if tok.kind == "ID":
            if tok.text in ("true", "false"):
                ts.next()
                return TRUE if tok.text == "true" else FALSE
            if tok.text in ("tell", "retract"):
                ts.next()
                ts.expect("OP", "(")
                inner = self.expr()
                ts.expect("OP", ")")
                return Tell(inner) if tok.text == "tell" else Retract(inner)
            return Var(self.ident())
        if ts.accept("OP", "'"):
            fact = parse_atom(ts, bare_vars=False)
            if not fact.is_ground():
                raise ts.error(f"fact literal {fact} must be ground", tok)
            return FactVal(fact)
        if ts.at_op("#"):
            ts.next()
            if ts.at_op("(") and not self.variation_ahead():
                ts.next()
                fn = self.expr()
                ts.expect("OP", ",")
                arg = self.expr()
                ts.expect("OP", ")")
                return VaApp(fn, arg)
            fn = self.atomic()
            ts.expect("OP", "(")
            arg = self.expr()
            ts.expect("OP", ")")
            return VaApp(fn, arg)
        if self.variation_ahead():
            ts.next()
            param = self.ident()
            ts.expect("OP", ")")
            ts.expect("OP", "{")
            cases = [self.case()]
            while True:
                ts.accept("OP", ",")
                if ts.at_op("}"):
                    break
                cases.append(self.case())
            ts.expect("OP", "}")
            return BehVar(param, tuple(cases))
        if ts.accept("OP", "("):
            if ts.accept("OP", ")"):
                return UNIT
            inner = self.expr()
            ts.expect("OP", ")")
            return inner
        raise ts.error(f"expected an expression, found {tok.text or 'end of input'!r}", tok)

    def case(self) -> Case:
        self.ts.expect("OP", "<-")
        goal = parse_goal_tokens(self.ts, bare_vars=False, stop=(".",))
        self.ts.expect("OP", ".")
        return Case(goal, self.expr())


def parse_expr(text: str, source: str | None = None):
    ts = TokenStream(tokenize(text, source), source)
    e = _Parser(ts).expr()
    ts.expect("EOF")
    return e


def parse_handlers(text: str, source: str | None = None) -> dict:
    """Handler file: ``on EVENT => expr`` entries; an entry may continue over several lines."""
    ts = TokenStream(tokenize(text, source), source)
    parser = _Parser(ts, stop_words=frozenset({"on"}))
    table: dict = {}
    while not ts.at("EOF"):
        on = ts.peek()
        if not ts.at_kw("on"):
            raise ts.error(f"expected 'on', found {on.text!r}", on)
        ts.next()
        name = ts.expect("ID").text
        ts.expect("OP", "=>")
        if name in table:
            raise ts.error(f"duplicate handler for event {name!r}", on)
        table[name] = parser.expr()
        ts.accept("OP", ";")
    return table


_STUB_LINE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*)\s*/\s*(\d+)\s*=\s*(.+?)\s*$")


def parse_stubs(text: str, source: str | None = None) -> dict:
    """Stub file lines ``name/arity = literal``; returns name -> (arity, Const)."""
    stubs: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        m = _STUB_LINE.match(line)
        if not m:
            raise ParseError("expected `name/arity = literal`", lineno, 1, source)
        name, arity, literal = m.group(1), int(m.group(2)), m.group(3)
        if arity < 1:
            raise ParseError("stub arity must be at least 1", lineno, m.start(2) + 1, source)
        try:
            value = parse_expr(literal)
        except ParseError as exc:
            raise ParseError(exc.msg, lineno, m.start(3) + exc.column, source) from None
        if not isinstance(value, Const):
            raise ParseError("stub result must be a constant", lineno, m.start(3) + 1, source)
        stubs[name] = (arity, value)
    return stubs
