"""Tokenizer shared by the context (Datalog) and program parsers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import AuxFormError, ParseError


@dataclass(frozen=True)
class Token:
    kind: str  # ID, INT, STR, QVAR, PVAR, OP, EOF
    text: str
    line: int
    column: int
    value: object = None


_SYMBOLS = [
    "<<", ">>", "[[", "]]",
    "<-", ":-", ":=", "<=", ">=", "!=", "=>", "++",
    "←", "≠", "≤", "≥", "∪", "¬",
    "<", ">", "=", ".", ",", "(", ")", "{", "}", "[", "]", "#", "'", ";",
]
_NORMALIZE = {"←": "<-", ":-": "<-", "≠": "!=", "≤": "<=", "≥": ">=", "++": "∪", "¬": "not"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<int>-?\d+)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<qvar>\?[A-Za-z_][A-Za-z0-9_']*)
  | (?P<pvar>~[A-Za-z_][A-Za-z0-9_']*)
  | (?P<id>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>"""
    + "|".join(re.escape(s) for s in _SYMBOLS)
    + r""")
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def tokenize(text: str, source: str | None = None) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col, source)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "int":
            tokens.append(Token("INT", lexeme, line, col, int(lexeme)))
        elif kind == "str":
            tokens.append(Token("STR", lexeme, line, col, _unescape(lexeme[1:-1])))
        elif kind == "qvar":
            tokens.append(Token("QVAR", lexeme, line, col, lexeme[1:]))
        elif kind == "pvar":
            tokens.append(Token("PVAR", lexeme, line, col, lexeme[1:]))
        elif kind == "id":
            tokens.append(Token("ID", lexeme, line, col, lexeme))
        elif kind == "op":
            if lexeme in ("<<", ">>", "[[", "]]"):
                raise AuxFormError(
                    f"auxiliary form {lexeme!r} cannot appear in source", line, col, source
                )
            norm = _NORMALIZE.get(lexeme, lexeme)
            tokens.append(Token("ID" if norm == "not" else "OP", norm, line, col, norm))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/expect helpers."""

    def __init__(self, tokens: list[Token], source: str | None = None):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self, offset: int = 0) -> Token:
        i = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[i]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok.kind == kind and (text is None or tok.text == text)

    def at_op(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind == "OP" and tok.text in texts

    def at_kw(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "ID" and tok.text in words

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if not self.at(kind, text):
            want = repr(text) if text else kind
            got = repr(tok.text) if tok.kind != "EOF" else "end of input"
            raise self.error(f"expected {want}, found {got}", tok)
        return self.next()

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(msg, tok.line, tok.column, self.source)
