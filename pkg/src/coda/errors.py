"""Exception hierarchy shared by every layer of the interpreter."""


class CodaError(Exception):
    pass


class ParseError(CodaError, SyntaxError):
    """Malformed source text; carries a 1-based line and column."""

    def __init__(self, msg, line=0, column=0, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {msg}")
        self.msg = msg
        self.lineno = line
        self.offset = column
        self.filename = source

    def __str__(self):
        where = f"{self.source}:" if self.source else ""
        return f"{where}{self.line}:{self.column}: {self.msg}"


class AuxFormError(ParseError):
    """Source text tried to spell a runtime-only form (checkpoint or overline)."""


class RangeRestrictionError(CodaError):
    def __init__(self, variable, clause=None):
        self.variable = variable
        self.clause = clause
        detail = f" in {clause}" if clause is not None else ""
        super().__init__(f"variable {variable!r} does not occur in a positive body atom{detail}")


class CyclicNegationError(CodaError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("program is not stratifiable; negation through cycle " + " -> ".join(self.cycle))


class UnboundConstraintError(CodaError):
    pass


class FreeVarError(CodaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"free variable {name!r}")


class LinkError(CodaError):
    pass
