"""Error types raised by the operator language front end and interpreter.

Every failure mode maps to a distinct class so callers can report precise
diagnostics without string matching.  Errors raised during lexing, parsing,
or evaluation carry the source position (1-based line and column) whenever
one is known.
"""

from __future__ import annotations


class LangError(Exception):
    """Base class for all operator-language errors."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(self._format())

    def _format(self) -> str:
        if self.line is not None:
            return f"{self.message} (line {self.line}, col {self.col})"
        return self.message


class OpSyntaxError(LangError):
    """Source text does not conform to the grammar."""


class RestrictionError(OpSyntaxError):
    """Source uses a construct the language deliberately forbids.

    Imports, I/O, user-defined function calls, recursion, and function
    definitions other than ``generator`` and ``verifier`` all land here.
    """


class EvalError(LangError):
    """Base class for runtime failures."""


class ResourceError(EvalError):
    """A step or loop budget was exhausted."""


class TypeMismatchError(EvalError):
    """An operator or builtin was applied to values of the wrong type."""


class DivisionByZeroError(EvalError):
    """Division, floor division, or modulo by zero."""


class UnboundNameError(EvalError):
    """A variable was read before assignment."""


class ArgumentError(EvalError):
    """A function call did not supply the declared parameters."""


class RangeError(EvalError):
    """A builtin received arguments outside its domain, e.g. randint(5, 2)."""


class IntOverflowError(EvalError):
    """An integer result left the signed 64-bit range."""
