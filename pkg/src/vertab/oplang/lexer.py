"""Tokenizer for the operator language.

The language is line-oriented: statements end at a newline, blocks are
brace-delimited.  Newlines inside parentheses and square brackets are
ignored so long argument lists can wrap; braces never suppress newlines
because they delimit both blocks and map literals.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Final

from .errors import OpSyntaxError, RestrictionError

KEYWORDS: Final = frozenset(
    ["func", "return", "if", "elif", "else", "while", "and", "or", "not", "true", "false", "null"]
)

# Recognized so they fail with a pointed message instead of a generic
# syntax error.  None of these constructs exist in the language.
FORBIDDEN_KEYWORDS: Final = frozenset(
    [
        "import", "from", "def", "class", "lambda", "for", "in", "is",
        "try", "except", "finally", "raise", "with", "as", "global",
        "nonlocal", "yield", "assert", "del", "pass", "break", "continue",
    ]
)

_TWO_CHAR_OPS: Final = ("**", "//", "<=", ">=", "==", "!=")
_ONE_CHAR_OPS: Final = "+-*/%<>=(){}[],:."


@dataclass(frozen=True)
class Token:
    type: str  # NAME, INT, FLOAT, STRING, NEWLINE, EOF, or the operator text
    value: object
    line: int
    col: int


class Lexer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 1
        self.paren_depth = 0  # ( and [ only

    def error(self, message: str) -> OpSyntaxError:
        return OpSyntaxError(message, self.line, self.col)

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        while self.pos < len(self.source):
            ch = self.source[self.pos]
            if ch in " \t\r":
                self._advance()
            elif ch == "#":
                while self.pos < len(self.source) and self.source[self.pos] != "\n":
                    self._advance()
            elif ch == "\n":
                if self.paren_depth == 0 and out and out[-1].type != "NEWLINE":
                    out.append(Token("NEWLINE", None, self.line, self.col))
                self._advance_newline()
            elif ch.isdigit():
                out.append(self._number())
            elif ch == '"':
                out.append(self._string())
            elif ch.isalpha() or ch == "_":
                out.append(self._name())
            else:
                out.append(self._operator())
        if out and out[-1].type != "NEWLINE":
            out.append(Token("NEWLINE", None, self.line, self.col))
        out.append(Token("EOF", None, self.line, self.col))
        return out

    def _advance(self) -> None:
        self.pos += 1
        self.col += 1

    def _advance_newline(self) -> None:
        self.pos += 1
        self.line += 1
        self.col = 1

    def _number(self) -> Token:
        start = self.pos
        line, col = self.line, self.col
        while self.pos < len(self.source) and self.source[self.pos].isdigit():
            self._advance()
        is_float = False
        if self.pos < len(self.source) and self.source[self.pos] == ".":
            nxt = self.source[self.pos + 1] if self.pos + 1 < len(self.source) else ""
            if not nxt.isdigit():
                raise self.error("expected digits after decimal point")
            is_float = True
            self._advance()
            while self.pos < len(self.source) and self.source[self.pos].isdigit():
                self._advance()
        if self.pos < len(self.source) and self.source[self.pos] in "eE":
            mark = self.pos
            self._advance()
            if self.pos < len(self.source) and self.source[self.pos] in "+-":
                self._advance()
            if self.pos < len(self.source) and self.source[self.pos].isdigit():
                is_float = True
                while self.pos < len(self.source) and self.source[self.pos].isdigit():
                    self._advance()
            else:
                #, e.g. "12e" followed by a name: rewind, let the name lexer complain
                self.pos = mark
                self.col -= 0
        text = self.source[start:self.pos]
        if is_float:
            return Token("FLOAT", float(text), line, col)
        return Token("INT", int(text), line, col)

    def _string(self) -> Token:
        line, col = self.line, self.col
        self._advance()  # opening quote
        parts: list[str] = []
        while True:
            if self.pos >= len(self.source):
                raise OpSyntaxError("unterminated string", line, col)
            ch = self.source[self.pos]
            if ch == "\n":
                raise OpSyntaxError("unterminated string", line, col)
            if ch == '"':
                self._advance()
                break
            if ch == "\\":
                self._advance()
                if self.pos >= len(self.source):
                    raise OpSyntaxError("unterminated string", line, col)
                esc = self.source[self.pos]
                mapped = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc)
                if mapped is None:
                    raise self.error(f"unknown escape \\{esc}")
                parts.append(mapped)
                self._advance()
            else:
                parts.append(ch)
                self._advance()
        return Token("STRING", "".join(parts), line, col)

    def _name(self) -> Token:
        start = self.pos
        line, col = self.line, self.col
        while self.pos < len(self.source) and (self.source[self.pos].isalnum() or self.source[self.pos] == "_"):
            self._advance()
        text = self.source[start:self.pos]
        if text in FORBIDDEN_KEYWORDS:
            raise RestrictionError(f"'{text}' is not part of the operator language", line, col)
        if text in KEYWORDS:
            return Token(text, text, line, col)
        return Token("NAME", text, line, col)

    def _operator(self) -> Token:
        line, col = self.line, self.col
        two = self.source[self.pos:self.pos + 2]
        if two in _TWO_CHAR_OPS:
            self._advance()
            self._advance()
            return Token(two, two, line, col)
        ch = self.source[self.pos]
        if ch in _ONE_CHAR_OPS:
            if ch in "([":
                self.paren_depth += 1
            elif ch in ")]":
                self.paren_depth = max(0, self.paren_depth - 1)
            self._advance()
            return Token(ch, ch, line, col)
        raise self.error(f"unexpected character {ch!r}")


def tokenize(source: str) -> list[Token]:
    return Lexer(source).tokens()
