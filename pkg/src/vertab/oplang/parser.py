"""Recursive-descent parser for the operator language.

Grammar sketch (statements are newline-terminated, blocks brace-delimited):

    program    : funcdef+
    funcdef    : "func" NAME "(" [NAME ("," NAME)*] ")" block
    block      : "{" stmt* "}"
    stmt       : NAME "=" expr | "if" ... | "while" expr block
               | "return" expr | expr
    expr       : or_expr
    or_expr    : and_expr ("or" and_expr)*
    and_expr   : not_expr ("and" not_expr)*
    not_expr   : "not" not_expr | comparison
    comparison : arith [("=="|"!="|"<"|"<="|">"|">=") arith]
    arith      : term (("+"|"-") term)*
    term       : unary (("*"|"/"|"//"|"%") unary)*
    unary      : ("-"|"+") unary | power
    power      : postfix ["**" unary]
    postfix    : atom ("[" expr "]")*
    atom       : literal | list | map | NAME | call
               | "(" expr ")" | "(" expr "," expr ")"

Only the two operator entry points may be defined, and only builtins may
be called, so a parsed program is flat and recursion-free by construction.
"""

from __future__ import annotations

from typing import Final

from . import ast
from .errors import OpSyntaxError, RestrictionError
from .lexer import Token, tokenize

BUILTIN_NAMES: Final = frozenset(
    [
        "rng.randint", "rng.uniform", "rng.choice",
        "math.gcd", "math.lcm", "math.floor", "math.ceil",
        "abs", "min", "max", "round", "int", "float", "len",
    ]
)

_IO_NAMES: Final = frozenset(["print", "input", "open", "read", "write", "eval", "exec"])

_COMPARISON_OPS: Final = ("==", "!=", "<", "<=", ">", ">=")

ENTRY_POINTS: Final = frozenset(["generator", "verifier"])


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # token plumbing

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def expect(self, type_: str) -> Token:
        tok = self.peek()
        if tok.type != type_:
            raise OpSyntaxError(f"expected {type_!r}, found {self._describe(tok)}", tok.line, tok.col)
        return self.advance()

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.type in ("NAME", "INT", "FLOAT", "STRING"):
            return f"{tok.type} {tok.value!r}"
        return repr(tok.type)

    def skip_newlines(self) -> None:
        while self.peek().type == "NEWLINE":
            self.advance()

    def _peek_past_newlines(self) -> Token:
        i = self.pos
        while self.tokens[i].type == "NEWLINE":
            i += 1
        return self.tokens[i]

    # declarations

    def parse_program(self) -> ast.Program:
        functions: list[ast.FuncDef] = []
        self.skip_newlines()
        while self.peek().type != "EOF":
            functions.append(self.parse_funcdef())
            self.skip_newlines()
        if not functions:
            raise OpSyntaxError("program defines no functions", 1, 1)
        seen: set[str] = set()
        for fn in functions:
            if fn.name not in ENTRY_POINTS:
                raise RestrictionError(
                    f"only 'generator' and 'verifier' may be defined, not {fn.name!r}", fn.line, fn.col
                )
            if fn.name in seen:
                raise OpSyntaxError(f"duplicate function {fn.name!r}", fn.line, fn.col)
            seen.add(fn.name)
        return ast.Program(functions=tuple(functions))

    def parse_funcdef(self) -> ast.FuncDef:
        head = self.expect("func")
        name_tok = self.expect("NAME")
        self.expect("(")
        params: list[str] = []
        if self.peek().type != ")":
            params.append(self.expect("NAME").value)
            while self.peek().type == ",":
                self.advance()
                params.append(self.expect("NAME").value)
        self.expect(")")
        if len(set(params)) != len(params):
            raise OpSyntaxError(f"duplicate parameter in {name_tok.value!r}", head.line, head.col)
        body = self.parse_block()
        return ast.FuncDef(
            name=name_tok.value, params=tuple(params), body=body, line=head.line, col=head.col
        )

    # statements

    def parse_block(self) -> tuple[ast.Stmt, ...]:
        self.expect("{")
        self.skip_newlines()
        stmts: list[ast.Stmt] = []
        while self.peek().type != "}":
            stmts.append(self.parse_statement())
            self.skip_newlines()
        self.expect("}")
        return tuple(stmts)

    def parse_statement(self) -> ast.Stmt:
        tok = self.peek()
        if tok.type == "if":
            return self.parse_if()
        if tok.type == "while":
            return self.parse_while()
        if tok.type == "return":
            self.advance()
            value = self.parse_expression()
            self._end_statement()
            return ast.Return(value=value, line=tok.line, col=tok.col)
        if tok.type == "NAME" and self.peek(1).type == "=":
            self.advance()
            self.advance()
            value = self.parse_expression()
            self._end_statement()
            return ast.Assign(target=tok.value, value=value, line=tok.line, col=tok.col)
        value = self.parse_expression()
        self._end_statement()
        return ast.ExprStmt(value=value, line=tok.line, col=tok.col)

    def _end_statement(self) -> None:
        tok = self.peek()
        if tok.type == "}":
            return  # closing brace may follow the last statement directly
        if tok.type in _COMPARISON_OPS:
            raise OpSyntaxError("comparisons do not chain", tok.line, tok.col)
        if tok.type == "EOF":
            return
        if tok.type != "NEWLINE":
            raise OpSyntaxError(f"unexpected {self._describe(tok)} after statement", tok.line, tok.col)
        self.advance()

    def parse_if(self) -> ast.If:
        head = self.expect("if")
        conditions = [self.parse_expression()]
        bodies = [self.parse_block()]
        orelse: tuple[ast.Stmt, ...] | None = None
        while True:
            nxt = self._peek_past_newlines()
            if nxt.type == "elif":
                self.skip_newlines()
                self.advance()
                conditions.append(self.parse_expression())
                bodies.append(self.parse_block())
            elif nxt.type == "else":
                self.skip_newlines()
                self.advance()
                orelse = self.parse_block()
                break
            else:
                break
        return ast.If(
            conditions=tuple(conditions), bodies=tuple(bodies), orelse=orelse,
            line=head.line, col=head.col,
        )

    def parse_while(self) -> ast.While:
        head = self.expect("while")
        condition = self.parse_expression()
        body = self.parse_block()
        return ast.While(condition=condition, body=body, line=head.line, col=head.col)

    # expressions, loosest binding first

    def parse_expression(self) -> ast.Expr:
        return self.parse_or()

    def parse_or(self) -> ast.Expr:
        node = self.parse_and()
        while self.peek().type == "or":
            tok = self.advance()
            node = ast.BoolOp(op="or", left=node, right=self.parse_and(), line=tok.line, col=tok.col)
        return node

    def parse_and(self) -> ast.Expr:
        node = self.parse_not()
        while self.peek().type == "and":
            tok = self.advance()
            node = ast.BoolOp(op="and", left=node, right=self.parse_not(), line=tok.line, col=tok.col)
        return node

    def parse_not(self) -> ast.Expr:
        if self.peek().type == "not":
            tok = self.advance()
            return ast.Unary(op="not", operand=self.parse_not(), line=tok.line, col=tok.col)
        return self.parse_comparison()

    def parse_comparison(self) -> ast.Expr:
        node = self.parse_arith()
        if self.peek().type in _COMPARISON_OPS:
            tok = self.advance()
            right = self.parse_arith()
            node = ast.Compare(op=tok.type, left=node, right=right, line=tok.line, col=tok.col)
        return node

    def parse_arith(self) -> ast.Expr:
        node = self.parse_term()
        while self.peek().type in ("+", "-"):
            tok = self.advance()
            node = ast.Binary(op=tok.type, left=node, right=self.parse_term(), line=tok.line, col=tok.col)
        return node

    def parse_term(self) -> ast.Expr:
        node = self.parse_unary()
        while self.peek().type in ("*", "/", "//", "%"):
            tok = self.advance()
            node = ast.Binary(op=tok.type, left=node, right=self.parse_unary(), line=tok.line, col=tok.col)
        return node

    def parse_unary(self) -> ast.Expr:
        if self.peek().type in ("-", "+"):
            tok = self.advance()
            return ast.Unary(op=tok.type, operand=self.parse_unary(), line=tok.line, col=tok.col)
        return self.parse_power()

    def parse_power(self) -> ast.Expr:
        node = self.parse_postfix()
        if self.peek().type == "**":
            tok = self.advance()
            right = self.parse_unary()  # right-associative, allows -n exponents
            node = ast.Binary(op="**", left=node, right=right, line=tok.line, col=tok.col)
        return node

    def parse_postfix(self) -> ast.Expr:
        node = self.parse_atom()
        while self.peek().type == "[":
            tok = self.advance()
            index = self.parse_expression()
            self.expect("]")
            node = ast.Index(obj=node, index=index, line=tok.line, col=tok.col)
        return node

    def parse_atom(self) -> ast.Expr:
        tok = self.peek()
        if tok.type == "INT" or tok.type == "FLOAT" or tok.type == "STRING":
            self.advance()
            return ast.Literal(value=tok.value, line=tok.line, col=tok.col)
        if tok.type == "true":
            self.advance()
            return ast.Literal(value=True, line=tok.line, col=tok.col)
        if tok.type == "false":
            self.advance()
            return ast.Literal(value=False, line=tok.line, col=tok.col)
        if tok.type == "null":
            self.advance()
            return ast.Literal(value=None, line=tok.line, col=tok.col)
        if tok.type == "NAME":
            return self.parse_name_or_call()
        if tok.type == "(":
            self.advance()
            first = self.parse_expression()
            if self.peek().type == ",":
                self.advance()
                second = self.parse_expression()
                self.expect(")")
                return ast.PairLit(first=first, second=second, line=tok.line, col=tok.col)
            self.expect(")")
            return first
        if tok.type == "[":
            self.advance()
            items: list[ast.Expr] = []
            if self.peek().type != "]":
                items.append(self.parse_expression())
                while self.peek().type == ",":
                    self.advance()
                    items.append(self.parse_expression())
            self.expect("]")
            return ast.ListLit(items=tuple(items), line=tok.line, col=tok.col)
        if tok.type == "{":
            return self.parse_map()
        raise OpSyntaxError(f"unexpected {self._describe(tok)}", tok.line, tok.col)

    def parse_map(self) -> ast.MapLit:
        head = self.expect("{")
        keys: list[str] = []
        values: list[ast.Expr] = []
        if self.peek().type != "}":
            while True:
                key_tok = self.expect("STRING")
                self.expect(":")
                keys.append(key_tok.value)
                values.append(self.parse_expression())
                if self.peek().type != ",":
                    break
                self.advance()
        self.expect("}")
        if len(set(keys)) != len(keys):
            raise OpSyntaxError("duplicate key in map literal", head.line, head.col)
        return ast.MapLit(keys=tuple(keys), values=tuple(values), line=head.line, col=head.col)

    def parse_name_or_call(self) -> ast.Expr:
        tok = self.expect("NAME")
        name = tok.value
        if self.peek().type == ".":
            self.advance()
            attr = self.expect("NAME")
            dotted = f"{name}.{attr.value}"
            if self.peek().type != "(":
                raise OpSyntaxError(f"builtin reference {dotted!r} must be called", tok.line, tok.col)
            return self.parse_call(dotted, tok)
        if self.peek().type == "(":
            return self.parse_call(name, tok)
        return ast.Name(id=name, line=tok.line, col=tok.col)

    def parse_call(self, func: str, tok: Token) -> ast.Call:
        if func in ENTRY_POINTS:
            raise RestrictionError(
                f"calls to {func!r} are not allowed: programs are flat and recursion-free",
                tok.line, tok.col,
            )
        if func not in BUILTIN_NAMES:
            hint = "I/O is not available" if func in _IO_NAMES else "only builtins may be called"
            raise RestrictionError(f"unknown function {func!r}: {hint}", tok.line, tok.col)
        self.expect("(")
        args: list[ast.Expr] = []
        if self.peek().type != ")":
            args.append(self.parse_expression())
            while self.peek().type == ",":
                self.advance()
                args.append(self.parse_expression())
        self.expect(")")
        return ast.Call(func=func, args=tuple(args), line=tok.line, col=tok.col)


def parse_program(source: str) -> ast.Program:
    """Parse operator source text into a Program."""
    return Parser(tokenize(source)).parse_program()
