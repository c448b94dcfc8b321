"""AST node types and the canonical serializer.

Nodes compare by structure: source positions are carried for diagnostics
but excluded from equality, so parse(to_source(tree)) == tree holds for
every well-formed tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Expr = Union[
    "Literal", "Name", "Unary", "Binary", "Compare", "BoolOp",
    "Call", "Index", "PairLit", "ListLit", "MapLit",
]
Stmt = Union["Assign", "If", "While", "Return", "ExprStmt"]


@dataclass(frozen=True)
class Literal:
    value: object  # int, float, str, bool, or None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Name:
    id: str
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str  # "-", "+", "not"
    operand: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str  # "+", "-", "*", "/", "//", "%", "**"
    left: Expr
    right: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Compare:
    op: str  # "==", "!=", "<", "<=", ">", ">="
    left: Expr
    right: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and", "or"
    left: Expr
    right: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str  # builtin name, possibly dotted ("rng.randint")
    args: tuple[Expr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Index:
    obj: Expr
    index: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class PairLit:
    first: Expr
    second: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ListLit:
    items: tuple[Expr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class MapLit:
    keys: tuple[str, ...]
    values: tuple[Expr, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    # Parallel lists: one condition per branch body, plus an optional else.
    conditions: tuple[Expr, ...]
    bodies: tuple[tuple[Stmt, ...], ...]
    orelse: tuple[Stmt, ...] | None
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    condition: Expr
    body: tuple[Stmt, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    value: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ExprStmt:
    value: Expr
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Program:
    functions: tuple[FuncDef, ...]

    def function(self, name: str) -> FuncDef | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None


# Larger number binds tighter.  Comparison deliberately does not chain.
_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_CMP = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_UNARY = 7
_PREC_POW = 8
_PREC_ATOM = 9

_BIN_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL,
             "//": _PREC_MUL, "%": _PREC_MUL, "**": _PREC_POW}


def _prec(node: Expr) -> int:
    if isinstance(node, BoolOp):
        return _PREC_OR if node.op == "or" else _PREC_AND
    if isinstance(node, Unary):
        return _PREC_NOT if node.op == "not" else _PREC_UNARY
    if isinstance(node, Compare):
        return _PREC_CMP
    if isinstance(node, Binary):
        return _BIN_PREC[node.op]
    return _PREC_ATOM


def _literal_source(value: object) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{escaped}"'
    if isinstance(value, float):
        return repr(value)
    return repr(value)


def expr_source(node: Expr) -> str:
    if isinstance(node, Literal):
        return _literal_source(node.value)
    if isinstance(node, Name):
        return node.id
    if isinstance(node, Unary):
        inner = _wrap(node.operand, _prec(node), allow_equal=True)
        if node.op == "not":
            return f"not {inner}"
        return f"{node.op}{inner}"
    if isinstance(node, (Binary, Compare, BoolOp)):
        mine = _prec(node)
        if isinstance(node, Binary) and node.op == "**":
            # right-associative
            left = _wrap(node.left, mine, allow_equal=False)
            right = _wrap(node.right, mine, allow_equal=True)
        elif isinstance(node, Compare):
            # comparison does not chain, so nested comparisons need parens
            left = _wrap(node.left, mine, allow_equal=False)
            right = _wrap(node.right, mine, allow_equal=False)
        else:
            left = _wrap(node.left, mine, allow_equal=True)
            right = _wrap(node.right, mine, allow_equal=False)
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        args = ", ".join(expr_source(a) for a in node.args)
        return f"{node.func}({args})"
    if isinstance(node, Index):
        return f"{_wrap(node.obj, _PREC_ATOM, allow_equal=True)}[{expr_source(node.index)}]"
    if isinstance(node, PairLit):
        return f"({expr_source(node.first)}, {expr_source(node.second)})"
    if isinstance(node, ListLit):
        return "[" + ", ".join(expr_source(i) for i in node.items) + "]"
    if isinstance(node, MapLit):
        pairs = ", ".join(f'{_literal_source(k)}: {expr_source(v)}' for k, v in zip(node.keys, node.values))
        return "{" + pairs + "}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node: Expr, parent_prec: int, allow_equal: bool) -> str:
    text = expr_source(node)
    prec = _prec(node)
    if prec < parent_prec or (prec == parent_prec and not allow_equal):
        return f"({text})"
    return text


def _stmt_lines(node: Stmt, depth: int) -> list[str]:
    pad = "    " * depth
    if isinstance(node, Assign):
        return [f"{pad}{node.target} = {expr_source(node.value)}"]
    if isinstance(node, Return):
        return [f"{pad}return {expr_source(node.value)}"]
    if isinstance(node, ExprStmt):
        return [f"{pad}{expr_source(node.value)}"]
    if isinstance(node, While):
        lines = [f"{pad}while {expr_source(node.condition)} {{"]
        for stmt in node.body:
            lines.extend(_stmt_lines(stmt, depth + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(node, If):
        lines: list[str] = []
        for i, (cond, body) in enumerate(zip(node.conditions, node.bodies)):
            head = "if" if i == 0 else "elif"
            lines.append(f"{pad}{head} {expr_source(cond)} {{")
            for stmt in body:
                lines.extend(_stmt_lines(stmt, depth + 1))
            lines.append(f"{pad}}}")
        if node.orelse is not None:
            lines.append(f"{pad}else {{")
            for stmt in node.orelse:
                lines.extend(_stmt_lines(stmt, depth + 1))
            lines.append(f"{pad}}}")
        return lines
    raise TypeError(f"not a statement node: {node!r}")


def to_source(program: Program) -> str:
    """Render a program back to canonical source text."""
    lines: list[str] = []
    for fn in program.functions:
        params = ", ".join(fn.params)
        lines.append(f"func {fn.name}({params}) {{")
        for stmt in fn.body:
            lines.extend(_stmt_lines(stmt, 1))
        lines.append("}")
        lines.append("")
    return "\n".join(lines)
