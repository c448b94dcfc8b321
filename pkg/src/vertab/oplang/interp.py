"""Tree-walking evaluator for operator programs.

Semantics in brief:

* Values are integers (signed 64-bit), floats (IEEE double), booleans,
  strings, lists, string-keyed maps, pairs, and null.  Booleans are not
  integers: ``true + 1`` is a type error and ``true == 1`` is false.
* ``/`` always yields a float.  ``//`` and ``%`` use floor semantics, so
  ``-7 // 2 == -4`` and ``-7 % 2 == 1``; with any float operand they
  yield floats the same way.
* Mixed int and float comparisons compare mathematical value exactly.
* ``round`` halves away from zero: ``round(2.5) == 3``, ``round(-2.5) == -3``.
* Evaluation is pure apart from draws on the attached random stream.
  Budgets bound total work: a step budget per function call and an
  iteration budget per loop.  Exhausting either raises ResourceError,
  so every evaluation terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import ast
from .errors import (
    ArgumentError,
    DivisionByZeroError,
    EvalError,
    IntOverflowError,
    RangeError,
    ResourceError,
    TypeMismatchError,
    UnboundNameError,
)
from .rng import RngState

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1

DEFAULT_STEP_BUDGET = 1_000_000
DEFAULT_LOOP_BUDGET = 100_000


@dataclass(frozen=True)
class Limits:
    step_budget: int = DEFAULT_STEP_BUDGET
    loop_budget: int = DEFAULT_LOOP_BUDGET


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


def _is_int(v) -> bool:
    return type(v) is int


def _is_float(v) -> bool:
    return type(v) is float


def _is_number(v) -> bool:
    return type(v) is int or type(v) is float


def type_name(v) -> str:
    if v is None:
        return "null"
    if type(v) is bool:
        return "bool"
    if type(v) is int:
        return "int"
    if type(v) is float:
        return "float"
    if type(v) is str:
        return "str"
    if type(v) is list:
        return "list"
    if type(v) is dict:
        return "map"
    if type(v) is tuple:
        return "pair"
    return type(v).__name__


def _check_int_range(value: int, line: int, col: int) -> int:
    if value < INT_MIN or value > INT_MAX:
        raise IntOverflowError("integer result exceeds 64-bit range", line, col)
    return value


def round_half_away(x):
    """Round to the nearest integer, ties away from zero."""
    if type(x) is int:
        return x
    if not math.isfinite(x):
        raise RangeError(f"cannot round {x!r}")
    if x >= 0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def values_equal(a, b) -> bool:
    """Structural equality with strict bool/number separation."""
    if (type(a) is bool) != (type(b) is bool):
        return False
    if type(a) is bool:
        return a is b
    if _is_number(a) and _is_number(b):
        return a == b  # exact mathematical comparison, no coercion loss
    if type(a) is not type(b):
        return False
    if a is None:
        return True
    if type(a) is str:
        return a == b
    if type(a) is list:
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if type(a) is tuple:
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if type(a) is dict:
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    return a == b


class _Frame:
    __slots__ = ("env", "steps", "limits", "rng")

    def __init__(self, env: dict, limits: Limits, rng: RngState | None):
        self.env = env
        self.steps = 0
        self.limits = limits
        self.rng = rng

    def tick(self, node) -> None:
        self.steps += 1
        if self.steps > self.limits.step_budget:
            raise ResourceError(
                f"step budget of {self.limits.step_budget} exhausted", node.line, node.col
            )


def eval_function(
    program: ast.Program,
    name: str,
    args: dict,
    rng: RngState | None = None,
    limits: Limits | None = None,
):
    """Evaluate one entry point with the given named arguments.

    Arguments must match the declared parameters exactly.  The returned
    value is whatever the function returns, or null if it ends without
    an explicit return.
    """
    fn = program.function(name)
    if fn is None:
        raise ArgumentError(f"program defines no function {name!r}")
    declared = set(fn.params)
    supplied = set(args)
    if declared != supplied:
        missing = sorted(declared - supplied)
        extra = sorted(supplied - declared)
        parts = []
        if missing:
            parts.append(f"missing {missing}")
        if extra:
            parts.append(f"unexpected {extra}")
        raise ArgumentError(f"{name}: arguments do not match parameters: " + ", ".join(parts))
    frame = _Frame(dict(args), limits or Limits(), rng)
    try:
        _exec_body(fn.body, frame)
    except _ReturnSignal as sig:
        return sig.value
    return None


def _exec_body(body, frame: _Frame) -> None:
    for stmt in body:
        _exec_stmt(stmt, frame)


def _exec_stmt(stmt, frame: _Frame) -> None:
    frame.tick(stmt)
    if isinstance(stmt, ast.Assign):
        frame.env[stmt.target] = _eval(stmt.value, frame)
    elif isinstance(stmt, ast.Return):
        raise _ReturnSignal(_eval(stmt.value, frame))
    elif isinstance(stmt, ast.ExprStmt):
        _eval(stmt.value, frame)
    elif isinstance(stmt, ast.If):
        for cond, body in zip(stmt.conditions, stmt.bodies):
            if _eval_condition(cond, frame):
                _exec_body(body, frame)
                return
        if stmt.orelse is not None:
            _exec_body(stmt.orelse, frame)
    elif isinstance(stmt, ast.While):
        iterations = 0
        while _eval_condition(stmt.condition, frame):
            iterations += 1
            if iterations > frame.limits.loop_budget:
                raise ResourceError(
                    f"loop budget of {frame.limits.loop_budget} exhausted", stmt.line, stmt.col
                )
            _exec_body(stmt.body, frame)
    else:
        raise EvalError(f"unknown statement node {stmt!r}")


def _eval_condition(node, frame: _Frame):
    value = _eval(node, frame)
    if type(value) is not bool:
        raise TypeMismatchError(f"condition must be a bool, got {type_name(value)}", node.line, node.col)
    return value


def _eval(node, frame: _Frame):
    frame.tick(node)
    if isinstance(node, ast.Literal):
        return node.value
    if isinstance(node, ast.Name):
        try:
            return frame.env[node.id]
        except KeyError:
            raise UnboundNameError(f"name {node.id!r} is not defined", node.line, node.col) from None
    if isinstance(node, ast.Unary):
        return _eval_unary(node, frame)
    if isinstance(node, ast.Binary):
        return _eval_binary(node, frame)
    if isinstance(node, ast.Compare):
        return _eval_compare(node, frame)
    if isinstance(node, ast.BoolOp):
        left = _eval(node.left, frame)
        if type(left) is not bool:
            raise TypeMismatchError(f"'{node.op}' needs bool operands, got {type_name(left)}", node.line, node.col)
        if node.op == "and" and not left:
            return False
        if node.op == "or" and left:
            return True
        right = _eval(node.right, frame)
        if type(right) is not bool:
            raise TypeMismatchError(f"'{node.op}' needs bool operands, got {type_name(right)}", node.line, node.col)
        return right
    if isinstance(node, ast.Call):
        args = [_eval(a, frame) for a in node.args]
        return _call_builtin(node, args, frame)
    if isinstance(node, ast.Index):
        return _eval_index(node, frame)
    if isinstance(node, ast.PairLit):
        return (_eval(node.first, frame), _eval(node.second, frame))
    if isinstance(node, ast.ListLit):
        return [_eval(item, frame) for item in node.items]
    if isinstance(node, ast.MapLit):
        return {k: _eval(v, frame) for k, v in zip(node.keys, node.values)}
    raise EvalError(f"unknown expression node {node!r}")


def _eval_unary(node: ast.Unary, frame: _Frame):
    value = _eval(node.operand, frame)
    if node.op == "not":
        if type(value) is not bool:
            raise TypeMismatchError(f"'not' needs a bool, got {type_name(value)}", node.line, node.col)
        return not value
    if not _is_number(value):
        raise TypeMismatchError(f"unary {node.op!r} needs a number, got {type_name(value)}", node.line, node.col)
    if node.op == "-":
        result = -value
        if _is_int(result):
            _check_int_range(result, node.line, node.col)
        return result
    return value


def _eval_binary(node: ast.Binary, frame: _Frame):
    left = _eval(node.left, frame)
    right = _eval(node.right, frame)
    op = node.op
    if not _is_number(left) or not _is_number(right):
        raise TypeMismatchError(
            f"'{op}' needs numbers, got {type_name(left)} and {type_name(right)}", node.line, node.col
        )
    if op == "+":
        result = left + right
    elif op == "-":
        result = left - right
    elif op == "*":
        result = left * right
    elif op == "/":
        if right == 0:
            raise DivisionByZeroError("division by zero", node.line, node.col)
        result = left / right
        if not math.isfinite(result):
            raise RangeError(f"float result is {result!r}", node.line, node.col)
        return result
    elif op == "//":
        if right == 0:
            raise DivisionByZeroError("floor division by zero", node.line, node.col)
        result = left // right
        if _is_float(result) and not math.isfinite(result):
            raise RangeError("floor division overflowed", node.line, node.col)
    elif op == "%":
        if right == 0:
            raise DivisionByZeroError("modulo by zero", node.line, node.col)
        result = left % right
    elif op == "**":
        return _eval_power(left, right, node)
    else:
        raise EvalError(f"unknown operator {op!r}", node.line, node.col)
    if _is_int(result):
        _check_int_range(result, node.line, node.col)
    elif not math.isfinite(result):
        raise RangeError(f"float result is {result!r}", node.line, node.col)
    return result


def _eval_power(left, right, node: ast.Binary):
    if _is_int(left) and _is_int(right):
        if right >= 0:
            if abs(left) > 1 and right > 63:
                raise IntOverflowError("integer result exceeds 64-bit range", node.line, node.col)
            return _check_int_range(left ** right, node.line, node.col)
        if left == 0:
            raise DivisionByZeroError("zero to a negative power", node.line, node.col)
        return float(left) ** right
    if left == 0 and right < 0:
        raise DivisionByZeroError("zero to a negative power", node.line, node.col)
    try:
        result = left ** right
    except OverflowError:
        raise RangeError("float power overflowed", node.line, node.col) from None
    if isinstance(result, complex):
        raise RangeError("negative base with fractional exponent", node.line, node.col)
    if not math.isfinite(result):
        raise RangeError(f"float result is {result!r}", node.line, node.col)
    return result


def _eval_compare(node: ast.Compare, frame: _Frame):
    left = _eval(node.left, frame)
    right = _eval(node.right, frame)
    op = node.op
    if op == "==":
        return values_equal(left, right)
    if op == "!=":
        return not values_equal(left, right)
    both_numbers = _is_number(left) and _is_number(right)
    both_strings = type(left) is str and type(right) is str
    if not (both_numbers or both_strings):
        raise TypeMismatchError(
            f"'{op}' cannot order {type_name(left)} and {type_name(right)}", node.line, node.col
        )
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def _eval_index(node: ast.Index, frame: _Frame):
    obj = _eval(node.obj, frame)
    key = _eval(node.index, frame)
    if type(obj) is dict:
        if type(key) is not str:
            raise TypeMismatchError(f"map keys are strings, got {type_name(key)}", node.line, node.col)
        if key not in obj:
            raise RangeError(f"map has no key {key!r}", node.line, node.col)
        return obj[key]
    if type(obj) is list:
        if not _is_int(key):
            raise TypeMismatchError(f"list index must be an int, got {type_name(key)}", node.line, node.col)
        if key < 0 or key >= len(obj):
            raise RangeError(f"list index {key} out of range", node.line, node.col)
        return obj[key]
    raise TypeMismatchError(f"{type_name(obj)} is not indexable", node.line, node.col)


# builtin implementations


def _need_number(value, what: str, node) -> None:
    if not _is_number(value):
        raise TypeMismatchError(f"{what} needs a number, got {type_name(value)}", node.line, node.col)


def _need_int(value, what: str, node) -> None:
    if not _is_int(value):
        raise TypeMismatchError(f"{what} needs an int, got {type_name(value)}", node.line, node.col)


def _builtin_abs(args, node, frame):
    (x,) = args
    _need_number(x, "abs", node)
    result = abs(x)
    if _is_int(result):
        _check_int_range(result, node.line, node.col)
    return result


def _builtin_min(args, node, frame):
    return _extreme(args, node, min)


def _builtin_max(args, node, frame):
    return _extreme(args, node, max)


def _extreme(args, node, fn: Callable):
    if len(args) == 1 and type(args[0]) is list:
        args = args[0]
        if not args:
            raise RangeError("empty list has no extreme", node.line, node.col)
    for a in args:
        _need_number(a, fn.__name__, node)
    return fn(args)


def _builtin_round(args, node, frame):
    (x,) = args
    _need_number(x, "round", node)
    result = round_half_away(x)
    return _check_int_range(result, node.line, node.col)


def _builtin_int(args, node, frame):
    (x,) = args
    _need_number(x, "int", node)
    if _is_int(x):
        return x
    if not math.isfinite(x):
        raise RangeError(f"cannot convert {x!r} to int", node.line, node.col)
    return _check_int_range(int(x), node.line, node.col)


def _builtin_float(args, node, frame):
    (x,) = args
    _need_number(x, "float", node)
    return float(x)


def _builtin_len(args, node, frame):
    (x,) = args
    if type(x) in (str, list, dict):
        return len(x)
    raise TypeMismatchError(f"len needs a string, list, or map, got {type_name(x)}", node.line, node.col)


def _builtin_floor(args, node, frame):
    (x,) = args
    _need_number(x, "math.floor", node)
    if _is_float(x) and not math.isfinite(x):
        raise RangeError(f"cannot floor {x!r}", node.line, node.col)
    return _check_int_range(math.floor(x), node.line, node.col)


def _builtin_ceil(args, node, frame):
    (x,) = args
    _need_number(x, "math.ceil", node)
    if _is_float(x) and not math.isfinite(x):
        raise RangeError(f"cannot ceil {x!r}", node.line, node.col)
    return _check_int_range(math.ceil(x), node.line, node.col)


def _builtin_gcd(args, node, frame):
    a, b = args
    _need_int(a, "math.gcd", node)
    _need_int(b, "math.gcd", node)
    return _check_int_range(math.gcd(a, b), node.line, node.col)


def _builtin_lcm(args, node, frame):
    a, b = args
    _need_int(a, "math.lcm", node)
    _need_int(b, "math.lcm", node)
    return _check_int_range(math.lcm(a, b), node.line, node.col)


def _rng_of(frame: _Frame, node) -> RngState:
    if frame.rng is None:
        raise ArgumentError("no random stream attached to this evaluation", node.line, node.col)
    return frame.rng


def _builtin_randint(args, node, frame):
    lo, hi = args
    try:
        return _rng_of(frame, node).randint(lo, hi)
    except (TypeMismatchError, RangeError) as err:
        raise type(err)(err.message, node.line, node.col) from None


def _builtin_uniform(args, node, frame):
    a, b = args
    try:
        return _rng_of(frame, node).uniform(a, b)
    except (TypeMismatchError, RangeError) as err:
        raise type(err)(err.message, node.line, node.col) from None


def _builtin_choice(args, node, frame):
    (seq,) = args
    try:
        return _rng_of(frame, node).choice(seq)
    except (TypeMismatchError, RangeError) as err:
        raise type(err)(err.message, node.line, node.col) from None


_BUILTINS: dict[str, tuple[Callable, int | None]] = {
    # name: (impl, arity or None for variadic)
    "abs": (_builtin_abs, 1),
    "min": (_builtin_min, None),
    "max": (_builtin_max, None),
    "round": (_builtin_round, 1),
    "int": (_builtin_int, 1),
    "float": (_builtin_float, 1),
    "len": (_builtin_len, 1),
    "math.floor": (_builtin_floor, 1),
    "math.ceil": (_builtin_ceil, 1),
    "math.gcd": (_builtin_gcd, 2),
    "math.lcm": (_builtin_lcm, 2),
    "rng.randint": (_builtin_randint, 2),
    "rng.uniform": (_builtin_uniform, 2),
    "rng.choice": (_builtin_choice, 1),
}


def _call_builtin(node: ast.Call, args: list, frame: _Frame):
    impl, arity = _BUILTINS[node.func]
    if arity is not None and len(args) != arity:
        raise ArgumentError(
            f"{node.func} takes {arity} argument{'s' if arity != 1 else ''}, got {len(args)}",
            node.line, node.col,
        )
    if arity is None and not args:
        raise ArgumentError(f"{node.func} takes at least one argument", node.line, node.col)
    return impl(args, node, frame)
