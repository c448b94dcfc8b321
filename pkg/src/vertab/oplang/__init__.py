"""Restricted imperative language for operator generators and verifiers.

Programs are parsed to an AST and evaluated deterministically under step
and loop budgets.  There is no I/O, no imports, and no user-defined
function calls; randomness comes only from an explicitly attached
splitmix64 stream.  See docs/operator-language.md for the full grammar
and semantics reference.
"""

from .ast import Program, to_source
from .errors import (
    ArgumentError,
    DivisionByZeroError,
    EvalError,
    IntOverflowError,
    LangError,
    OpSyntaxError,
    RangeError,
    ResourceError,
    RestrictionError,
    TypeMismatchError,
    UnboundNameError,
)
from .interp import Limits, eval_function, round_half_away, values_equal
from .parser import parse_program
from .rng import RngState, derive_state, fnv1a64

__all__ = [
    "ArgumentError",
    "DivisionByZeroError",
    "EvalError",
    "IntOverflowError",
    "LangError",
    "Limits",
    "OpSyntaxError",
    "Program",
    "RangeError",
    "ResourceError",
    "RestrictionError",
    "RngState",
    "TypeMismatchError",
    "UnboundNameError",
    "derive_state",
    "eval_function",
    "fnv1a64",
    "parse_program",
    "round_half_away",
    "to_source",
    "values_equal",
]
