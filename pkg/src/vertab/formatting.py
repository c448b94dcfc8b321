"""Canonical value formatting shared by CSV output, text rendering,
deduplication keys, and prompt serialization.

Integers print in plain decimal.  Floats print in the shortest form that
round-trips back to the same double, which is exactly what repr gives us
on Python 3.  Strings pass through unchanged.
"""

from __future__ import annotations


def canonical(value) -> str:
    if type(value) is bool:
        return "true" if value else "false"
    if type(value) is int:
        return str(value)
    if type(value) is float:
        return repr(value)
    if type(value) is str:
        return value
    raise TypeError(f"no canonical form for {type(value).__name__}")
