"""Deterministic random streams for operator programs.

The engine never touches the host RNG.  Every stream is a splitmix64
sequence whose initial state is derived by hashing an (operator id,
purpose, seed) triple with 64-bit FNV-1a, optionally extended with a
counter so high-volume callers (synthesis attempts, per-tree seeds) get
independent streams that do not depend on evaluation order.

splitmix64 reference outputs from state 0:
    0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Final, Sequence

from .errors import RangeError, TypeMismatchError

MASK64: Final = (1 << 64) - 1
_GOLDEN: Final = 0x9E3779B97F4A7C15
_MIX1: Final = 0xBF58476D1CE4E5B9
_MIX2: Final = 0x94D049BB133111EB

_FNV_BASIS: Final = 0xCBF29CE484222325
_FNV_PRIME: Final = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_BASIS
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & MASK64
    return h


def derive_state(operator_id: str, purpose: str, seed: int, counter: int | None = None) -> int:
    """Initial splitmix64 state for a named stream.

    The triple is hashed as UTF-8 operator id, NUL, UTF-8 purpose tag, NUL,
    then the seed as 8 little-endian bytes; a counter, when given, appends
    8 more bytes.  The NUL separators keep ("ab", "c") and ("a", "bc")
    distinct.
    """
    blob = operator_id.encode("utf-8") + b"\x00" + purpose.encode("utf-8") + b"\x00"
    blob += (seed & MASK64).to_bytes(8, "little")
    if counter is not None:
        blob += (counter & MASK64).to_bytes(8, "little")
    return fnv1a64(blob)


@dataclass
class RngState:
    """A single splitmix64 stream."""

    state: int

    @classmethod
    def derive(cls, operator_id: str, purpose: str, seed: int, counter: int | None = None) -> "RngState":
        return cls(derive_state(operator_id, purpose, seed, counter))

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive.

        Uses rejection sampling on the top of the 64-bit range so no
        residue class is favoured.
        """
        if type(lo) is not int or type(hi) is not int:
            raise TypeMismatchError("randint expects integer bounds")
        if lo > hi:
            raise RangeError(f"randint: empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            u = self.next_u64()
            if u < limit:
                return lo + (u % span)

    def uniform(self, a: float, b: float) -> float:
        """Uniform float in the half-open interval [a, b)."""
        if type(a) is bool or type(b) is bool or not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
            raise TypeMismatchError("uniform expects numeric bounds")
        if not a < b:
            raise RangeError(f"uniform: empty interval [{a}, {b})")
        # 53 high bits give the usual dyadic rationals in [0, 1)
        frac = (self.next_u64() >> 11) * (2.0 ** -53)
        return a + (b - a) * frac

    def choice(self, seq: Sequence):
        if not isinstance(seq, list):
            raise TypeMismatchError("choice expects a list")
        if not seq:
            raise RangeError("choice: empty list")
        return seq[self.randint(0, len(seq) - 1)]
