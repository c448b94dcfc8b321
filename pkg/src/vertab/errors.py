"""Pipeline-level error types shared across modules."""

from __future__ import annotations


class VertabError(Exception):
    """Base class for engine errors outside the operator language."""


class SchemaError(VertabError):
    """A document or matrix does not match its declared shape."""


class SlotMismatchError(SchemaError):
    """Slot names disagree between templates, slots, base assignment,
    verifier parameters, or generator output.  Carries the offenders."""

    def __init__(self, message: str, offending: list[str] | None = None):
        self.offending = sorted(offending or [])
        if self.offending:
            message = f"{message}: {', '.join(self.offending)}"
        super().__init__(message)


class ExhaustionError(VertabError):
    """The synthesis attempt budget ran out before enough unique verified
    rows were collected."""


class EmptyContextError(VertabError):
    """A split left no context rows to fit on."""


class EmptyQueryError(VertabError):
    """A prompt was requested with no query rows to predict."""


class LengthMismatchError(VertabError):
    """Two vectors that must align have different lengths."""


class PredictionParseError(VertabError):
    """No JSON array of numbers could be found in a model response."""


class PredictionLengthError(VertabError):
    """A parsed prediction array has the wrong number of entries."""
