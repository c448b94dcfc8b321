"""Prompt serialization and response parsing for in-context regression.

A prompt presents raw slot columns, never engineered features: one
labelled line per context row with its target, one per query row
without, and a fixed header that asks for a JSON list of floats back.
Parsing walks the response for the first JSON array of numbers and is
deliberately tolerant of code fences and surrounding prose.

The completion backend is pluggable.  `http_transport` speaks the
common chat-completion JSON shape over HTTP; `offline_transport`
replays canned responses from a directory keyed by prompt digest, which
is what the tests and the `--offline-icl` flag use.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .errors import (
    EmptyContextError,
    EmptyQueryError,
    PredictionLengthError,
    PredictionParseError,
    SchemaError,
)
from .formatting import canonical
from .oplang.errors import RangeError

log = logging.getLogger(__name__)

# Context/query line styles.  CANONICAL is the default wire format;
# APPENDIX is the colon-and-trailing-y variant kept behind a flag.
STYLE_CANONICAL = "canonical"
STYLE_APPENDIX = "appendix"

_HEADER = (
    "You are an expert regression model. The dataset '{name}' has numeric "
    "features {cols} and target y.\n"
    "First, learn from the context rows (each line labelled CONTEXT). "
    "Then, predict y for each QUERY row.\n"
    "Return ONLY a JSON list of floats corresponding to the QUERY rows in order."
)


@dataclass(frozen=True)
class PromptBundle:
    """A serialized prompt plus the bookkeeping callers need.

    `char_count` exists so callers can enforce context-length budgets
    before anything goes over the wire.
    """

    prompt: str
    n_query: int
    dataset_name: str
    columns: tuple[str, ...]

    @property
    def char_count(self) -> int:
        return len(self.prompt)


@dataclass(frozen=True)
class CompletionClientConfig:
    """Connection settings for a chat-completion backend.

    Temperature is pinned at zero; a config asking for anything else is
    rejected outright rather than silently clamped.
    """

    endpoint: str
    model: str
    temperature: float = 0.0
    max_retries: int = 10
    timeout: float = 60.0

    def __post_init__(self):
        if self.temperature != 0:
            raise ValueError(f"temperature is fixed at 0, got {self.temperature}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be non-negative, got {self.max_retries}")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")


def _row_items(row: Mapping, columns: Sequence[str], line_no: int) -> str:
    missing = [c for c in columns if c not in row]
    if missing:
        raise SchemaError(
            f"row {line_no} is missing columns: {', '.join(missing)}"
        )
    return ", ".join(f"{c}={canonical(row[c])}" for c in columns)


def serialize_prompt(
    context_rows: Sequence[Mapping],
    query_rows: Sequence[Mapping],
    name: str,
    columns: Sequence[str],
    style: str = STYLE_CANONICAL,
) -> PromptBundle:
    """Build the fixed prompt for one problem cell.

    Context rows must carry every column plus "y"; query rows carry the
    columns and any "y" they happen to have is ignored, never printed.
    """
    if style not in (STYLE_CANONICAL, STYLE_APPENDIX):
        raise ValueError(f"unknown serialization style: {style!r}")
    if not context_rows:
        raise EmptyContextError("prompt needs at least one context row")
    if not query_rows:
        raise EmptyQueryError("prompt needs at least one query row")

    cols = tuple(columns)
    context_lines = []
    for i, row in enumerate(context_rows):
        items = _row_items(row, cols, i)
        if "y" not in row:
            raise SchemaError(f"context row {i} has no target y")
        y = canonical(row["y"])
        if style == STYLE_CANONICAL:
            context_lines.append(f"CONTEXT {items} -> y={y}")
        else:
            context_lines.append(f"CONTEXT: {items}, y={y}")

    query_lines = []
    for i, row in enumerate(query_rows):
        items = _row_items(row, cols, i)
        prefix = "QUERY" if style == STYLE_CANONICAL else "QUERY:"
        query_lines.append(f"{prefix} {items}")

    header = _HEADER.format(name=name, cols=", ".join(cols))
    prompt = "\n".join(
        [header, "", "Context rows:"]
        + context_lines
        + ["", "Query rows:"]
        + query_lines
    )
    return PromptBundle(
        prompt=prompt, n_query=len(query_rows), dataset_name=name, columns=cols
    )


def parse_predictions(response: str, expected: int) -> tuple[float, ...]:
    """Extract predictions from a model response.

    Finds the first JSON array whose elements are all numbers, skipping
    past code fences, prose, and arrays of other things.  The first such
    array must have exactly `expected` entries.
    """
    if expected < 1:
        raise RangeError(f"expected prediction count must be positive, got {expected}")
    decoder = json.JSONDecoder()
    start = response.find("[")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(response, start)
        except ValueError:
            pass
        else:
            if isinstance(value, list) and all(
                isinstance(v, (int, float)) and not isinstance(v, bool)
                for v in value
            ):
                if len(value) != expected:
                    raise PredictionLengthError(
                        f"expected {expected} predictions, found {len(value)}"
                    )
                return tuple(float(v) for v in value)
        start = response.find("[", start + 1)
    raise PredictionParseError("no JSON array of numbers in response")


# A transport takes (config, prompt) and returns the raw response text.
Transport = Callable[[CompletionClientConfig, str], str]


def http_transport(config: CompletionClientConfig, prompt: str) -> str:
    """POST a single-message chat completion and return the reply text."""
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    }
    request = urllib.request.Request(
        config.endpoint,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request, timeout=config.timeout) as reply:
        body = json.loads(reply.read().decode("utf-8"))
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise PredictionParseError("completion response has no message content")


def prompt_key(prompt: str) -> str:
    """Stable filename stem for a prompt, used by the offline store."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def store_response(directory: str | Path, prompt: str, response: str) -> Path:
    """Record a canned response for offline replay.  Returns its path."""
    path = Path(directory) / f"{prompt_key(prompt)}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(response, encoding="utf-8")
    return path


def offline_transport(directory: str | Path) -> Transport:
    """Transport that replays canned responses instead of calling out."""
    root = Path(directory)

    def replay(config: CompletionClientConfig, prompt: str) -> str:
        path = root / f"{prompt_key(prompt)}.txt"
        if not path.is_file():
            raise FileNotFoundError(
                f"no canned response for this prompt (wanted {path})"
            )
        return path.read_text(encoding="utf-8")

    return replay


def request_predictions(
    config: CompletionClientConfig,
    bundle: PromptBundle,
    transport: Transport | None = None,
    backoff: float = 0.0,
) -> tuple[float, ...]:
    """Fetch and parse predictions, retrying on transient failures.

    Makes at most `config.max_retries + 1` transport calls.  Transport
    errors and unparseable or wrong-length responses all count as
    failures; the last error is re-raised once the budget is gone.
    `backoff` seconds doubles between attempts (zero keeps tests fast).
    """
    send = transport if transport is not None else http_transport
    last: Exception | None = None
    delay = backoff
    for attempt in range(config.max_retries + 1):
        if attempt and delay:
            time.sleep(delay)
            delay *= 2
        try:
            text = send(config, bundle.prompt)
            return parse_predictions(text, bundle.n_query)
        except (PredictionParseError, PredictionLengthError, OSError) as exc:
            last = exc
            log.warning(
                "completion attempt %d/%d failed: %s",
                attempt + 1,
                config.max_retries + 1,
                exc,
            )
    assert last is not None
    raise last
