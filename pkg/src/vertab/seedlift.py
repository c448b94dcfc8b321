"""Compiling one worked problem into an operator document.

The compiler itself is pluggable: anything that maps a (system, user)
prompt pair to response text.  This module owns the prompt assembly,
the validation loop, and the retry feedback, so a real LLM backend
plugs in from outside and the whole path stays testable offline.

A candidate document is accepted only when it parses as JSON, loads as
an operator, reproduces the seed answer through its verifier, and
survives a generator check.  Anything less feeds a diagnostic list back
into the next attempt's prompt.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Callable

from .errors import SchemaError, VertabError
from .opspec import OperatorSpec, check_generator, gold_matches, load_spec, verify_base

# (system prompt, user prompt) -> response text
Compiler = Callable[[str, str], str]

_ASSET = "seed_lifting.txt"
_SECTIONS = ("SYSTEM", "USER", "RETRY")


class SeedLiftError(VertabError):
    """No candidate document survived validation within the attempt budget."""


def _load_asset() -> str:
    return (resources.files("vertab") / "prompts" / _ASSET).read_text(encoding="utf-8")


def prompt_sections() -> dict[str, str]:
    """The prompt asset split into its SYSTEM, USER, and RETRY parts."""
    text = _load_asset()
    sections: dict[str, str] = {}
    current = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("=== ") and stripped.endswith(" ==="):
            current = stripped[4:-4]
            sections[current] = ""
            continue
        if current is not None:
            sections[current] += line + "\n"
    missing = [s for s in _SECTIONS if s not in sections]
    if missing:
        raise SchemaError(f"prompt asset is missing sections: {', '.join(missing)}")
    return {name: body.strip() + "\n" for name, body in sections.items()}


def build_prompts(
    question_id: str,
    question: str,
    answer,
    issues: list[str] | None = None,
) -> tuple[str, str]:
    """Assemble the (system, user) prompt pair for one compile attempt.

    `issues` from a failed previous attempt appends the retry block.
    """
    parts = prompt_sections()
    user = (
        parts["USER"]
        .replace("<<question_id>>", question_id)
        .replace("<<question>>", question)
        .replace("<<answer>>", str(answer))
    )
    if issues:
        bullet_list = "\n".join(f"- {issue}" for issue in issues)
        user = user + "\n" + parts["RETRY"].replace("<<issues>>", bullet_list)
    return parts["SYSTEM"], user


def validate_candidate(
    response: str,
    answer,
    seed: int = 0,
    trials: int = 200,
) -> tuple[OperatorSpec | None, list[str]]:
    """Check one compiler response end to end.

    Returns (spec, []) on acceptance or (None, issues) with every
    diagnostic collected up to the first fatal stage.
    """
    try:
        document = json.loads(response)
    except ValueError as err:
        return None, [f"response is not valid JSON: {err}"]
    if not isinstance(document, dict):
        return None, ["response must be a single JSON object"]
    try:
        spec = load_spec(document)
    except SchemaError as err:
        return None, [str(err)]
    issues: list[str] = []
    if not gold_matches(spec.gold_answer, answer):
        issues.append(
            f"document gold_answer {spec.gold_answer!r} does not match the seed answer {answer!r}"
        )
    base = verify_base(spec)
    issues.extend(base.failures)
    if issues:
        return None, issues
    generated = check_generator(spec, seed=seed, trials=trials)
    if not generated.accepted:
        return None, list(generated.failures)
    return spec, []


def compile_seed(
    question_id: str,
    question: str,
    answer,
    compiler: Compiler,
    max_attempts: int = 3,
    seed: int = 0,
    trials: int = 200,
) -> OperatorSpec:
    """Lift one (question, answer) pair into a validated operator.

    Calls `compiler` up to `max_attempts` times, feeding the previous
    attempt's diagnostics back into the prompt each retry.
    """
    if max_attempts < 1:
        raise ValueError(f"max_attempts must be at least 1, got {max_attempts}")
    issues: list[str] = []
    for _attempt in range(max_attempts):
        system, user = build_prompts(question_id, question, answer, issues or None)
        response = compiler(system, user)
        spec, issues = validate_candidate(response, answer, seed=seed, trials=trials)
        if spec is not None:
            return spec
    detail = "; ".join(issues) if issues else "no diagnostics"
    raise SeedLiftError(
        f"{question_id}: no valid operator after {max_attempts} attempts ({detail})"
    )
