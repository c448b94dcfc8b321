"""Operator documents: loading, schema validation, and the acceptance gate.

An operator is a JSON object with six required fields and an optional
``meta``:

    id               short machine name, e.g. "garden_flowers"
    text_templates   one or more problem texts with [slot] placeholders
    slots            slot declarations, a name-keyed object or a list
    generator        {"type": "opal", "code": ...} defining generator()
    verifier         {"type": "opal", "code": ...} defining verifier(...)
    base_assignment  the seed problem's slot values
    gold_answer      the seed problem's known answer

Slot names tie everything together: every template's placeholder set,
the slot table, the base assignment, and the verifier's parameter list
must be exactly the same set, and the generator must emit maps with the
same keys.  load_spec enforces the static part; check_generator covers
the dynamic part.

The gate: an operator enters the corpus only if its verifier, run on the
base assignment, reproduces the gold answer exactly (integers) or within
1e-9 relative tolerance (floats).  This is what keeps synthesized labels
anchored to a known-correct example.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .errors import SchemaError, SlotMismatchError
from .formatting import canonical
from .oplang import LangError, Limits, Program, RngState, eval_function, parse_program, to_source

PROGRAM_TYPE = "opal"

SLOT_KINDS = frozenset(["int", "float", "choice", "str", "entity", "unit"])
NUMERIC_KINDS = frozenset(["int", "float"])
CATEGORICAL_KINDS = SLOT_KINDS - NUMERIC_KINDS

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_ID_RE = re.compile(r"^[a-z][a-z0-9_-]*$")
_PLACEHOLDER_RE = re.compile(r"\[([a-z][a-z0-9_]*)\]")

_TOP_KEYS = frozenset(
    ["id", "text_templates", "slots", "generator", "verifier", "base_assignment", "gold_answer", "meta"]
)
_SLOT_KEYS = frozenset(["name", "kind", "base_value", "map", "interval", "weight", "meta"])


@dataclass(frozen=True)
class SlotSpec:
    name: str
    kind: str
    base_value: object
    map: dict | None = None
    interval: tuple | None = None
    weight: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def is_numeric(self) -> bool:
        return self.kind in NUMERIC_KINDS

    def declared_values(self) -> list[str]:
        """Category list for non-numeric slots, in declared order."""
        values = self.meta.get("values") or self.meta.get("names")
        return list(values) if values else []


@dataclass(frozen=True)
class OperatorSpec:
    id: str
    text_templates: tuple[str, ...]
    slots: tuple[SlotSpec, ...]
    generator: Program
    verifier: Program
    generator_source: str
    verifier_source: str
    base_assignment: dict
    gold_answer: object
    meta: dict = field(default_factory=dict)

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def slot(self, name: str) -> SlotSpec:
        for s in self.slots:
            if s.name == name:
                return s
        raise KeyError(name)


@dataclass
class ValidationReport:
    operator_id: str
    accepted: bool
    failures: list[str]
    trials: int = 0
    rejections: int = 0

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.trials if self.trials else 0.0


def placeholders(template: str) -> set[str]:
    return set(_PLACEHOLDER_RE.findall(template))


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaError(message)


def _is_plain_int(v) -> bool:
    return type(v) is int


def _is_plain_number(v) -> bool:
    return type(v) in (int, float)


def _parse_slot(name_hint: str | None, raw: dict) -> SlotSpec:
    _require(isinstance(raw, dict), "slot declaration must be an object")
    unknown = set(raw) - _SLOT_KEYS
    _require(not unknown, f"slot has unknown fields: {sorted(unknown)}")
    name = raw.get("name", name_hint)
    _require(isinstance(name, str) and _NAME_RE.match(name) is not None,
             f"slot name {name!r} must match [a-z][a-z0-9_]*")
    if name_hint is not None and "name" in raw:
        _require(raw["name"] == name_hint, f"slot key {name_hint!r} disagrees with name {raw['name']!r}")
    kind = raw.get("kind")
    _require(kind in SLOT_KINDS, f"slot {name!r}: unknown kind {kind!r}")
    _require("base_value" in raw, f"slot {name!r}: base_value is required")
    base = raw["base_value"]
    if kind == "int":
        _require(_is_plain_int(base), f"slot {name!r}: int slot needs an integer base_value")
    elif kind == "float":
        _require(_is_plain_number(base), f"slot {name!r}: float slot needs a numeric base_value")
    else:
        _require(isinstance(base, str), f"slot {name!r}: {kind} slot needs a string base_value")
    map_field = raw.get("map")
    if map_field is not None:
        _require(isinstance(map_field, dict), f"slot {name!r}: map must be an object")
    interval = raw.get("interval")
    if interval is not None:
        _require(
            isinstance(interval, list) and len(interval) == 2 and all(_is_plain_number(v) for v in interval),
            f"slot {name!r}: interval must be [lo, hi]",
        )
        interval = tuple(interval)
    weight = raw.get("weight")
    if weight is not None:
        _require(_is_plain_number(weight) and weight > 0, f"slot {name!r}: weight must be positive")
        weight = float(weight)
    meta = raw.get("meta", {})
    _require(isinstance(meta, dict), f"slot {name!r}: meta must be an object")
    slot = SlotSpec(
        name=name, kind=kind, base_value=base, map=map_field,
        interval=interval, weight=weight, meta=meta,
    )
    if kind in CATEGORICAL_KINDS:
        values = slot.declared_values()
        _require(bool(values), f"slot {name!r}: {kind} slot must declare its values in meta")
        _require(all(isinstance(v, str) for v in values), f"slot {name!r}: declared values must be strings")
        _require(len(set(values)) == len(values), f"slot {name!r}: declared values must be unique")
        _require(base in values, f"slot {name!r}: base_value {base!r} is not among the declared values")
    return slot


def _parse_program_field(raw, field_name: str, expected_fn: str) -> tuple[Program, str]:
    _require(isinstance(raw, dict), f"{field_name} must be an object")
    _require(set(raw) == {"type", "code"}, f"{field_name} must have exactly 'type' and 'code'")
    _require(raw["type"] == PROGRAM_TYPE,
             f"{field_name}: unsupported program type {raw['type']!r}, expected {PROGRAM_TYPE!r}")
    _require(isinstance(raw["code"], str), f"{field_name}: code must be a string")
    try:
        program = parse_program(raw["code"])
    except LangError as err:
        raise SchemaError(f"{field_name}: {err}") from err
    names = [fn.name for fn in program.functions]
    _require(names == [expected_fn], f"{field_name} must define exactly one function {expected_fn!r}")
    return program, raw["code"]


def load_spec(document: str | dict) -> OperatorSpec:
    """Parse and validate an operator document.

    Accepts raw JSON text or an already-decoded object.  Raises
    SchemaError or SlotMismatchError with a diagnostic; never returns a
    partially valid spec.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as err:
            raise SchemaError(f"document is not valid JSON: {err}") from err
    _require(isinstance(document, dict), "operator document must be a JSON object")
    unknown = set(document) - _TOP_KEYS
    _require(not unknown, f"document has unknown fields: {sorted(unknown)}")
    missing = (_TOP_KEYS - {"meta"}) - set(document)
    _require(not missing, f"document is missing fields: {sorted(missing)}")

    op_id = document["id"]
    _require(isinstance(op_id, str) and _ID_RE.match(op_id) is not None,
             f"id {op_id!r} must match [a-z][a-z0-9_-]*")

    templates = document["text_templates"]
    _require(isinstance(templates, list) and templates and all(isinstance(t, str) for t in templates),
             "text_templates must be a non-empty list of strings")

    raw_slots = document["slots"]
    slots: list[SlotSpec] = []
    if isinstance(raw_slots, dict):
        _require(bool(raw_slots), "slots must be non-empty")
        for key, raw in raw_slots.items():
            slots.append(_parse_slot(key, raw))
    elif isinstance(raw_slots, list):
        _require(bool(raw_slots), "slots must be non-empty")
        for raw in raw_slots:
            slots.append(_parse_slot(None, raw))
    else:
        raise SchemaError("slots must be an object or a list")
    names = [s.name for s in slots]
    _require(len(set(names)) == len(names), "duplicate slot names")
    name_set = set(names)

    base = document["base_assignment"]
    _require(isinstance(base, dict), "base_assignment must be an object")
    if set(base) != name_set:
        raise SlotMismatchError(
            "base_assignment keys do not match declared slots",
            sorted(set(base) ^ name_set),
        )
    for slot in slots:
        if not _values_match(base[slot.name], slot.base_value):
            raise SchemaError(
                f"slot {slot.name!r}: base_value {slot.base_value!r} disagrees with "
                f"base_assignment value {base[slot.name]!r}"
            )

    for i, template in enumerate(templates):
        found = placeholders(template)
        if found != name_set:
            raise SlotMismatchError(
                f"template {i} placeholders do not match declared slots",
                sorted(found ^ name_set),
            )

    generator, generator_source = _parse_program_field(document["generator"], "generator", "generator")
    verifier, verifier_source = _parse_program_field(document["verifier"], "verifier", "verifier")

    gen_fn = generator.function("generator")
    _require(gen_fn.params == (), "generator takes no parameters")
    ver_fn = verifier.function("verifier")
    if set(ver_fn.params) != name_set:
        raise SlotMismatchError(
            "verifier parameters do not match declared slots",
            sorted(set(ver_fn.params) ^ name_set),
        )

    gold = document["gold_answer"]
    _require(_is_plain_number(gold), "gold_answer must be a number")

    meta = document.get("meta", {})
    _require(isinstance(meta, dict), "meta must be an object")

    return OperatorSpec(
        id=op_id,
        text_templates=tuple(templates),
        slots=tuple(slots),
        generator=generator,
        verifier=verifier,
        generator_source=generator_source,
        verifier_source=verifier_source,
        base_assignment=dict(base),
        gold_answer=gold,
        meta=dict(meta),
    )


def _values_match(a, b) -> bool:
    if type(a) is bool or type(b) is bool:
        return a is b
    if _is_plain_number(a) and _is_plain_number(b):
        return type(a) is type(b) and a == b
    return a == b


def serialize_spec(spec: OperatorSpec) -> dict:
    """Render a spec back to its document form.  load_spec of the result
    yields an equal spec."""
    slots: dict[str, dict] = {}
    for s in spec.slots:
        entry: dict = {"kind": s.kind, "base_value": s.base_value}
        if s.map is not None:
            entry["map"] = s.map
        if s.interval is not None:
            entry["interval"] = list(s.interval)
        if s.weight is not None:
            entry["weight"] = s.weight
        if s.meta:
            entry["meta"] = s.meta
        slots[s.name] = entry
    doc = {
        "id": spec.id,
        "text_templates": list(spec.text_templates),
        "slots": slots,
        "generator": {"type": PROGRAM_TYPE, "code": spec.generator_source},
        "verifier": {"type": PROGRAM_TYPE, "code": spec.verifier_source},
        "base_assignment": dict(spec.base_assignment),
        "gold_answer": spec.gold_answer,
    }
    if spec.meta:
        doc["meta"] = spec.meta
    return doc


def canonical_program_source(spec: OperatorSpec) -> tuple[str, str]:
    """Normalized source for both programs, mainly for digests and docs."""
    return to_source(spec.generator), to_source(spec.verifier)


def run_verifier(spec: OperatorSpec, assignment: dict, rng: RngState | None = None,
                 limits: Limits | None = None):
    """Evaluate the verifier on one assignment.  Returns its raw value."""
    return eval_function(spec.verifier, "verifier", assignment, rng=rng, limits=limits)


def _check_verdict(value, failures: list[str], context: str) -> tuple[bool, object]:
    """Validate the (bool, value) shape; append diagnostics on violation."""
    if not (isinstance(value, tuple) and len(value) == 2):
        failures.append(f"{context}: verifier must return a (bool, value) pair, got {type(value).__name__}")
        return False, None
    ok, y = value
    if type(ok) is not bool:
        failures.append(f"{context}: first element of verifier result must be a bool")
        return False, None
    if ok and not _is_plain_number(y):
        failures.append(f"{context}: accepted assignment must carry a numeric label")
        return False, None
    return ok, y


def gold_matches(y, gold) -> bool:
    if _is_plain_int(y) and _is_plain_int(gold):
        return y == gold
    return math.isclose(float(y), float(gold), rel_tol=1e-9, abs_tol=0.0)


def verify_base(spec: OperatorSpec) -> ValidationReport:
    """Phase-2 gate: the verifier must reproduce the gold answer on the
    base assignment.  Integers compare exactly, floats within 1e-9
    relative tolerance.  Evaluation errors become diagnostics, not
    exceptions."""
    failures: list[str] = []
    rng = RngState.derive(spec.id, "verify_base", 0)
    try:
        result = run_verifier(spec, spec.base_assignment, rng=rng)
    except LangError as err:
        failures.append(f"verifier error on base assignment: {err}")
        return ValidationReport(spec.id, False, failures)
    ok, y = _check_verdict(result, failures, "base assignment")
    if failures:
        return ValidationReport(spec.id, False, failures)
    if not ok:
        failures.append("verifier rejected the base assignment")
    elif not gold_matches(y, spec.gold_answer):
        failures.append(
            f"gold mismatch: verifier returned {canonical(y)}, expected {canonical(spec.gold_answer)}"
        )
    return ValidationReport(spec.id, not failures, failures)


def check_generator(spec: OperatorSpec, seed: int, trials: int = 1000) -> ValidationReport:
    """Draw ``trials`` assignments and push each through the verifier.

    Accepted only when every draw is well-formed and verifier-approved;
    the report carries the rejection rate either way.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    failures: list[str] = []
    rejections = 0
    name_set = set(spec.slot_names)
    for i in range(trials):
        rng = RngState.derive(spec.id, "check_generator", seed, i)
        try:
            draw = eval_function(spec.generator, "generator", {}, rng=rng)
        except LangError as err:
            failures.append(f"trial {i}: generator error: {err}")
            break
        if not isinstance(draw, dict):
            failures.append(f"trial {i}: generator must return a map, got {type(draw).__name__}")
            break
        if set(draw) != name_set:
            offending = sorted(set(draw) ^ name_set)
            failures.append(f"trial {i}: generator output keys do not match slots: {offending}")
            break
        type_problem = _draw_type_problem(spec, draw)
        if type_problem:
            failures.append(f"trial {i}: {type_problem}")
            break
        try:
            result = run_verifier(spec, draw, rng=rng)
        except LangError as err:
            failures.append(f"trial {i}: verifier error: {err}")
            break
        ok, _ = _check_verdict(result, failures, f"trial {i}")
        if failures:
            break
        if not ok:
            rejections += 1
    if rejections:
        failures.append(
            f"generator rejection rate {rejections / trials:.4f} ({rejections}/{trials})"
        )
    accepted = not failures
    return ValidationReport(spec.id, accepted, failures, trials=trials, rejections=rejections)


def _draw_type_problem(spec: OperatorSpec, draw: dict) -> str | None:
    for slot in spec.slots:
        value = draw[slot.name]
        if slot.kind == "int":
            if not _is_plain_int(value):
                return f"slot {slot.name!r} expects an int, generator produced {type(value).__name__}"
        elif slot.kind == "float":
            if not _is_plain_number(value):
                return f"slot {slot.name!r} expects a number, generator produced {type(value).__name__}"
        else:
            if not isinstance(value, str):
                return f"slot {slot.name!r} expects a string, generator produced {type(value).__name__}"
            if value not in slot.declared_values():
                return f"slot {slot.name!r}: value {value!r} is not among the declared values"
    return None
