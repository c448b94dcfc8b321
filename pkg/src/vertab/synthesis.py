"""Row synthesis: from a validated operator to a unique, verified table.

Every attempt gets its own derived random stream keyed by (operator id,
"synthesis", seed, attempt counter).  Attempt k draws the same values no
matter how many rows were requested, which gives the monotone prefix
property: the first rows of a large table are exactly the small table.

Rows are deduplicated on the canonically formatted assignment tuple, and
an attempt budget of 100 per requested row turns pathologically small
domains into ExhaustionError instead of a hang.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ExhaustionError, SchemaError, SlotMismatchError
from .formatting import canonical
from .oplang import LangError, Limits, RngState, eval_function
from .opspec import OperatorSpec, _draw_type_problem, placeholders

ATTEMPT_FACTOR = 100


@dataclass(frozen=True)
class Row:
    assignment: dict
    y: object  # int or float
    template_index: int


@dataclass
class Table:
    operator_id: str
    columns: tuple[str, ...]  # slot names in declaration order, then "y"
    rows: list[Row]
    seed: int

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def template_indices(self) -> list[int]:
        return [r.template_index for r in self.rows]


def dedup_key(spec: OperatorSpec, assignment: dict) -> tuple[str, ...]:
    return tuple(canonical(assignment[name]) for name in spec.slot_names)


def synthesize_table(spec: OperatorSpec, n_rows: int, seed: int) -> Table:
    """Collect ``n_rows`` unique verifier-approved rows.

    Raises ExhaustionError when 100 * n_rows attempts cannot produce
    enough unique rows, and SchemaError / SlotMismatchError when the
    generator or verifier emits something structurally wrong.
    """
    if n_rows <= 0:
        raise ValueError("n_rows must be positive")
    budget = ATTEMPT_FACTOR * n_rows
    limits = Limits()
    name_set = set(spec.slot_names)
    n_templates = len(spec.text_templates)
    rows: list[Row] = []
    seen: set[tuple[str, ...]] = set()
    for attempt in range(budget):
        rng = RngState.derive(spec.id, "synthesis", seed, attempt)
        draw = eval_function(spec.generator, "generator", {}, rng=rng, limits=limits)
        if not isinstance(draw, dict):
            raise SchemaError(f"{spec.id}: generator must return a map, got {type(draw).__name__}")
        if set(draw) != name_set:
            raise SlotMismatchError(
                f"{spec.id}: generator output keys do not match slots",
                sorted(set(draw) ^ name_set),
            )
        problem = _draw_type_problem(spec, draw)
        if problem:
            raise SchemaError(f"{spec.id}: {problem}")
        verdict = eval_function(spec.verifier, "verifier", draw, rng=rng, limits=limits)
        if not (isinstance(verdict, tuple) and len(verdict) == 2 and type(verdict[0]) is bool):
            raise SchemaError(f"{spec.id}: verifier must return a (bool, value) pair")
        ok, y = verdict
        if not ok:
            continue
        if type(y) not in (int, float):
            raise SchemaError(f"{spec.id}: verifier label must be numeric, got {type(y).__name__}")
        key = dedup_key(spec, draw)
        if key in seen:
            continue
        seen.add(key)
        rows.append(Row(assignment=draw, y=y, template_index=rng.randint(0, n_templates - 1)))
        if len(rows) == n_rows:
            return Table(
                operator_id=spec.id,
                columns=spec.slot_names + ("y",),
                rows=rows,
                seed=seed,
            )
    raise ExhaustionError(
        f"{spec.id}: only {len(rows)} of {n_rows} unique verified rows "
        f"after {budget} attempts"
    )


def reverify_row(spec: OperatorSpec, row: Row) -> bool:
    """Run the verifier from scratch on a stored row and compare labels."""
    try:
        verdict = eval_function(spec.verifier, "verifier", row.assignment, rng=None, limits=Limits())
    except LangError:
        return False
    if not (isinstance(verdict, tuple) and len(verdict) == 2):
        return False
    ok, y = verdict
    if ok is not True:
        return False
    return type(y) is type(row.y) and canonical(y) == canonical(row.y)


def render_text(spec: OperatorSpec, row: Row | dict, template_index: int, seed: int = 0) -> str:
    """Fill one template with a row's values, canonically formatted.

    ``seed`` is accepted for interface stability; rendering itself is
    deterministic and does not draw randomness.
    """
    if not 0 <= template_index < len(spec.text_templates):
        raise ValueError(f"template index {template_index} out of range")
    assignment = row.assignment if isinstance(row, Row) else row
    template = spec.text_templates[template_index]
    out = template
    for name in placeholders(template):
        out = out.replace(f"[{name}]", canonical(assignment[name]))
    return out


def sha256_of_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(8192), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_table(table: Table, csv_path: Path | str, manifest_path: Path | str | None = None) -> dict:
    """Write the table as canonical CSV and return its manifest.

    The CSV is UTF-8 with LF line endings; numbers use canonical
    formatting so repeated runs are byte-identical.  When
    ``manifest_path`` is given the manifest JSON is written there too.
    """
    csv_path = Path(csv_path)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            record = [canonical(row.assignment[c]) for c in table.columns[:-1]]
            record.append(canonical(row.y))
            writer.writerow(record)
    manifest = {
        "operator_id": table.operator_id,
        "seed": table.seed,
        "n_rows": table.n_rows,
        "columns": list(table.columns),
        "csv_sha256": sha256_of_file(csv_path),
        "template_indices": table.template_indices(),
    }
    if manifest_path is not None:
        write_json(manifest, manifest_path)
    return manifest


def write_json(payload: dict, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(csv_path: Path | str, manifest_path: Path | str, spec: OperatorSpec) -> Table:
    """Read a table back, typing columns by the spec's slot kinds and
    checking the manifest digest."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    actual = sha256_of_file(csv_path)
    if manifest.get("csv_sha256") != actual:
        raise SchemaError(
            f"table digest mismatch: manifest says {manifest.get('csv_sha256')}, file is {actual}"
        )
    if manifest.get("operator_id") != spec.id:
        raise SchemaError(f"manifest is for {manifest.get('operator_id')!r}, not {spec.id!r}")
    template_indices = manifest.get("template_indices", [])
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != spec.slot_names + ("y",):
            raise SchemaError(f"CSV header {header} does not match spec slots")
        rows: list[Row] = []
        for i, record in enumerate(reader):
            assignment = {}
            for name, text in zip(spec.slot_names, record[:-1]):
                assignment[name] = _parse_cell(spec.slot(name).kind, text)
            y_text = record[-1]
            y = _parse_number(y_text)
            tidx = template_indices[i] if i < len(template_indices) else 0
            rows.append(Row(assignment=assignment, y=y, template_index=tidx))
    return Table(
        operator_id=spec.id,
        columns=spec.slot_names + ("y",),
        rows=rows,
        seed=manifest.get("seed", 0),
    )


def _parse_cell(kind: str, text: str):
    if kind == "int":
        return int(text)
    if kind == "float":
        return _parse_number(text)
    return text


def _parse_number(text: str):
    if any(c in text for c in ".eE"):
        return float(text)
    return int(text)
