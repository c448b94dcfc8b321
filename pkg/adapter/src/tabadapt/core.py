"""Table loading, split checks, and prediction file assembly.

Everything here works from the three files the harness hands over: the
table CSV, its manifest JSON, and a split manifest JSON.  Row ids are
positions in the CSV body, which is how the harness numbers rows.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .backends import lookup_backend
from .errors import AdapterError

PRODUCER = f"tabadapt {__version__}"

# every field a split manifest must carry before we trust its indices
_SPLIT_FIELDS = (
    "problem_id",
    "kind",
    "cap",
    "seed",
    "context_row_ids",
    "query_row_ids",
    "boundary",
)


def sha256_of_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(8192), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_json(path: Path | str) -> dict:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise AdapterError(f"cannot read {path}: {err}") from err
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise AdapterError(f"{path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise AdapterError(f"{path} should hold a JSON object")
    return doc


@dataclass
class TableData:
    """One table: feature cells kept as text, targets parsed to floats."""

    problem_id: str
    feature_names: tuple[str, ...]
    cells: list[tuple[str, ...]]
    y: np.ndarray
    sha256: str

    @property
    def n_rows(self) -> int:
        return len(self.cells)


def load_table(csv_path: Path | str, manifest_path: Path | str) -> TableData:
    """Read a table CSV once its digest matches the manifest."""
    manifest = load_json(manifest_path)
    try:
        digest = sha256_of_file(csv_path)
    except OSError as err:
        raise AdapterError(f"cannot read {csv_path}: {err}") from err
    expected = manifest.get("csv_sha256")
    if expected != digest:
        raise AdapterError(
            f"table digest mismatch: manifest says {expected}, file is {digest}"
        )
    with open(csv_path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "y":
            raise AdapterError("table CSV must end with a y column")
        cells: list[tuple[str, ...]] = []
        targets: list[float] = []
        for record in reader:
            if len(record) != len(header):
                raise AdapterError(
                    f"row {len(cells)} has {len(record)} fields, header has {len(header)}"
                )
            try:
                targets.append(float(record[-1]))
            except ValueError as err:
                raise AdapterError(
                    f"row {len(cells)} target {record[-1]!r} is not a number"
                ) from err
            cells.append(tuple(record[:-1]))
    columns = manifest.get("columns")
    if columns is not None and list(columns) != list(header):
        raise AdapterError("table manifest columns do not match the CSV header")
    return TableData(
        problem_id=str(manifest.get("operator_id", "")),
        feature_names=tuple(header[:-1]),
        cells=cells,
        y=np.array(targets, dtype=np.float64),
        sha256=digest,
    )


def check_split(split: dict, table: TableData) -> tuple[list[int], list[int]]:
    """Validate a split manifest against the table it claims to cut.

    Returns context ids in manifest order and query ids sorted
    ascending, which is the order predictions are written in.
    """
    missing = [f for f in _SPLIT_FIELDS if f not in split]
    if missing:
        raise AdapterError(f"split manifest is missing {', '.join(missing)}")
    if split["problem_id"] != table.problem_id:
        raise AdapterError(
            f"split is for {split['problem_id']!r}, table is {table.problem_id!r}"
        )
    try:
        context = [int(i) for i in split["context_row_ids"]]
        query = [int(i) for i in split["query_row_ids"]]
    except (TypeError, ValueError) as err:
        raise AdapterError(f"split row ids must be integers: {err}") from err
    if not context or not query:
        raise AdapterError("split needs at least one context and one query row")
    taken = set(context)
    if len(taken) != len(context) or len(set(query)) != len(query):
        raise AdapterError("split row ids repeat")
    if taken & set(query):
        raise AdapterError("context and query rows overlap")
    for i in context + query:
        if not 0 <= i < table.n_rows:
            raise AdapterError(
                f"row id {i} is outside the table (0..{table.n_rows - 1})"
            )
    return context, sorted(query)


def design_matrices(
    table: TableData, context_ids: list[int], query_ids: list[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Numeric feature blocks for the two row sets.

    Column typing and category codes come from the context rows alone;
    query cells that do not fit (unseen category, unparseable number)
    become NaN for the backend's missing-value handling to absorb.
    """
    k = len(table.feature_names)
    Xc = np.empty((len(context_ids), k), dtype=np.float64)
    Xq = np.empty((len(query_ids), k), dtype=np.float64)
    for j in range(k):
        ctx = [table.cells[i][j] for i in context_ids]
        qry = [table.cells[i][j] for i in query_ids]
        numeric = _parse_column(ctx)
        if numeric is not None:
            Xc[:, j] = numeric
            Xq[:, j] = [_float_or_nan(v) for v in qry]
        else:
            codes = {v: float(c) for c, v in enumerate(sorted(set(ctx)))}
            Xc[:, j] = [codes[v] for v in ctx]
            Xq[:, j] = [codes.get(v, float("nan")) for v in qry]
    return Xc, Xq


def _parse_column(values: list[str]) -> np.ndarray | None:
    out = np.empty(len(values), dtype=np.float64)
    for i, text in enumerate(values):
        try:
            out[i] = float(text)
        except ValueError:
            return None
    return out


def _float_or_nan(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float("nan")


def prediction_doc(
    table: TableData,
    split: dict,
    model: str,
    query_ids: list[int],
    predictions,
) -> dict:
    return {
        "schema_version": 1,
        "kind": "predictions",
        "problem_id": table.problem_id,
        "model": model,
        "source": "external",
        "cap": int(split["cap"]),
        "split": split,
        "table_sha256": table.sha256,
        "query_row_ids": [int(i) for i in query_ids],
        "predictions": [float(p) for p in predictions],
        "producer_version": PRODUCER,
    }


def write_prediction_file(doc: dict, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_external(
    model: str,
    table_path: Path | str,
    table_manifest_path: Path | str,
    split_path: Path | str,
    out_path: Path | str,
) -> dict:
    """Fit one backend on a split's context rows and write its predictions.

    Any failure raises before the output file is touched, so a bad run
    leaves nothing behind for the harness to pick up.
    """
    backend = lookup_backend(model)
    table = load_table(table_path, table_manifest_path)
    split = load_json(split_path)
    context_ids, query_ids = check_split(split, table)
    yc = table.y[context_ids]
    Xc, Xq = design_matrices(table, context_ids, query_ids)
    predictions = backend(Xc, yc, Xq)
    if len(predictions) != len(query_ids):
        raise AdapterError(
            f"backend {model!r} returned {len(predictions)} predictions "
            f"for {len(query_ids)} query rows"
        )
    doc = prediction_doc(table, split, model, query_ids, predictions)
    write_prediction_file(doc, out_path)
    return doc
