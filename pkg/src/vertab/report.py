"""Machine-readable run reports and the summary table.

One report JSON per evaluation run: every (problem, model, split, cap)
cell carries its metrics, file references, and model configuration, and
failures are recorded in place so a sweep never silently drops a cell.
Prediction files use the same schema family so externally produced
predictions flow through the identical validator.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema

from . import __version__
from .errors import SchemaError
from .formatting import canonical
from .metrics import AggregateRow, MetricSet

SCHEMA_VERSION = 1

SUMMARY_COLUMNS = (
    "model",
    "split",
    "cap",
    "mean_consistency",
    "median_r2",
    "median_rmse",
    "median_mae",
    "ci_lo",
    "ci_hi",
    "n_problems",
)

_METRICS_SCHEMA = {
    "type": "object",
    "required": ["rounded_consistency", "r2", "rmse", "mae", "n_query", "null_variance"],
    "properties": {
        "rounded_consistency": {"type": "number", "minimum": 0, "maximum": 1},
        "r2": {"type": ["number", "null"]},
        "rmse": {"type": "number", "minimum": 0},
        "mae": {"type": "number", "minimum": 0},
        "n_query": {"type": "integer", "minimum": 1},
        "null_variance": {"type": "boolean"},
    },
    "additionalProperties": False,
}

_CELL_SCHEMA = {
    "type": "object",
    "required": [
        "problem_id",
        "model",
        "split",
        "cap",
        "source",
        "metrics",
        "error",
    ],
    "properties": {
        "problem_id": {"type": "string"},
        "model": {"type": "string"},
        "split": {"type": "string", "enum": ["RANDOM", "OOD"]},
        "cap": {"type": "integer", "minimum": 1},
        "source": {"type": "string", "enum": ["native", "external"]},
        "metrics": {"oneOf": [_METRICS_SCHEMA, {"type": "null"}]},
        "error": {"type": ["string", "null"]},
        "model_spec": {"type": ["object", "null"]},
        "n_context": {"type": "integer"},
        "n_query": {"type": "integer"},
        "predictions_path": {"type": ["string", "null"]},
        "split_manifest_path": {"type": ["string", "null"]},
        "table_sha256": {"type": ["string", "null"]},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "software", "seeds", "cells", "aggregates"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "software": {
            "type": "object",
            "required": ["name", "version"],
            "properties": {
                "name": {"type": "string"},
                "version": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "seeds": {
            "type": "object",
            "required": ["synthesis", "split", "model"],
            "properties": {
                "synthesis": {"type": "integer"},
                "split": {"type": "integer"},
                "model": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "cells": {"type": "array", "items": _CELL_SCHEMA},
        "aggregates": {"type": "array", "items": {"type": "object"}},
    },
    "additionalProperties": False,
}

PREDICTIONS_SCHEMA = {
    "type": "object",
    "required": [
        "schema_version",
        "kind",
        "problem_id",
        "model",
        "source",
        "cap",
        "split",
        "table_sha256",
        "query_row_ids",
        "predictions",
        "producer_version",
    ],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"const": "predictions"},
        "problem_id": {"type": "string"},
        "model": {"type": "string"},
        "source": {"type": "string", "enum": ["native", "external"]},
        "cap": {"type": "integer", "minimum": 1},
        "split": {
            "type": "object",
            "required": ["problem_id", "kind", "cap", "seed", "context_row_ids", "query_row_ids", "boundary"],
        },
        "table_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "query_row_ids": {"type": "array", "items": {"type": "integer"}},
        "predictions": {"type": "array", "items": {"type": "number"}},
        "producer_version": {"type": "string"},
    },
    "additionalProperties": False,
}


def validate_report(doc: dict) -> None:
    try:
        jsonschema.validate(doc, REPORT_SCHEMA)
    except jsonschema.ValidationError as err:
        raise SchemaError(f"report does not match schema: {err.message}") from err


def validate_predictions(doc: dict) -> None:
    try:
        jsonschema.validate(doc, PREDICTIONS_SCHEMA)
    except jsonschema.ValidationError as err:
        raise SchemaError(f"prediction file does not match schema: {err.message}") from err
    if len(doc["predictions"]) != len(doc["query_row_ids"]):
        raise SchemaError(
            f"{len(doc['predictions'])} predictions for {len(doc['query_row_ids'])} query rows"
        )
    if doc["query_row_ids"] != sorted(doc["split"]["query_row_ids"]):
        raise SchemaError("query_row_ids do not match the embedded split manifest")


def make_cell(
    problem_id: str,
    model: str,
    split: str,
    cap: int,
    metrics: MetricSet | None,
    source: str = "native",
    error: str | None = None,
    model_spec: dict | None = None,
    n_context: int | None = None,
    n_query: int | None = None,
    predictions_path: str | None = None,
    split_manifest_path: str | None = None,
    table_sha256: str | None = None,
    warnings: list[str] | None = None,
) -> dict:
    cell = {
        "problem_id": problem_id,
        "model": model,
        "split": split,
        "cap": cap,
        "source": source,
        "metrics": None if metrics is None else metrics.to_json_dict(),
        "error": error,
        "model_spec": model_spec,
        "predictions_path": predictions_path,
        "split_manifest_path": split_manifest_path,
        "table_sha256": table_sha256,
        "warnings": warnings or [],
    }
    if n_context is not None:
        cell["n_context"] = n_context
    if n_query is not None:
        cell["n_query"] = n_query
    return cell


def build_report(cells: list[dict], aggregates: list[AggregateRow], seeds: dict) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "software": {"name": "vertab", "version": __version__},
        "seeds": {
            "synthesis": int(seeds["synthesis"]),
            "split": int(seeds["split"]),
            "model": int(seeds["model"]),
        },
        "cells": cells,
        "aggregates": [row.to_json_dict() for row in aggregates],
    }
    validate_report(doc)
    return doc


def write_report(doc: dict, path: Path | str) -> None:
    validate_report(doc)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path: Path | str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_report(doc)
    return doc


def write_predictions_file(doc: dict, path: Path | str) -> None:
    validate_predictions(doc)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_predictions_file(path: Path | str) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    validate_predictions(doc)
    return doc


def _format_summary_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return canonical(v)
    return str(v)


def write_summary_csv(rows: list[AggregateRow], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            record = row.to_json_dict()
            writer.writerow(_format_summary_value(record[c]) for c in SUMMARY_COLUMNS)


def summarize_reports(docs: list[dict]) -> list[AggregateRow]:
    """Merge cell metrics from several reports into fresh aggregate rows,
    grouped by (model, split, cap) and ordered that way."""
    from .metrics import aggregate

    groups: dict[tuple[str, str, int], list[MetricSet]] = {}
    for doc in docs:
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise SchemaError(
                f"cannot merge schema_version {doc.get('schema_version')!r} reports"
            )
        for cell in doc["cells"]:
            if cell["metrics"] is None:
                continue
            key = (cell["model"], cell["split"], cell["cap"])
            groups.setdefault(key, []).append(MetricSet.from_json_dict(cell["metrics"]))
    return [
        aggregate(model, split, cap, cells)
        for (model, split, cap), cells in sorted(groups.items())
    ]
