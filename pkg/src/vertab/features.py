"""Feature engineering: expand a verified table into numeric columns.

The column plan is a pure function of the slot declarations, never of the
data, so matrices built from different tables of the same operator always
line up.  Numeric slots fan out into raw, log, sign, and periodicity
columns; categorical slots become integer codes in declared-list order;
two text columns summarize the rendered problem statement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import SchemaError
from .formatting import canonical
from .opspec import OperatorSpec, SlotSpec
from .synthesis import Table, render_text, sha256_of_file, write_json

MOD_BASES = (3, 5, 7, 10)


@dataclass(frozen=True)
class FeatureColumn:
    name: str
    source: str | None  # slot name, or None for text statistics
    transform: str


@dataclass
class FeatureMatrix:
    problem_id: str
    columns: tuple[FeatureColumn, ...]
    X: np.ndarray  # (n_rows, n_columns) float64
    y: np.ndarray  # (n_rows,) float64
    codes: dict[str, dict[str, int]]
    row_ids: np.ndarray  # (n_rows,) positions in the source table

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def take(self, positions) -> "FeatureMatrix":
        """Row subset by positional indices, keeping original row ids."""
        idx = np.asarray(positions, dtype=np.int64)
        return FeatureMatrix(
            problem_id=self.problem_id,
            columns=self.columns,
            X=self.X[idx],
            y=self.y[idx],
            codes=self.codes,
            row_ids=self.row_ids[idx],
        )

    def positions_of(self, row_ids) -> np.ndarray:
        lookup = {int(r): i for i, r in enumerate(self.row_ids)}
        try:
            return np.array([lookup[int(r)] for r in row_ids], dtype=np.int64)
        except KeyError as err:
            raise SchemaError(f"row id {err.args[0]} is not in this matrix") from err


def column_plan(spec: OperatorSpec) -> tuple[FeatureColumn, ...]:
    """The full column layout implied by the slot declarations."""
    cols: list[FeatureColumn] = []
    for slot in spec.slots:
        prefix = f"slot_{slot.name}"
        if slot.kind == "int":
            cols.append(FeatureColumn(prefix, slot.name, "raw"))
            cols.append(FeatureColumn(f"{prefix}_abs_log1p", slot.name, "abs_log1p"))
            cols.append(FeatureColumn(f"{prefix}_sign", slot.name, "sign"))
            cols.append(FeatureColumn(f"{prefix}_parity", slot.name, "parity"))
            for k in MOD_BASES:
                cols.append(FeatureColumn(f"{prefix}_mod_{k}", slot.name, f"mod_{k}"))
        elif slot.kind == "float":
            cols.append(FeatureColumn(prefix, slot.name, "raw"))
            cols.append(FeatureColumn(f"{prefix}_abs_log1p", slot.name, "abs_log1p"))
            cols.append(FeatureColumn(f"{prefix}_sign", slot.name, "sign"))
            cols.append(FeatureColumn(f"{prefix}_frac", slot.name, "frac"))
        else:
            cols.append(FeatureColumn(f"{prefix}_code", slot.name, "code"))
    cols.append(FeatureColumn("text_char_count", None, "char_count"))
    cols.append(FeatureColumn("text_char_delta", None, "char_delta"))
    return tuple(cols)


def categorical_codes(spec: OperatorSpec) -> dict[str, dict[str, int]]:
    codes: dict[str, dict[str, int]] = {}
    for slot in spec.slots:
        if not slot.is_numeric:
            codes[slot.name] = {v: i for i, v in enumerate(slot.declared_values())}
    return codes


def _numeric_features(slot: SlotSpec, value) -> list[float]:
    x = float(value)
    out = [x, math.log1p(abs(x)), float((x > 0) - (x < 0))]
    if slot.kind == "int":
        v = int(value)
        out.append(float(v % 2))
        out.extend(float(v % k) for k in MOD_BASES)
    else:
        out.append(x - math.floor(x))
    return out


def engineer_features(table: Table, spec: OperatorSpec) -> FeatureMatrix:
    """Expand every row into the numeric feature vector.

    Total for conforming tables; the text delta is measured against the
    base assignment rendered with template 0.
    """
    if table.operator_id != spec.id:
        raise SchemaError(f"table is for {table.operator_id!r}, not {spec.id!r}")
    columns = column_plan(spec)
    codes = categorical_codes(spec)
    base_chars = len(render_text(spec, spec.base_assignment, 0))
    n = table.n_rows
    X = np.empty((n, len(columns)), dtype=np.float64)
    y = np.empty(n, dtype=np.float64)
    for i, row in enumerate(table.rows):
        vec: list[float] = []
        for slot in spec.slots:
            value = row.assignment[slot.name]
            if slot.is_numeric:
                vec.extend(_numeric_features(slot, value))
            else:
                vec.append(float(codes[slot.name][value]))
        chars = len(render_text(spec, row, row.template_index))
        vec.append(float(chars))
        vec.append(float(chars - base_chars))
        X[i] = vec
        y[i] = float(row.y)
    return FeatureMatrix(
        problem_id=spec.id,
        columns=columns,
        X=X,
        y=y,
        codes=codes,
        row_ids=np.arange(n, dtype=np.int64),
    )


def write_feature_matrix(matrix: FeatureMatrix, csv_path: Path | str,
                         manifest_path: Path | str | None = None) -> dict:
    """Write the matrix as canonical CSV plus a manifest with column
    provenance, mirroring the table file scheme."""
    csv_path = Path(csv_path)
    names = matrix.column_names
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("row_id",) + names + ("y",))
        for i in range(matrix.n_rows):
            record = [str(int(matrix.row_ids[i]))]
            record.extend(canonical(float(v)) for v in matrix.X[i])
            record.append(canonical(float(matrix.y[i])))
            writer.writerow(record)
    manifest = {
        "operator_id": matrix.problem_id,
        "n_rows": matrix.n_rows,
        "columns": ["row_id"] + list(names) + ["y"],
        "csv_sha256": sha256_of_file(csv_path),
        "provenance": {
            c.name: {"source": c.source, "transform": c.transform} for c in matrix.columns
        },
        "categorical_codes": matrix.codes,
    }
    if manifest_path is not None:
        write_json(manifest, manifest_path)
    return manifest
