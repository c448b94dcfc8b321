"""End-to-end tests against hand-built tables and split manifests.

These never import the evaluation harness; they exercise the same file
contract the harness uses when it shells out to the adapter.
"""

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pytest

from tabadapt.cli import main
from tabadapt.core import AdapterError, run_external

PREDICTION_KEYS = {
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
}


def write_table(tmp_path, header, rows, problem_id="toy_problem"):
    csv_path = tmp_path / f"{problem_id}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    digest = hashlib.sha256(csv_path.read_bytes()).hexdigest()
    manifest = {
        "operator_id": problem_id,
        "seed": 0,
        "n_rows": len(rows),
        "columns": list(header),
        "csv_sha256": digest,
        "template_indices": [0] * len(rows),
    }
    manifest_path = tmp_path / f"{problem_id}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return csv_path, manifest_path, digest


def write_split(tmp_path, context, query, problem_id="toy_problem", **overrides):
    split = {
        "problem_id": problem_id,
        "kind": "RANDOM",
        "cap": len(context) + len(query),
        "seed": 7,
        "context_row_ids": list(context),
        "query_row_ids": list(query),
        "boundary": None,
    }
    split.update(overrides)
    path = tmp_path / "split.json"
    path.write_text(json.dumps(split, indent=2), encoding="utf-8")
    return path, split


def simple_table(tmp_path, n=40):
    rows = [[str(i % 7), str((i * 3) % 11), str(2.0 * (i % 7) + 0.5)] for i in range(n)]
    return write_table(tmp_path, ["a", "b", "y"], rows)


def run_cli(model, csv_path, manifest_path, split_path, out_path):
    return main([
        "--model", model,
        "--table", str(csv_path),
        "--table-manifest", str(manifest_path),
        "--split", str(split_path),
        "--out", str(out_path),
    ])


def test_dummy_mean_writes_schema_shaped_file(tmp_path):
    csv_path, manifest_path, digest = simple_table(tmp_path)
    context = list(range(30))
    query = list(range(30, 40))
    split_path, split = write_split(tmp_path, context, query)
    out = tmp_path / "pred.json"
    assert run_cli("dummy-mean", csv_path, manifest_path, split_path, out) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert set(doc) == PREDICTION_KEYS
    assert doc["schema_version"] == 1
    assert doc["kind"] == "predictions"
    assert doc["source"] == "external"
    assert doc["problem_id"] == "toy_problem"
    assert doc["model"] == "dummy-mean"
    assert doc["cap"] == 40
    assert doc["table_sha256"] == digest
    assert doc["split"] == split
    assert doc["query_row_ids"] == sorted(query)
    expected = float(np.mean([2.0 * (i % 7) + 0.5 for i in context]))
    assert doc["predictions"] == [expected] * len(query)


def test_query_rows_are_predicted_in_sorted_id_order(tmp_path):
    # y is a step function of the lone feature, so a fitted tree tells
    # us which row each prediction belongs to
    rows = [[str(i % 10), str(float(10 * (i % 10)))] for i in range(200)]
    csv_path, manifest_path, _ = write_table(tmp_path, ["a", "y"], rows)
    context = [i for i in range(200) if i not in (123, 57)]
    split_path, _ = write_split(tmp_path, context, [123, 57])
    out = tmp_path / "pred.json"
    assert run_cli("hist-gbt", csv_path, manifest_path, split_path, out) == 0
    doc = json.loads(out.read_text(encoding="utf-8"))
    assert doc["query_row_ids"] == [57, 123]
    assert doc["predictions"][0] == pytest.approx(70.0, abs=1.0)
    assert doc["predictions"][1] == pytest.approx(30.0, abs=1.0)


def test_digest_mismatch_leaves_no_output(tmp_path, capsys):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    doc["csv_sha256"] = "0" * 64
    manifest_path.write_text(json.dumps(doc), encoding="utf-8")
    split_path, _ = write_split(tmp_path, list(range(30)), list(range(30, 40)))
    out = tmp_path / "pred.json"
    assert run_cli("dummy-mean", csv_path, manifest_path, split_path, out) == 1
    assert "digest mismatch" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_model_is_reported(tmp_path, capsys):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, _ = write_split(tmp_path, list(range(30)), list(range(30, 40)))
    out = tmp_path / "pred.json"
    assert run_cli("oracle-v9", csv_path, manifest_path, split_path, out) == 1
    err = capsys.readouterr().err
    assert "unknown model" in err and "dummy-mean" in err
    assert not out.exists()


def test_overlapping_rows_rejected(tmp_path, capsys):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, _ = write_split(tmp_path, list(range(30)), [29, 30, 31])
    out = tmp_path / "pred.json"
    assert run_cli("dummy-mean", csv_path, manifest_path, split_path, out) == 1
    assert "overlap" in capsys.readouterr().err
    assert not out.exists()


def test_out_of_range_row_id_rejected(tmp_path):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, _ = write_split(tmp_path, list(range(30)), [30, 40])
    with pytest.raises(AdapterError, match="outside the table"):
        run_external("dummy-mean", csv_path, manifest_path, split_path, tmp_path / "p.json")


def test_problem_id_mismatch_rejected(tmp_path):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, _ = write_split(
        tmp_path, list(range(30)), list(range(30, 40)), problem_id="other_problem"
    )
    with pytest.raises(AdapterError, match="split is for"):
        run_external("dummy-mean", csv_path, manifest_path, split_path, tmp_path / "p.json")


def test_missing_split_field_rejected(tmp_path):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, split = write_split(tmp_path, list(range(30)), list(range(30, 40)))
    del split["boundary"]
    split_path.write_text(json.dumps(split), encoding="utf-8")
    with pytest.raises(AdapterError, match="missing boundary"):
        run_external("dummy-mean", csv_path, manifest_path, split_path, tmp_path / "p.json")


def test_categorical_columns_and_unseen_values(tmp_path):
    # context only ever sees red/blue; the query throws in green, which
    # must flow through as a missing value rather than crash
    rows = []
    for i in range(60):
        color = "red" if i % 2 else "blue"
        rows.append([color, str(i % 5), str(float(i % 5 + (1 if color == "red" else 0)))])
    rows.append(["green", "2", "9.0"])
    csv_path, manifest_path, _ = write_table(tmp_path, ["color", "n", "y"], rows)
    split_path, _ = write_split(tmp_path, list(range(60)), [60])
    doc = run_external("hist-gbt", csv_path, manifest_path, split_path, tmp_path / "p.json")
    assert len(doc["predictions"]) == 1
    assert math.isfinite(doc["predictions"][0])


def test_run_external_returns_what_it_wrote(tmp_path):
    csv_path, manifest_path, _ = simple_table(tmp_path)
    split_path, _ = write_split(tmp_path, list(range(30)), list(range(30, 40)))
    out = tmp_path / "nested" / "dir" / "pred.json"
    doc = run_external("dummy-mean", csv_path, manifest_path, split_path, out)
    assert json.loads(out.read_text(encoding="utf-8")) == doc
