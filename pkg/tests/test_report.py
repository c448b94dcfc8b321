import json

import pytest

from vertab.errors import SchemaError
from vertab.metrics import MetricSet, aggregate
from vertab.report import (
    SUMMARY_COLUMNS,
    build_report,
    load_predictions_file,
    load_report,
    make_cell,
    summarize_reports,
    validate_predictions,
    validate_report,
    write_predictions_file,
    write_report,
    write_summary_csv,
)

SEEDS = {"synthesis": 2025, "split": 2025, "model": 42}


def metric_set(consistency=0.5, r2=0.9):
    return MetricSet(consistency, r2, 0.2, 0.1, n_query=10, null_variance=False)


def sample_cell(model="mean", split="RANDOM", cap=32, consistency=0.5):
    return make_cell(
        problem_id="garden_flowers",
        model=model,
        split=split,
        cap=cap,
        metrics=metric_set(consistency),
        n_context=26,
        n_query=6,
    )


class TestReportDocuments:
    def test_empty_report_is_valid(self):
        doc = build_report([], [], SEEDS)
        validate_report(doc)
        assert doc["cells"] == []
        assert doc["schema_version"] == 1

    def test_round_trip(self, tmp_path):
        cells = [sample_cell()]
        rows = [aggregate("mean", "RANDOM", 32, [metric_set()])]
        doc = build_report(cells, rows, SEEDS)
        write_report(doc, tmp_path / "r.json")
        assert load_report(tmp_path / "r.json") == doc

    def test_failed_cell_carries_error(self):
        cell = make_cell(
            problem_id="x", model="rf", split="OOD", cap=64,
            metrics=None, error="target sd was zero",
        )
        doc = build_report([cell], [], SEEDS)
        assert doc["cells"][0]["metrics"] is None
        assert doc["cells"][0]["error"] == "target sd was zero"

    def test_wrong_schema_version_rejected(self):
        doc = build_report([sample_cell()], [], SEEDS)
        doc["schema_version"] = 2
        with pytest.raises(SchemaError):
            validate_report(doc)

    def test_unknown_top_level_key_rejected(self):
        doc = build_report([], [], SEEDS)
        doc["extra"] = 1
        with pytest.raises(SchemaError):
            validate_report(doc)

    def test_bad_split_name_rejected(self):
        cell = sample_cell()
        cell["split"] = "HOLDOUT"
        with pytest.raises(SchemaError):
            build_report([cell], [], SEEDS)


class TestSummaryCsv:
    def test_exact_columns(self, tmp_path):
        rows = [aggregate("mean", "RANDOM", 32, [metric_set(), metric_set(0.7)])]
        write_summary_csv(rows, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "model,split,cap,mean_consistency,median_r2,median_rmse,median_mae,ci_lo,ci_hi,n_problems"
        assert lines[0].split(",") == list(SUMMARY_COLUMNS)
        assert len(lines) == 2
        assert lines[1].startswith("mean,RANDOM,32,")

    def test_null_ci_is_empty_cell(self, tmp_path):
        rows = [aggregate("mean", "OOD", 64, [metric_set()])]
        write_summary_csv(rows, tmp_path / "s.csv")
        record = (tmp_path / "s.csv").read_text().splitlines()[1].split(",")
        assert record[SUMMARY_COLUMNS.index("ci_lo")] == ""
        assert record[SUMMARY_COLUMNS.index("ci_hi")] == ""

    def test_empty_summary_keeps_header(self, tmp_path):
        write_summary_csv([], tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text().splitlines() == [",".join(SUMMARY_COLUMNS)]


class TestMerging:
    def test_two_reports_merge(self):
        a = build_report([sample_cell(consistency=0.4)], [], SEEDS)
        b = build_report([sample_cell(consistency=0.8)], [], SEEDS)
        rows = summarize_reports([a, b])
        assert len(rows) == 1
        assert rows[0].n_problems == 2
        assert rows[0].mean_consistency == pytest.approx(0.6)

    def test_groups_by_model_split_cap(self):
        cells = [
            sample_cell(model="mean", cap=32),
            sample_cell(model="mean", cap=64),
            sample_cell(model="rf", cap=32),
        ]
        rows = summarize_reports([build_report(cells, [], SEEDS)])
        assert [(r.model, r.cap) for r in rows] == [("mean", 32), ("mean", 64), ("rf", 32)]

    def test_error_cells_are_skipped(self):
        ok = sample_cell()
        bad = make_cell(problem_id="x", model="mean", split="RANDOM", cap=32,
                        metrics=None, error="boom")
        rows = summarize_reports([build_report([ok, bad], [], SEEDS)])
        assert rows[0].n_problems == 1

    def test_version_conflict(self):
        doc = build_report([], [], SEEDS)
        doc["schema_version"] = 99
        with pytest.raises(SchemaError, match="schema_version"):
            summarize_reports([doc])


def prediction_doc(**overrides):
    doc = {
        "schema_version": 1,
        "kind": "predictions",
        "problem_id": "garden_flowers",
        "model": "mean",
        "source": "external",
        "cap": 10,
        "split": {
            "problem_id": "garden_flowers",
            "kind": "RANDOM",
            "cap": 10,
            "seed": 2025,
            "context_row_ids": [0, 1, 2, 3, 4, 5, 6, 7],
            "query_row_ids": [8, 9],
            "boundary": None,
        },
        "table_sha256": "0" * 64,
        "query_row_ids": [8, 9],
        "predictions": [1.5, 2.5],
        "producer_version": "0.1.0",
    }
    doc.update(overrides)
    return doc


class TestPredictionFiles:
    def test_valid_round_trip(self, tmp_path):
        doc = prediction_doc()
        write_predictions_file(doc, tmp_path / "p.json")
        assert load_predictions_file(tmp_path / "p.json") == doc

    def test_count_mismatch(self):
        with pytest.raises(SchemaError, match="predictions for"):
            validate_predictions(prediction_doc(predictions=[1.0]))

    def test_ids_must_match_split(self):
        with pytest.raises(SchemaError, match="split manifest"):
            validate_predictions(prediction_doc(query_row_ids=[7, 9], predictions=[1.0, 2.0]))

    def test_bad_digest_format(self):
        with pytest.raises(SchemaError):
            validate_predictions(prediction_doc(table_sha256="nope"))

    def test_missing_field(self):
        doc = prediction_doc()
        del doc["cap"]
        with pytest.raises(SchemaError):
            validate_predictions(doc)
