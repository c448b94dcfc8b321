"""Command line behavior: exit codes, file layout, determinism."""

import json

import pytest

from vertab.cli import main
from vertab.fixtures import fixture_path
from vertab.icl import store_response
from vertab.report import load_report, validate_report
from vertab.synthesis import sha256_of_file

FLOWERS = str(fixture_path("garden_flowers"))
LINEAR = str(fixture_path("linear_blend"))


def run(*argv):
    return main([str(a) for a in argv])


class TestValidate:
    def test_bundled_fixture_passes(self, capsys):
        assert run("validate", FLOWERS) == 0
        assert "PASS garden_flowers" in capsys.readouterr().out

    def test_wrong_gold_rejected(self, tmp_path, capsys):
        doc = json.loads(open(FLOWERS).read())
        doc["gold_answer"] = 36
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run("validate", bad) == 1
        out = capsys.readouterr().out
        assert "FAIL" in out and "gold mismatch" in out

    def test_missing_file(self, tmp_path):
        assert run("validate", tmp_path / "nope.json") == 2

    def test_malformed_document(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run("validate", bad) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_mixed_batch_still_reports_all(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert run("validate", FLOWERS, bad) == 1
        out = capsys.readouterr().out
        assert "PASS garden_flowers" in out
        assert "FAIL" in out


class TestSynthesize:
    def test_writes_table_and_manifest(self, tmp_path):
        assert run("synthesize", "--spec", FLOWERS, "--rows", 48,
                   "--out-dir", tmp_path) == 0
        csv_path = tmp_path / "garden_flowers.csv"
        manifest = json.loads((tmp_path / "garden_flowers.manifest.json").read_text())
        assert csv_path.exists()
        assert manifest["n_rows"] == 48
        assert manifest["csv_sha256"] == sha256_of_file(csv_path)

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("synthesize", "--spec", LINEAR, "--rows", 64,
                       "--seed", 9, "--out-dir", out) == 0
        assert (a / "linear_blend.csv").read_bytes() == (b / "linear_blend.csv").read_bytes()


class TestFeatures:
    def test_feature_files(self, tmp_path):
        run("synthesize", "--spec", LINEAR, "--rows", 32, "--out-dir", tmp_path)
        assert run("features", "--spec", LINEAR,
                   "--table", tmp_path / "linear_blend.csv",
                   "--table-manifest", tmp_path / "linear_blend.manifest.json",
                   "--out-dir", tmp_path) == 0
        header = (tmp_path / "linear_blend.features.csv").read_text().splitlines()[0]
        assert header.startswith("row_id,")
        assert header.endswith(",y")


class TestEvaluate:
    def sweep(self, tmp_path, *extra):
        out = tmp_path / "run"
        code = run("evaluate", LINEAR, "--out-dir", out,
                   "--models", "mean", "ols", "--caps", 32, 64,
                   "--rows", 256, *extra)
        return code, out

    def test_small_sweep(self, tmp_path):
        code, out = self.sweep(tmp_path)
        assert code == 0
        report = load_report(out / "report.json")
        validate_report(report)
        assert len(report["cells"]) == 2 * 2 * 2  # models x caps x splits
        assert all(c["error"] is None for c in report["cells"])
        assert report["seeds"] == {"synthesis": 2025, "split": 2025, "model": 42}
        assert (out / "tables" / "linear_blend.csv").exists()
        assert (out / "splits" / "linear_blend" / "RANDOM_32.json").exists()
        assert (out / "predictions" / "linear_blend" / "mean_OOD_64.json").exists()

    def test_cell_paths_resolve(self, tmp_path):
        _, out = self.sweep(tmp_path)
        report = load_report(out / "report.json")
        for cell in report["cells"]:
            assert (out / cell["predictions_path"]).exists()
            assert (out / cell["split_manifest_path"]).exists()

    def test_deterministic_reports(self, tmp_path):
        _, out1 = self.sweep(tmp_path / "x")
        _, out2 = self.sweep(tmp_path / "y")
        r1 = load_report(out1 / "report.json")
        r2 = load_report(out2 / "report.json")
        assert r1 == r2

    def test_unknown_model(self, tmp_path):
        assert run("evaluate", LINEAR, "--out-dir", tmp_path / "r",
                   "--models", "guesser", "--caps", 32) == 2

    def test_off_grid_cap_rejected(self, tmp_path):
        assert run("evaluate", LINEAR, "--out-dir", tmp_path / "r",
                   "--models", "mean", "--caps", 48) == 2

    def test_allow_any_cap(self, tmp_path):
        out = tmp_path / "r"
        assert run("evaluate", LINEAR, "--out-dir", out, "--models", "mean",
                   "--caps", 48, "--rows", 64, "--allow-any-cap") == 0
        report = load_report(out / "report.json")
        assert {c["cap"] for c in report["cells"]} == {48}

    def test_cell_failures_recorded_not_fatal(self, tmp_path):
        # cap 128 exceeds the 64 available rows: every cell errors, the
        # sweep still completes and the report still validates
        out = tmp_path / "r"
        assert run("evaluate", LINEAR, "--out-dir", out, "--models", "mean",
                   "--caps", 64, 128, "--rows", 64) == 0
        report = load_report(out / "report.json")
        validate_report(report)
        failed = [c for c in report["cells"] if c["error"] is not None]
        fine = [c for c in report["cells"] if c["error"] is None]
        assert {c["cap"] for c in failed} == {128}
        assert {c["cap"] for c in fine} == {64}
        assert all("exceeds available rows" in c["error"] for c in failed)


class TestReport:
    def test_merge_to_summary_csv(self, tmp_path):
        _, out = TestEvaluate().sweep(tmp_path)
        summary = tmp_path / "summary.csv"
        assert run("report", out / "report.json", "--summary", summary) == 0
        lines = summary.read_text().splitlines()
        assert lines[0].startswith("model,split,cap,")
        assert len(lines) == 1 + 2 * 2 * 2

    def test_stdout_summary(self, tmp_path, capsys):
        _, out = TestEvaluate().sweep(tmp_path)
        capsys.readouterr()
        assert run("report", out / "report.json") == 0
        assert capsys.readouterr().out.startswith("model,split,cap,")

    def test_empty_input_gives_header_only(self, capsys):
        assert run("report") == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 1

    def test_predictions_need_table(self, tmp_path):
        pred = tmp_path / "p.json"
        pred.write_text("{}")
        assert run("report", "--predictions", pred) == 2

    def test_score_prediction_file_matches_native(self, tmp_path):
        _, out = TestEvaluate().sweep(tmp_path)
        native = load_report(out / "report.json")
        cell = next(
            c for c in native["cells"]
            if c["model"] == "mean" and c["split"] == "RANDOM" and c["cap"] == 32
        )
        rebuilt = tmp_path / "rebuilt.json"
        assert run(
            "report",
            "--predictions", out / cell["predictions_path"],
            "--table", out / "tables" / "linear_blend.csv",
            "--table-manifest", out / "tables" / "linear_blend.manifest.json",
            "--out", rebuilt,
        ) == 0
        scored = load_report(rebuilt)
        validate_report(scored)
        assert scored["cells"][0]["metrics"] == cell["metrics"]

    def test_digest_mismatch_rejected(self, tmp_path):
        _, out = TestEvaluate().sweep(tmp_path)
        cell = load_report(out / "report.json")["cells"][0]
        csv_path = out / "tables" / "linear_blend.csv"
        csv_path.write_text(csv_path.read_text() + "1,1,9\n")
        assert run(
            "report",
            "--predictions", out / cell["predictions_path"],
            "--table", csv_path,
            "--table-manifest", out / "tables" / "linear_blend.manifest.json",
            "--out", tmp_path / "r.json",
        ) == 1


class TestIclCommands:
    def setup_run(self, tmp_path):
        out = tmp_path / "run"
        run("evaluate", FLOWERS, "--out-dir", out, "--models", "mean",
            "--caps", 32, "--rows", 64, "--splits", "RANDOM")
        return out

    def test_serialize_prompt_file(self, tmp_path, capsys):
        out = self.setup_run(tmp_path)
        prompt_path = tmp_path / "prompt.txt"
        assert run("icl", "serialize", "--spec", FLOWERS,
                   "--table", out / "tables" / "garden_flowers.csv",
                   "--table-manifest", out / "tables" / "garden_flowers.manifest.json",
                   "--split", out / "splits" / "garden_flowers" / "RANDOM_32.json",
                   "--out", prompt_path) == 0
        text = prompt_path.read_text()
        assert "Context rows:" in text
        assert text.splitlines()[0].startswith("You are an expert regression model.")
        assert "chars" in capsys.readouterr().out

    def test_parse_round_trip(self, tmp_path, capsys):
        resp = tmp_path / "resp.txt"
        resp.write_text("Answer: ```json\n[1.5, -2, 3e1]\n```")
        assert run("icl", "parse", "--response", resp, "--expected", 3) == 0
        assert json.loads(capsys.readouterr().out) == [1.5, -2.0, 30.0]

    def test_parse_rejects_garbage(self, tmp_path):
        resp = tmp_path / "resp.txt"
        resp.write_text("no numbers to see here")
        assert run("icl", "parse", "--response", resp, "--expected", 2) == 1

    def test_parse_expected_floor(self, tmp_path):
        resp = tmp_path / "resp.txt"
        resp.write_text("[1]")
        assert run("icl", "parse", "--response", resp, "--expected", 0) == 2

    def test_offline_evaluation(self, tmp_path):
        out = self.setup_run(tmp_path)
        prompt_path = tmp_path / "prompt.txt"
        run("icl", "serialize", "--spec", FLOWERS,
            "--table", out / "tables" / "garden_flowers.csv",
            "--table-manifest", out / "tables" / "garden_flowers.manifest.json",
            "--split", out / "splits" / "garden_flowers" / "RANDOM_32.json",
            "--out", prompt_path)
        canned = tmp_path / "canned"
        store_response(canned, prompt_path.read_text(), json.dumps([50.0] * 6))
        out2 = tmp_path / "icl_run"
        assert run("evaluate", FLOWERS, "--out-dir", out2, "--models", "icl",
                   "--caps", 32, "--rows", 64, "--splits", "RANDOM",
                   "--offline-icl", canned) == 0
        report = load_report(out2 / "report.json")
        (cell,) = report["cells"]
        assert cell["model"] == "icl"
        assert cell["error"] is None
        assert cell["metrics"]["n_query"] == 6

    def test_icl_needs_backend(self, tmp_path):
        assert run("evaluate", FLOWERS, "--out-dir", tmp_path / "r",
                   "--models", "icl", "--caps", 32, "--rows", 64) == 2

    def test_icl_cap_limit_recorded(self, tmp_path):
        out = tmp_path / "r"
        assert run("evaluate", FLOWERS, "--out-dir", out, "--models", "icl",
                   "--caps", 256, "--rows", 512, "--splits", "RANDOM",
                   "--offline-icl", tmp_path) == 0
        (cell,) = load_report(out / "report.json")["cells"]
        assert cell["error"] is not None
        assert "in-context row limit" in cell["error"]
