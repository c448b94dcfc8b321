import json

import pytest

from vertab.errors import ExhaustionError, SchemaError, SlotMismatchError
from vertab.fixtures import load_fixture
from vertab.opspec import load_spec
from vertab.synthesis import (
    Row,
    dedup_key,
    load_table,
    render_text,
    reverify_row,
    sha256_of_file,
    synthesize_table,
    write_table,
)

from test_opspec import make_doc


class TestSynthesis:
    def test_requested_row_count(self):
        spec = load_fixture("linear_blend")
        table = synthesize_table(spec, 50, seed=2025)
        assert table.n_rows == 50
        assert table.columns == ("a", "b", "y")
        assert table.operator_id == "linear_blend"

    def test_rows_are_unique(self):
        spec = load_fixture("linear_blend")
        table = synthesize_table(spec, 200, seed=2025)
        keys = {dedup_key(spec, r.assignment) for r in table.rows}
        assert len(keys) == 200

    def test_deterministic_in_seed(self):
        spec = load_fixture("garden_flowers")
        a = synthesize_table(spec, 64, seed=2025)
        b = synthesize_table(spec, 64, seed=2025)
        assert a.rows == b.rows
        c = synthesize_table(spec, 64, seed=2026)
        assert a.rows != c.rows

    def test_monotone_prefix(self):
        # attempt streams are keyed by attempt index, so a larger table
        # starts with exactly the smaller one
        spec = load_fixture("linear_blend")
        small = synthesize_table(spec, 32, seed=9)
        large = synthesize_table(spec, 128, seed=9)
        assert large.rows[:32] == small.rows

    def test_rows_reverify(self):
        spec = load_fixture("discount_total")
        table = synthesize_table(spec, 64, seed=2025)
        assert all(reverify_row(spec, r) for r in table.rows)

    def test_template_indices_in_range_and_varied(self):
        spec = load_fixture("garden_flowers")
        table = synthesize_table(spec, 64, seed=2025)
        indices = set(table.template_indices())
        assert indices <= set(range(len(spec.text_templates)))
        assert len(indices) > 1

    def test_exhaustion(self):
        doc = make_doc(
            generator={
                "type": "opal",
                "code": 'func generator() {\n    return {"a": rng.randint(1, 3), "b": rng.randint(1, 2)}\n}\n',
            }
        )
        spec = load_spec(doc)
        with pytest.raises(ExhaustionError, match="6 of 10 unique"):
            synthesize_table(spec, 10, seed=0)

    def test_exhaustion_budget_is_bounded(self):
        doc = make_doc(
            generator={
                "type": "opal",
                "code": 'func generator() {\n    return {"a": 1, "b": 1}\n}\n',
            }
        )
        with pytest.raises(ExhaustionError, match="after 200 attempts"):
            synthesize_table(load_spec(doc), 2, seed=0)

    def test_generator_key_drift_raises(self):
        doc = make_doc(
            generator={"type": "opal", "code": 'func generator() {\n    return {"a": 1, "c": 2}\n}\n'}
        )
        with pytest.raises(SlotMismatchError):
            synthesize_table(load_spec(doc), 1, seed=0)

    def test_generator_type_drift_raises(self):
        doc = make_doc(
            generator={"type": "opal", "code": 'func generator() {\n    return {"a": true, "b": 2}\n}\n'}
        )
        with pytest.raises(SchemaError, match="expects an int"):
            synthesize_table(load_spec(doc), 1, seed=0)

    def test_non_pair_verdict_raises(self):
        doc = make_doc(verifier={"type": "opal", "code": "func verifier(a, b) {\n    return a + b\n}\n"})
        with pytest.raises(SchemaError, match="pair"):
            synthesize_table(load_spec(doc), 1, seed=0)

    def test_n_rows_must_be_positive(self):
        with pytest.raises(ValueError):
            synthesize_table(load_fixture("linear_blend"), 0, seed=0)

    def test_float_labels_survive(self):
        spec = load_fixture("headwind_rate")
        table = synthesize_table(spec, 16, seed=2025)
        assert all(type(r.y) is float for r in table.rows)


class TestRendering:
    def test_substitutes_all_placeholders(self):
        spec = load_fixture("linear_blend")
        row = Row(assignment={"a": 4, "b": 6}, y=29, template_index=0)
        text = render_text(spec, row, 0)
        assert "[" not in text
        assert "4" in text and "6" in text

    def test_template_choice_changes_text(self):
        spec = load_fixture("garden_flowers")
        row = synthesize_table(spec, 1, seed=2025).rows[0]
        texts = {render_text(spec, row, i) for i in range(len(spec.text_templates))}
        assert len(texts) == len(spec.text_templates)

    def test_accepts_plain_assignment(self):
        spec = load_fixture("linear_blend")
        assert render_text(spec, {"a": 1, "b": 2}, 0) == render_text(
            spec, Row({"a": 1, "b": 2}, 10, 0), 0
        )

    def test_canonical_float_formatting(self):
        spec = load_fixture("headwind_rate")
        text = render_text(spec, spec.base_assignment, 0)
        assert "15" in text

    def test_index_out_of_range(self):
        spec = load_fixture("linear_blend")
        with pytest.raises(ValueError):
            render_text(spec, spec.base_assignment, 99)


class TestTableFiles:
    def test_csv_bytes_are_stable(self, tmp_path):
        spec = load_fixture("discount_total")
        table = synthesize_table(spec, 32, seed=2025)
        m1 = write_table(table, tmp_path / "a.csv")
        m2 = write_table(table, tmp_path / "b.csv")
        assert m1["csv_sha256"] == m2["csv_sha256"]
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_line_endings_and_header(self, tmp_path):
        spec = load_fixture("linear_blend")
        table = synthesize_table(spec, 8, seed=1)
        write_table(table, tmp_path / "t.csv")
        raw = (tmp_path / "t.csv").read_bytes()
        assert b"\r" not in raw
        assert raw.decode("utf-8").splitlines()[0] == "a,b,y"

    def test_manifest_contents(self, tmp_path):
        spec = load_fixture("linear_blend")
        table = synthesize_table(spec, 8, seed=5)
        manifest = write_table(table, tmp_path / "t.csv", tmp_path / "t.json")
        assert manifest["operator_id"] == "linear_blend"
        assert manifest["seed"] == 5
        assert manifest["n_rows"] == 8
        assert manifest["columns"] == ["a", "b", "y"]
        assert manifest["csv_sha256"] == sha256_of_file(tmp_path / "t.csv")
        assert manifest["template_indices"] == table.template_indices()
        on_disk = json.loads((tmp_path / "t.json").read_text())
        assert on_disk == manifest

    def test_round_trip_preserves_values_and_types(self, tmp_path):
        spec = load_fixture("metered_fare")
        table = synthesize_table(spec, 24, seed=2025)
        write_table(table, tmp_path / "t.csv", tmp_path / "t.json")
        back = load_table(tmp_path / "t.csv", tmp_path / "t.json", spec)
        assert back.n_rows == table.n_rows
        for orig, loaded in zip(table.rows, back.rows):
            assert loaded.assignment == orig.assignment
            for name in spec.slot_names:
                assert type(loaded.assignment[name]) is type(orig.assignment[name])
            assert type(loaded.y) is type(orig.y)
            assert loaded.y == orig.y
            assert loaded.template_index == orig.template_index

    def test_loaded_rows_still_verify(self, tmp_path):
        spec = load_fixture("headwind_rate")
        table = synthesize_table(spec, 16, seed=2025)
        write_table(table, tmp_path / "t.csv", tmp_path / "t.json")
        back = load_table(tmp_path / "t.csv", tmp_path / "t.json", spec)
        assert all(reverify_row(spec, r) for r in back.rows)

    def test_tampered_csv_is_rejected(self, tmp_path):
        spec = load_fixture("linear_blend")
        table = synthesize_table(spec, 8, seed=1)
        write_table(table, tmp_path / "t.csv", tmp_path / "t.json")
        body = (tmp_path / "t.csv").read_text()
        (tmp_path / "t.csv").write_text(body.replace("5", "6", 1))
        with pytest.raises(SchemaError, match="digest mismatch"):
            load_table(tmp_path / "t.csv", tmp_path / "t.json", spec)

    def test_wrong_operator_manifest_is_rejected(self, tmp_path):
        spec = load_fixture("linear_blend")
        other = load_fixture("clock_face")
        table = synthesize_table(spec, 8, seed=1)
        write_table(table, tmp_path / "t.csv", tmp_path / "t.json")
        with pytest.raises(SchemaError, match="manifest is for"):
            load_table(tmp_path / "t.csv", tmp_path / "t.json", other)
