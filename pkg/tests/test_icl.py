"""Prompt serialization and response parsing."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vertab.errors import (
    EmptyContextError,
    EmptyQueryError,
    PredictionLengthError,
    PredictionParseError,
    SchemaError,
)
from vertab.icl import (
    STYLE_APPENDIX,
    CompletionClientConfig,
    offline_transport,
    parse_predictions,
    prompt_key,
    request_predictions,
    serialize_prompt,
    store_response,
)
from vertab.oplang.errors import RangeError

COLUMNS = ("slot_a", "slot_b", "slot_c")
CONTEXT = [
    {"slot_a": 10, "slot_b": 80, "slot_c": 25, "y": 47},
    {"slot_a": 20, "slot_b": 50, "slot_c": 40, "y": 62},
]
QUERIES = [
    {"slot_a": 12, "slot_b": 75, "slot_c": 30},
    {"slot_a": 18, "slot_b": 60, "slot_c": 35},
]


def bundle(context=CONTEXT, queries=QUERIES, **kwargs):
    return serialize_prompt(context, queries, "flowers", COLUMNS, **kwargs)


class TestSerialization:
    def test_context_line_verbatim(self):
        lines = bundle().prompt.splitlines()
        assert "CONTEXT slot_a=10, slot_b=80, slot_c=25 -> y=47" in lines
        assert "CONTEXT slot_a=20, slot_b=50, slot_c=40 -> y=62" in lines

    def test_query_lines_carry_no_target(self):
        lines = bundle().prompt.splitlines()
        query_lines = [l for l in lines if l.startswith("QUERY")]
        assert query_lines == [
            "QUERY slot_a=12, slot_b=75, slot_c=30",
            "QUERY slot_a=18, slot_b=60, slot_c=35",
        ]
        assert all("y=" not in l for l in query_lines)

    def test_header_names_dataset_and_columns(self):
        first = bundle().prompt.splitlines()[0]
        assert first == (
            "You are an expert regression model. The dataset 'flowers' has "
            "numeric features slot_a, slot_b, slot_c and target y."
        )

    def test_section_markers(self):
        lines = bundle().prompt.splitlines()
        assert "Context rows:" in lines
        assert "Query rows:" in lines
        assert lines.index("Context rows:") < lines.index("Query rows:")

    def test_asks_for_json_list(self):
        assert "Return ONLY a JSON list of floats" in bundle().prompt

    def test_query_line_count_matches_bundle(self):
        b = bundle()
        lines = [l for l in b.prompt.splitlines() if l.startswith("QUERY")]
        assert len(lines) == b.n_query == len(QUERIES)

    def test_bundle_bookkeeping(self):
        b = bundle()
        assert b.dataset_name == "flowers"
        assert b.columns == COLUMNS
        assert b.char_count == len(b.prompt)

    def test_float_values_keep_canonical_form(self):
        ctx = [{"slot_a": 0.1, "slot_b": 2.5, "slot_c": 3, "y": 5.0}]
        qry = [{"slot_a": 1.0, "slot_b": 2, "slot_c": 0.30000000000000004}]
        lines = serialize_prompt(ctx, qry, "d", COLUMNS).prompt.splitlines()
        assert "CONTEXT slot_a=0.1, slot_b=2.5, slot_c=3 -> y=5.0" in lines
        assert "QUERY slot_a=1.0, slot_b=2, slot_c=0.30000000000000004" in lines

    def test_query_extra_y_is_ignored(self):
        qry = [dict(QUERIES[0], y=999)]
        lines = bundle(queries=qry).prompt.splitlines()
        assert "QUERY slot_a=12, slot_b=75, slot_c=30" in lines
        assert not any("999" in l for l in lines)

    def test_empty_context_rejected(self):
        with pytest.raises(EmptyContextError):
            bundle(context=[])

    def test_empty_query_rejected(self):
        with pytest.raises(EmptyQueryError):
            bundle(queries=[])

    def test_missing_column_rejected(self):
        with pytest.raises(SchemaError, match="missing columns: slot_c"):
            bundle(queries=[{"slot_a": 1, "slot_b": 2}])

    def test_context_without_target_rejected(self):
        with pytest.raises(SchemaError, match="no target y"):
            bundle(context=[{"slot_a": 1, "slot_b": 2, "slot_c": 3}])

    def test_unknown_style_rejected(self):
        with pytest.raises(ValueError, match="style"):
            bundle(style="fancy")

    def test_value_change_changes_prompt(self):
        other = [dict(CONTEXT[0]), dict(CONTEXT[1])]
        other[1]["slot_b"] += 1
        assert bundle().prompt != bundle(context=other).prompt

    def test_appendix_style(self):
        lines = bundle(style=STYLE_APPENDIX).prompt.splitlines()
        assert "CONTEXT: slot_a=10, slot_b=80, slot_c=25, y=47" in lines
        assert "QUERY: slot_a=12, slot_b=75, slot_c=30" in lines
        assert not any(l.startswith("CONTEXT ") for l in lines)


class TestParsing:
    def test_bare_array(self):
        assert parse_predictions("[1.0, 2.5, 3]", 3) == (1.0, 2.5, 3.0)

    def test_fenced_array_with_prose(self):
        text = "Here are results: ```json\n[42]\n```"
        assert parse_predictions(text, 1) == (42.0,)

    def test_results_are_floats(self):
        out = parse_predictions("[1, 2]", 2)
        assert all(type(v) is float for v in out)

    def test_wrong_length(self):
        with pytest.raises(PredictionLengthError, match="expected 3.*found 2"):
            parse_predictions("[1,2]", 3)

    def test_no_array(self):
        with pytest.raises(PredictionParseError):
            parse_predictions("The answer is 42.", 1)

    def test_empty_array_is_wrong_length(self):
        with pytest.raises(PredictionLengthError):
            parse_predictions("[]", 2)

    def test_skips_non_numeric_arrays(self):
        text = 'columns ["a", "b"] and predictions [1.5, 2.5]'
        assert parse_predictions(text, 2) == (1.5, 2.5)

    def test_finds_inner_array_of_nested(self):
        assert parse_predictions("[[1, 2]]", 2) == (1.0, 2.0)

    def test_booleans_are_not_numbers(self):
        with pytest.raises(PredictionParseError):
            parse_predictions("[true, false]", 2)

    def test_stray_brackets_in_prose(self):
        text = "see notes[iv] above; final: [7.5, -2]"
        assert parse_predictions(text, 2) == (7.5, -2.0)

    def test_first_numeric_array_wins(self):
        # the first match is binding even when a later one would fit
        with pytest.raises(PredictionLengthError):
            parse_predictions("[1] then [2, 3]", 2)

    def test_negative_and_exponent_forms(self):
        assert parse_predictions("[-1.5e2, 0.25]", 2) == (-150.0, 0.25)

    def test_expected_must_be_positive(self):
        with pytest.raises(RangeError):
            parse_predictions("[1]", 0)

    @settings(max_examples=200)
    @given(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=32),
            min_size=1,
            max_size=30,
        )
    )
    def test_round_trip_through_synthetic_response(self, values):
        text = f"Sure thing.\n```json\n{json.dumps(values)}\n```\nDone."
        assert parse_predictions(text, len(values)) == tuple(values)


class TestClientConfig:
    def test_defaults(self):
        config = CompletionClientConfig(endpoint="http://x", model="m")
        assert config.temperature == 0
        assert config.max_retries == 10
        assert config.timeout > 0

    def test_nonzero_temperature_rejected(self):
        with pytest.raises(ValueError, match="temperature"):
            CompletionClientConfig(endpoint="http://x", model="m", temperature=0.7)

    def test_negative_retries_rejected(self):
        with pytest.raises(ValueError, match="max_retries"):
            CompletionClientConfig(endpoint="http://x", model="m", max_retries=-1)


class TestTransports:
    def config(self, retries=10):
        return CompletionClientConfig(
            endpoint="http://unused", model="m", max_retries=retries
        )

    def test_offline_replay(self, tmp_path):
        b = bundle()
        store_response(tmp_path, b.prompt, "[1.0, 2.0]")
        out = request_predictions(self.config(), b, offline_transport(tmp_path))
        assert out == (1.0, 2.0)

    def test_offline_store_is_keyed_by_prompt_digest(self, tmp_path):
        b = bundle()
        path = store_response(tmp_path, b.prompt, "[0]")
        assert path.name == f"{prompt_key(b.prompt)}.txt"

    def test_offline_missing_response(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="canned response"):
            offline_transport(tmp_path)(self.config(), "never stored")

    def test_retries_then_succeeds(self):
        b = bundle()
        calls = []

        def flaky(config, prompt):
            calls.append(prompt)
            if len(calls) < 3:
                return "no numbers here"
            return "[5.0, 6.0]"

        assert request_predictions(self.config(), b, flaky) == (5.0, 6.0)
        assert len(calls) == 3

    def test_retry_budget_exhausted(self):
        b = bundle()
        calls = []

        def broken(config, prompt):
            calls.append(prompt)
            raise OSError("connection refused")

        with pytest.raises(OSError, match="connection refused"):
            request_predictions(self.config(retries=2), b, broken)
        assert len(calls) == 3

    def test_wrong_length_counts_as_failure(self):
        b = bundle()  # expects 2 predictions

        def short(config, prompt):
            return "[1]"

        with pytest.raises(PredictionLengthError):
            request_predictions(self.config(retries=1), b, short)
