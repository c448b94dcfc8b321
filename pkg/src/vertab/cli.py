"""Command line entry point.

Exit codes: 0 on success, 1 when something was validated and rejected
(gate failures, schema violations, digest mismatches, unparseable model
responses), 2 for usage and I/O problems (unknown flags or names,
missing files).
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from .errors import VertabError
from .evaluation import CAP_GRID, SPLIT_OOD, SPLIT_RANDOM, load_split_manifest
from .features import engineer_features, write_feature_matrix
from .icl import STYLE_APPENDIX, STYLE_CANONICAL, parse_predictions, serialize_prompt
from .models import MODEL_NAMES
from .oplang.errors import LangError
from .opspec import check_generator, verify_base
from .report import (
    build_report,
    load_report,
    summarize_reports,
    write_report,
    write_summary_csv,
)
from .runner import (
    DEFAULT_SEED_MODEL,
    DEFAULT_SEED_SPLIT,
    DEFAULT_SEED_SYNTHESIS,
    RunConfig,
    aggregate_cells,
    cells_from_prediction_files,
    prompt_rows,
    read_spec_file,
    run_sweep,
)
from .synthesis import load_table, synthesize_table, write_table

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_USAGE = 2


def cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.specs:
        try:
            spec = read_spec_file(path)
        except (VertabError, LangError) as err:
            print(f"FAIL {path}: {err}")
            status = EXIT_REJECTED
            continue
        base = verify_base(spec)
        if not base.accepted:
            print(f"FAIL {spec.id}: {'; '.join(base.failures)}")
            status = EXIT_REJECTED
            continue
        gen = check_generator(spec, seed=args.seed, trials=args.trials)
        if not gen.accepted:
            print(f"FAIL {spec.id}: {'; '.join(gen.failures)}")
            status = EXIT_REJECTED
            continue
        print(f"PASS {spec.id}")
    return status


def cmd_synthesize(args) -> int:
    spec = read_spec_file(args.spec)
    table = synthesize_table(spec, args.rows, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{spec.id}.csv"
    manifest_path = out / f"{spec.id}.manifest.json"
    manifest = write_table(table, csv_path, manifest_path)
    print(f"wrote {csv_path} ({table.n_rows} rows, sha256 {manifest['csv_sha256']})")
    return EXIT_OK


def cmd_features(args) -> int:
    spec = read_spec_file(args.spec)
    table = load_table(args.table, args.table_manifest, spec)
    matrix = engineer_features(table, spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{spec.id}.features.csv"
    manifest_path = out / f"{spec.id}.features.manifest.json"
    write_feature_matrix(matrix, csv_path, manifest_path)
    print(f"wrote {csv_path} ({matrix.n_rows} rows, {len(matrix.columns)} columns)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config = RunConfig(
        spec_paths=tuple(args.specs),
        out_dir=args.out_dir,
        models=tuple(args.models),
        n_rows=args.rows,
        caps=tuple(args.caps),
        splits=tuple(args.splits),
        seed_synthesis=args.seed_synthesis,
        seed_split=args.seed_split,
        seed_model=args.seed_model,
        standardize=not args.no_standardize,
        appendix_format=args.appendix_format,
        offline_icl=args.offline_icl,
        icl_endpoint=args.icl_endpoint,
        icl_model_name=args.icl_model,
        allow_any_cap=args.allow_any_cap,
        external_cmd=tuple(shlex.split(args.external_cmd)) if args.external_cmd else (),
        external_models=tuple(args.external_model),
    )
    try:
        config.validate()
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    report, report_path = run_sweep(config)
    cells = report["cells"]
    failed = sum(1 for c in cells if c["error"] is not None)
    print(f"wrote {report_path} ({len(cells)} cells, {failed} failed)")
    return EXIT_OK


def cmd_report(args) -> int:
    docs = [load_report(p) for p in args.reports]
    if args.predictions:
        if not (args.table and args.table_manifest):
            print(
                "error: --predictions needs --table and --table-manifest",
                file=sys.stderr,
            )
            return EXIT_USAGE
        cells = cells_from_prediction_files(
            args.predictions, args.table, args.table_manifest
        )
        seeds = {
            "synthesis": args.seed_synthesis,
            "split": args.seed_split,
            "model": args.seed_model,
        }
        doc = build_report(cells, aggregate_cells(cells), seeds)
        if args.out:
            write_report(doc, args.out)
            print(f"wrote {args.out} ({len(cells)} cells)")
        docs.append(doc)
    rows = summarize_reports(docs)
    if args.summary:
        write_summary_csv(rows, args.summary)
        print(f"wrote {args.summary} ({len(rows)} rows)")
    elif not args.out:
        import csv as csvmod

        from .report import SUMMARY_COLUMNS, _format_summary_value

        writer = csvmod.writer(sys.stdout, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            d = row.to_json_dict()
            writer.writerow([_format_summary_value(d[c]) for c in SUMMARY_COLUMNS])
    return EXIT_OK


def cmd_icl_serialize(args) -> int:
    spec = read_spec_file(args.spec)
    table = load_table(args.table, args.table_manifest, spec)
    manifest = load_split_manifest(args.split)
    if manifest.problem_id != spec.id:
        raise VertabError(
            f"split manifest is for {manifest.problem_id!r}, not {spec.id!r}"
        )
    context, queries = prompt_rows(table, manifest)
    style = STYLE_APPENDIX if args.appendix_format else STYLE_CANONICAL
    bundle = serialize_prompt(
        context, queries, spec.id, list(spec.slot_names), style=style
    )
    Path(args.out).write_text(bundle.prompt, encoding="utf-8")
    print(
        f"wrote {args.out} ({bundle.char_count} chars, {bundle.n_query} query rows)"
    )
    return EXIT_OK


def cmd_icl_parse(args) -> int:
    if args.expected < 1:
        print("error: --expected must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    text = Path(args.response).read_text(encoding="utf-8")
    predictions = parse_predictions(text, args.expected)
    payload = json.dumps(list(predictions))
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
        print(f"wrote {args.out} ({len(predictions)} predictions)")
    else:
        print(payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vertab",
        description="Verified tabular benchmark synthesis and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="gate operator files")
    p.add_argument("specs", nargs="+", help="operator JSON files")
    p.add_argument("--seed", type=int, default=7, help="generator check seed")
    p.add_argument("--trials", type=int, default=200, help="generator check draws")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("synthesize", help="emit a verified table")
    p.add_argument("--spec", required=True, help="operator JSON file")
    p.add_argument("--rows", type=int, default=2048, help="rows to synthesize")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED_SYNTHESIS)
    p.add_argument("--out-dir", required=True, help="directory for CSV + manifest")
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("features", help="engineer the feature matrix for a table")
    p.add_argument("--spec", required=True)
    p.add_argument("--table", required=True, help="table CSV")
    p.add_argument("--table-manifest", required=True, help="table manifest JSON")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("evaluate", help="run the full sweep")
    p.add_argument("specs", nargs="+", help="operator JSON files")
    p.add_argument("--out-dir", required=True)
    p.add_argument(
        "--models", nargs="+", default=list(MODEL_NAMES),
        help=f"model names (native: {', '.join(MODEL_NAMES)}; plus icl)",
    )
    p.add_argument("--rows", type=int, default=2048)
    p.add_argument("--caps", nargs="+", type=int, default=list(CAP_GRID))
    p.add_argument(
        "--splits", nargs="+", default=[SPLIT_RANDOM, SPLIT_OOD],
        choices=[SPLIT_RANDOM, SPLIT_OOD],
    )
    p.add_argument("--seed-synthesis", type=int, default=DEFAULT_SEED_SYNTHESIS)
    p.add_argument("--seed-split", type=int, default=DEFAULT_SEED_SPLIT)
    p.add_argument("--seed-model", type=int, default=DEFAULT_SEED_MODEL)
    p.add_argument("--no-standardize", action="store_true",
                   help="fit models on unscaled features")
    p.add_argument("--appendix-format", action="store_true",
                   help="colon-style prompt lines")
    p.add_argument("--offline-icl", help="directory of canned completion responses")
    p.add_argument("--icl-endpoint", help="chat-completion endpoint URL")
    p.add_argument("--icl-model", default="gpt-oss-120b", help="completion model id")
    p.add_argument("--allow-any-cap", action="store_true",
                   help="permit row caps outside the standard grid")
    p.add_argument("--external-cmd",
                   help="adapter command prefix for external models")
    p.add_argument("--external-model", action="append", default=[],
                   help="external model name (repeatable)")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="summarize reports, score prediction files")
    p.add_argument("reports", nargs="*", help="report JSON files to merge")
    p.add_argument("--predictions", action="append", default=[],
                   help="prediction file to score (repeatable)")
    p.add_argument("--table", help="table CSV the predictions refer to")
    p.add_argument("--table-manifest", help="its manifest JSON")
    p.add_argument("--out", help="write a report JSON built from --predictions")
    p.add_argument("--summary", help="write the merged summary CSV here")
    p.add_argument("--seed-synthesis", type=int, default=DEFAULT_SEED_SYNTHESIS)
    p.add_argument("--seed-split", type=int, default=DEFAULT_SEED_SPLIT)
    p.add_argument("--seed-model", type=int, default=DEFAULT_SEED_MODEL)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("icl", help="prompt serialization utilities")
    icl_sub = p.add_subparsers(dest="icl_command", required=True)

    q = icl_sub.add_parser("serialize", help="write the prompt for one split")
    q.add_argument("--spec", required=True)
    q.add_argument("--table", required=True)
    q.add_argument("--table-manifest", required=True)
    q.add_argument("--split", required=True, help="split manifest JSON")
    q.add_argument("--out", required=True, help="prompt text output path")
    q.add_argument("--appendix-format", action="store_true")
    q.set_defaults(fn=cmd_icl_serialize)

    q = icl_sub.add_parser("parse", help="extract predictions from a response")
    q.add_argument("--response", required=True, help="model response text file")
    q.add_argument("--expected", required=True, type=int,
                   help="expected prediction count")
    q.add_argument("--out", help="write predictions JSON here instead of stdout")
    q.set_defaults(fn=cmd_icl_parse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (VertabError, LangError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_REJECTED
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
