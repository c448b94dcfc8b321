"""End-to-end evaluation sweeps.

One sweep takes operator documents through synthesis, feature
engineering, row caps, splits, preprocessing, model fitting, and
metrics, leaving behind a directory of tables, split manifests,
prediction files, and a single report JSON.  Every per-cell failure is
recorded in the report instead of aborting the sweep.

Cells run sequentially: the model code is already vectorized, and a
fixed execution order keeps runs reproducible without any coordination.
All written paths are cell-unique, so a pool could be dropped in later
without files colliding.
"""

from __future__ import annotations

import json
import subprocess
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SchemaError, VertabError
from .oplang.errors import LangError
from .evaluation import (
    CAP_GRID,
    SPLIT_OOD,
    SPLIT_RANDOM,
    SplitManifest,
    apply_row_cap,
    context_matrix,
    fit_preprocessor,
    query_matrix,
    split_ood,
    split_random,
    transform,
    write_split_manifest,
)
from .features import engineer_features
from .icl import (
    STYLE_APPENDIX,
    STYLE_CANONICAL,
    CompletionClientConfig,
    offline_transport,
    request_predictions,
    serialize_prompt,
)
from .metrics import MetricSet, aggregate, compute_metric_set
from .models import MODEL_NAMES, ModelSpec, predict, train
from .opspec import OperatorSpec, load_spec
from .report import (
    build_report,
    load_predictions_file,
    make_cell,
    validate_predictions,
    write_predictions_file,
    write_report,
)
from .synthesis import sha256_of_file, synthesize_table, write_table

ICL_MODEL = "icl"
ICL_MAX_CAP = 128
DEFAULT_SEED_SYNTHESIS = 2025
DEFAULT_SEED_SPLIT = 2025
DEFAULT_SEED_MODEL = 42
PRODUCER = f"vertab {__version__}"


@dataclass(frozen=True)
class RunConfig:
    """Everything one sweep needs, with reproducible defaults."""

    spec_paths: tuple[str, ...]
    out_dir: str
    models: tuple[str, ...] = MODEL_NAMES
    n_rows: int = 2048
    caps: tuple[int, ...] = CAP_GRID
    splits: tuple[str, ...] = (SPLIT_RANDOM, SPLIT_OOD)
    seed_synthesis: int = DEFAULT_SEED_SYNTHESIS
    seed_split: int = DEFAULT_SEED_SPLIT
    seed_model: int = DEFAULT_SEED_MODEL
    standardize: bool = True
    appendix_format: bool = False
    offline_icl: str | None = None
    icl_endpoint: str | None = None
    icl_model_name: str = "gpt-oss-120b"
    allow_any_cap: bool = False
    external_cmd: tuple[str, ...] = ()
    external_models: tuple[str, ...] = ()

    def validate(self) -> None:
        if not self.spec_paths:
            raise ValueError("no operator files given")
        if self.n_rows < 1:
            raise ValueError(f"n_rows must be positive, got {self.n_rows}")
        if not self.caps:
            raise ValueError("no row caps given")
        if not self.allow_any_cap:
            off_grid = [c for c in self.caps if c not in CAP_GRID]
            if off_grid:
                raise ValueError(
                    f"row caps {off_grid} are outside the grid {list(CAP_GRID)}; "
                    "pass --allow-any-cap to override"
                )
        for kind in self.splits:
            if kind not in (SPLIT_RANDOM, SPLIT_OOD):
                raise ValueError(f"unknown split kind: {kind!r}")
        for name in self.models:
            if name != ICL_MODEL and name not in MODEL_NAMES:
                raise ValueError(f"unknown model name: {name!r}")
        if ICL_MODEL in self.models and not (self.offline_icl or self.icl_endpoint):
            raise ValueError(
                "model 'icl' needs a completion backend: --offline-icl or --icl-endpoint"
            )
        if self.external_models and not self.external_cmd:
            raise ValueError("external models need --external-cmd")

    @property
    def seeds(self) -> dict:
        return {
            "synthesis": self.seed_synthesis,
            "split": self.seed_split,
            "model": self.seed_model,
        }


def read_spec_file(path: str | Path) -> OperatorSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise FileNotFoundError(f"cannot read operator file {path}: {err}") from err
    return load_spec(text)


@dataclass
class ProblemData:
    """One operator's synthesized artifacts, shared by all its cells."""

    spec: OperatorSpec
    table: object
    matrix: object
    csv_path: Path
    manifest_path: Path
    table_sha256: str


def prepare_problem(spec: OperatorSpec, config: RunConfig) -> ProblemData:
    """Synthesize, persist, and featurize one operator's table."""
    out = Path(config.out_dir)
    table = synthesize_table(spec, config.n_rows, config.seed_synthesis)
    tables_dir = out / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    csv_path = tables_dir / f"{spec.id}.csv"
    manifest_path = tables_dir / f"{spec.id}.manifest.json"
    manifest = write_table(table, csv_path, manifest_path)
    matrix = engineer_features(table, spec)
    return ProblemData(
        spec=spec,
        table=table,
        matrix=matrix,
        csv_path=csv_path,
        manifest_path=manifest_path,
        table_sha256=manifest["csv_sha256"],
    )


def _prepare_rows(pre, rows: np.ndarray, standardize: bool) -> np.ndarray:
    if standardize:
        return transform(pre, rows)
    kept = rows[:, list(pre.kept)]
    median = np.asarray(pre.median)
    mask = np.isnan(kept)
    if mask.any():
        kept = np.where(mask, np.broadcast_to(median, kept.shape), kept)
    return kept


def _predictions_doc(
    problem_id: str,
    model: str,
    manifest: SplitManifest,
    table_sha256: str,
    predictions,
    source: str = "native",
) -> dict:
    return {
        "schema_version": 1,
        "kind": "predictions",
        "problem_id": problem_id,
        "model": model,
        "source": source,
        "cap": manifest.cap,
        "split": manifest.to_json_dict(),
        "table_sha256": table_sha256,
        "query_row_ids": sorted(manifest.query_row_ids),
        "predictions": [float(p) for p in predictions],
        "producer_version": PRODUCER,
    }


def _native_cell(
    data: ProblemData,
    model_name: str,
    manifest: SplitManifest,
    pre,
    Xc: np.ndarray,
    yc: np.ndarray,
    Xq: np.ndarray,
    yq: np.ndarray,
    config: RunConfig,
    paths: dict,
) -> dict:
    spec = ModelSpec(family=model_name, seed=config.seed_model)
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as grabbed:
        warnings.simplefilter("always")
        model = train(spec, Xc, yc)
        preds = predict(model, Xq)
    caught = [str(w.message) for w in grabbed]
    doc = _predictions_doc(
        data.spec.id, model_name, manifest, data.table_sha256, preds
    )
    validate_predictions(doc)
    write_predictions_file(doc, paths["abs"])
    metrics = compute_metric_set(preds, yq, pre.target_mean, pre.target_sd)
    return make_cell(
        problem_id=data.spec.id,
        model=model_name,
        split=manifest.kind,
        cap=manifest.cap,
        metrics=metrics,
        model_spec={"family": spec.family, "seed": spec.seed, "hyper": dict(spec.hyper)},
        n_context=manifest.n_context,
        n_query=manifest.n_query,
        predictions_path=paths["rel"],
        split_manifest_path=paths["split_rel"],
        table_sha256=data.table_sha256,
        warnings=caught or None,
    )


def prompt_rows(table, manifest: SplitManifest) -> tuple[list[dict], list[dict]]:
    """Context and query rows for prompt serialization.

    Queries come out in ascending row-id order, matching the prediction
    order every other path uses.
    """
    rows = table.rows
    context = [dict(rows[i].assignment, y=rows[i].y) for i in manifest.context_row_ids]
    queries = [dict(rows[i].assignment) for i in sorted(manifest.query_row_ids)]
    return context, queries


def _icl_transport(config: RunConfig):
    if config.offline_icl:
        return offline_transport(config.offline_icl), CompletionClientConfig(
            endpoint="offline", model=config.icl_model_name, max_retries=0
        )
    return None, CompletionClientConfig(
        endpoint=config.icl_endpoint, model=config.icl_model_name
    )


def _icl_cell(
    data: ProblemData,
    manifest: SplitManifest,
    pre,
    yq: np.ndarray,
    config: RunConfig,
    paths: dict,
) -> dict:
    if manifest.cap > ICL_MAX_CAP:
        raise VertabError(
            f"cap {manifest.cap} exceeds the in-context row limit of {ICL_MAX_CAP}"
        )
    slots = list(data.spec.slot_names)
    context, queries = prompt_rows(data.table, manifest)
    style = STYLE_APPENDIX if config.appendix_format else STYLE_CANONICAL
    bundle = serialize_prompt(context, queries, data.spec.id, slots, style=style)
    transport, client = _icl_transport(config)
    preds = request_predictions(client, bundle, transport)
    doc = _predictions_doc(data.spec.id, ICL_MODEL, manifest, data.table_sha256, preds)
    validate_predictions(doc)
    write_predictions_file(doc, paths["abs"])
    metrics = compute_metric_set(preds, yq, pre.target_mean, pre.target_sd)
    return make_cell(
        problem_id=data.spec.id,
        model=ICL_MODEL,
        split=manifest.kind,
        cap=manifest.cap,
        metrics=metrics,
        model_spec={"family": ICL_MODEL, "backend": client.model, "style": style},
        n_context=manifest.n_context,
        n_query=manifest.n_query,
        predictions_path=paths["rel"],
        split_manifest_path=paths["split_rel"],
        table_sha256=data.table_sha256,
    )


def _external_cell(
    data: ProblemData,
    model_name: str,
    manifest: SplitManifest,
    pre,
    yq: np.ndarray,
    config: RunConfig,
    paths: dict,
    split_path: Path,
) -> dict:
    argv = list(config.external_cmd) + [
        "--model", model_name,
        "--table", str(data.csv_path),
        "--table-manifest", str(data.manifest_path),
        "--split", str(split_path),
        "--out", str(paths["abs"]),
    ]
    proc = subprocess.run(argv, capture_output=True, text=True)
    if proc.returncode != 0:
        tail = (proc.stderr or proc.stdout).strip().splitlines()[-3:]
        raise VertabError(
            f"external adapter exited {proc.returncode}: {' | '.join(tail)}"
        )
    doc = load_predictions_file(paths["abs"])
    if doc["table_sha256"] != data.table_sha256:
        raise SchemaError("external prediction file references a different table")
    if doc["problem_id"] != data.spec.id:
        raise SchemaError("external prediction file is for a different problem")
    if doc["query_row_ids"] != sorted(manifest.query_row_ids):
        raise SchemaError("external prediction file answers different query rows")
    preds = np.array(doc["predictions"], dtype=np.float64)
    metrics = compute_metric_set(preds, yq, pre.target_mean, pre.target_sd)
    return make_cell(
        problem_id=data.spec.id,
        model=model_name,
        split=manifest.kind,
        cap=manifest.cap,
        metrics=metrics,
        source="external",
        n_context=manifest.n_context,
        n_query=manifest.n_query,
        predictions_path=paths["rel"],
        split_manifest_path=paths["split_rel"],
        table_sha256=data.table_sha256,
    )


def _error_cell(data, model_name, kind, cap, err, source="native") -> dict:
    return make_cell(
        problem_id=data.spec.id,
        model=model_name,
        split=kind,
        cap=cap,
        metrics=None,
        source=source,
        error=f"{type(err).__name__}: {err}",
        table_sha256=data.table_sha256,
    )


def evaluate_problem(data: ProblemData, config: RunConfig) -> list[dict]:
    """All cells for one operator: caps x splits x models."""
    out = Path(config.out_dir)
    split_dir = out / "splits" / data.spec.id
    pred_dir = out / "predictions" / data.spec.id
    split_dir.mkdir(parents=True, exist_ok=True)
    pred_dir.mkdir(parents=True, exist_ok=True)

    cells: list[dict] = []
    all_models = list(config.models) + list(config.external_models)
    for cap in config.caps:
        for kind in config.splits:
            try:
                capped = apply_row_cap(data.matrix, cap, config.seed_split)
                manifest = (
                    split_random(capped, config.seed_split)
                    if kind == SPLIT_RANDOM
                    else split_ood(capped)
                )
                split_path = split_dir / f"{kind}_{cap}.json"
                write_split_manifest(manifest, split_path)
                pre = fit_preprocessor(capped, manifest)
                ctx = context_matrix(capped, manifest)
                qry = query_matrix(capped, manifest)
                Xc = _prepare_rows(pre, ctx.X, config.standardize)
                Xq = _prepare_rows(pre, qry.X, config.standardize)
            except (VertabError, LangError) as err:
                for name in all_models:
                    cells.append(_error_cell(data, name, kind, cap, err))
                continue
            split_rel = str(split_path.relative_to(out))
            for name in all_models:
                pred_path = pred_dir / f"{name}_{kind}_{cap}.json"
                paths = {
                    "abs": pred_path,
                    "rel": str(pred_path.relative_to(out)),
                    "split_rel": split_rel,
                }
                try:
                    if name == ICL_MODEL:
                        cells.append(
                            _icl_cell(data, manifest, pre, qry.y, config, paths)
                        )
                    elif name in config.external_models:
                        cells.append(
                            _external_cell(
                                data, name, manifest, pre, qry.y, config, paths,
                                split_path,
                            )
                        )
                    else:
                        cells.append(
                            _native_cell(
                                data, name, manifest, pre, Xc, ctx.y, Xq, qry.y,
                                config, paths,
                            )
                        )
                except (VertabError, LangError, OSError) as err:
                    source = "external" if name in config.external_models else "native"
                    cells.append(
                        _error_cell(data, name, kind, cap, err, source=source)
                    )
    return cells


def aggregate_cells(cells: list[dict]) -> list:
    """Group successful cells by (model, split, cap) and summarize."""
    groups: dict[tuple, list] = {}
    for cell in cells:
        if cell.get("metrics") is None:
            continue
        key = (cell["model"], cell["split"], cell["cap"])
        groups.setdefault(key, []).append(MetricSet.from_json_dict(cell["metrics"]))
    rows = []
    for key in sorted(groups):
        model, split, cap = key
        rows.append(aggregate(model, split, cap, groups[key]))
    return rows


def run_sweep(config: RunConfig) -> tuple[dict, Path]:
    """Execute the whole sweep and write the report JSON."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells: list[dict] = []
    for path in config.spec_paths:
        spec = read_spec_file(path)
        data = prepare_problem(spec, config)
        cells.extend(evaluate_problem(data, config))
    report = build_report(cells, aggregate_cells(cells), config.seeds)
    report_path = out / "report.json"
    write_report(report, report_path)
    return report, report_path


def _read_y_column(csv_path: str | Path) -> np.ndarray:
    import csv as csvmod

    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csvmod.reader(fh)
        header = next(reader)
        if "y" not in header:
            raise SchemaError(f"{csv_path}: no y column in header")
        pos = header.index("y")
        return np.array([float(row[pos]) for row in reader], dtype=np.float64)


def _population_sd(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean((values - np.mean(values)) ** 2)))


def cells_from_prediction_files(
    pred_paths: list[str],
    table_csv: str | Path,
    table_manifest_path: str | Path,
) -> list[dict]:
    """Score prediction files (typically an external adapter's) against
    their table, producing report cells with freshly computed metrics.

    The table digest must match both the table manifest and every
    prediction file; context target statistics come from the split
    manifest embedded in each file, exactly as the native path computes
    them.
    """
    digest = sha256_of_file(table_csv)
    with open(table_manifest_path, encoding="utf-8") as fh:
        table_manifest = json.load(fh)
    if table_manifest.get("csv_sha256") != digest:
        raise SchemaError(f"{table_csv}: table digest mismatch with its manifest")
    problem_id = table_manifest.get("operator_id")
    y = _read_y_column(table_csv)

    cells = []
    for pred_path in pred_paths:
        doc = load_predictions_file(pred_path)
        if doc["problem_id"] != problem_id:
            raise SchemaError(
                f"{pred_path}: predictions are for {doc['problem_id']!r}, "
                f"table is {problem_id!r}"
            )
        if doc["table_sha256"] != digest:
            raise SchemaError(f"{pred_path}: table digest mismatch")
        manifest = SplitManifest.from_json_dict(doc["split"])
        ctx_ids = np.array(manifest.context_row_ids, dtype=np.int64)
        qry_ids = np.array(doc["query_row_ids"], dtype=np.int64)
        if ctx_ids.max(initial=-1) >= len(y) or qry_ids.max(initial=-1) >= len(y):
            raise SchemaError(f"{pred_path}: row ids exceed the table")
        target_mean = float(np.mean(y[ctx_ids]))
        target_sd = _population_sd(y[ctx_ids])
        preds = np.array(doc["predictions"], dtype=np.float64)
        try:
            metrics = compute_metric_set(preds, y[qry_ids], target_mean, target_sd)
            error = None
        except (VertabError, LangError) as err:
            metrics = None
            error = f"{type(err).__name__}: {err}"
        cells.append(
            make_cell(
                problem_id=problem_id,
                model=doc["model"],
                split=manifest.kind,
                cap=manifest.cap,
                metrics=metrics,
                source=doc["source"],
                error=error,
                n_context=manifest.n_context,
                n_query=manifest.n_query,
                predictions_path=str(pred_path),
                table_sha256=digest,
            )
        )
    return cells
