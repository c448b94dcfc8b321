"""Row caps, context/query splits, and leak-free preprocessing.

Caps come first, always.  RANDOM splits shuffle with a seeded stream;
OOD splits sort by (target, original row id) and hand the top fifth to
the query side, so every query target is at least every context target.
The preprocessor is fitted from context rows only and that is checkable:
refitting from the context alone reproduces it bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyContextError, SchemaError
from .features import FeatureMatrix
from .oplang import RngState
from .oplang.errors import RangeError

SPLIT_RANDOM = "RANDOM"
SPLIT_OOD = "OOD"
CAP_GRID = (32, 64, 128, 256, 512, 1024, 2048)
QUERY_DENOMINATOR = 5


@dataclass(frozen=True)
class SplitManifest:
    problem_id: str
    kind: str  # RANDOM or OOD
    cap: int
    seed: int | None  # None for OOD, which is seed-free
    context_row_ids: tuple[int, ...]
    query_row_ids: tuple[int, ...]
    boundary: float | None  # OOD only: max context target

    @property
    def n_context(self) -> int:
        return len(self.context_row_ids)

    @property
    def n_query(self) -> int:
        return len(self.query_row_ids)

    def to_json_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "kind": self.kind,
            "cap": self.cap,
            "seed": self.seed,
            "context_row_ids": list(self.context_row_ids),
            "query_row_ids": list(self.query_row_ids),
            "boundary": self.boundary,
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "SplitManifest":
        try:
            return cls(
                problem_id=raw["problem_id"],
                kind=raw["kind"],
                cap=raw["cap"],
                seed=raw["seed"],
                context_row_ids=tuple(int(i) for i in raw["context_row_ids"]),
                query_row_ids=tuple(int(i) for i in raw["query_row_ids"]),
                boundary=raw["boundary"],
            )
        except KeyError as err:
            raise SchemaError(f"split manifest is missing field {err.args[0]!r}") from err


def write_split_manifest(manifest: SplitManifest, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_split_manifest(path: Path | str) -> SplitManifest:
    return SplitManifest.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def apply_row_cap(matrix: FeatureMatrix, cap: int, seed: int) -> FeatureMatrix:
    """Uniform subsample without replacement, keeping original row order."""
    n = matrix.n_rows
    if cap <= 0:
        raise RangeError(f"row cap must be positive, got {cap}")
    if cap > n:
        raise RangeError(f"row cap {cap} exceeds available rows {n}")
    if cap == n:
        return matrix.take(np.arange(n, dtype=np.int64))
    rng = RngState.derive(matrix.problem_id, "row_cap", seed)
    idx = list(range(n))
    for i in range(cap):
        j = rng.randint(i, n - 1)
        idx[i], idx[j] = idx[j], idx[i]
    chosen = sorted(idx[:cap])
    return matrix.take(np.array(chosen, dtype=np.int64))


def _query_size(n: int) -> int:
    return n // QUERY_DENOMINATOR


def split_random(matrix: FeatureMatrix, seed: int) -> SplitManifest:
    """Seeded shuffle; one fifth (floored) becomes the query set."""
    n = matrix.n_rows
    if n < QUERY_DENOMINATOR:
        raise RangeError(f"need at least {QUERY_DENOMINATOR} rows to split, got {n}")
    rng = RngState.derive(matrix.problem_id, "split_random", seed)
    order = list(range(n))
    for i in range(n - 1):
        j = rng.randint(i, n - 1)
        order[i], order[j] = order[j], order[i]
    q = _query_size(n)
    query_pos = order[:q]
    context_pos = order[q:]
    ids = matrix.row_ids
    return SplitManifest(
        problem_id=matrix.problem_id,
        kind=SPLIT_RANDOM,
        cap=n,
        seed=seed,
        context_row_ids=tuple(sorted(int(ids[p]) for p in context_pos)),
        query_row_ids=tuple(sorted(int(ids[p]) for p in query_pos)),
        boundary=None,
    )


def split_ood(matrix: FeatureMatrix) -> SplitManifest:
    """Deterministic target-sorted split: the largest fifth of targets is
    the query set, ties broken by original row id."""
    n = matrix.n_rows
    if n < QUERY_DENOMINATOR:
        raise RangeError(f"need at least {QUERY_DENOMINATOR} rows to split, got {n}")
    ids = matrix.row_ids
    order = sorted(range(n), key=lambda p: (matrix.y[p], int(ids[p])))
    q = _query_size(n)
    context_pos = order[: n - q]
    query_pos = order[n - q:]
    boundary = float(matrix.y[context_pos[-1]])
    return SplitManifest(
        problem_id=matrix.problem_id,
        kind=SPLIT_OOD,
        cap=n,
        seed=None,
        context_row_ids=tuple(sorted(int(ids[p]) for p in context_pos)),
        query_row_ids=tuple(sorted(int(ids[p]) for p in query_pos)),
        boundary=boundary,
    )


def context_matrix(matrix: FeatureMatrix, manifest: SplitManifest) -> FeatureMatrix:
    return matrix.take(matrix.positions_of(manifest.context_row_ids))


def query_matrix(matrix: FeatureMatrix, manifest: SplitManifest) -> FeatureMatrix:
    return matrix.take(matrix.positions_of(manifest.query_row_ids))


@dataclass(frozen=True)
class Preprocessor:
    """Context-fitted column scaler.

    Only columns with positive context standard deviation survive, which
    also removes anything constant over the capped table.  Statistics are
    stored as plain tuples so two fits from identical context rows compare
    equal bit for bit.
    """

    column_names: tuple[str, ...]
    kept: tuple[int, ...]  # indices into the original column order
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    median: tuple[float, ...]
    target_mean: float
    target_sd: float

    @property
    def kept_names(self) -> tuple[str, ...]:
        return tuple(self.column_names[i] for i in self.kept)


def _population_sd(arr: np.ndarray, axis=0) -> np.ndarray:
    return np.sqrt(np.mean((arr - np.mean(arr, axis=axis, keepdims=True)) ** 2, axis=axis))


def fit_preprocessor(matrix: FeatureMatrix, manifest: SplitManifest) -> Preprocessor:
    if manifest.problem_id != matrix.problem_id:
        raise SchemaError(
            f"split manifest is for {manifest.problem_id!r}, not {matrix.problem_id!r}"
        )
    if manifest.n_context == 0:
        raise EmptyContextError("split manifest has no context rows")
    ctx = context_matrix(matrix, manifest)
    X = ctx.X
    mean = np.mean(X, axis=0)
    sd = _population_sd(X)
    kept = tuple(int(i) for i in np.flatnonzero(sd > 0.0))
    median = np.median(X, axis=0)
    y = ctx.y
    return Preprocessor(
        column_names=matrix.column_names,
        kept=kept,
        mean=tuple(float(mean[i]) for i in kept),
        sd=tuple(float(sd[i]) for i in kept),
        median=tuple(float(median[i]) for i in kept),
        target_mean=float(np.mean(y)),
        target_sd=float(_population_sd(y)),
    )


def transform(pre: Preprocessor, rows: np.ndarray) -> np.ndarray:
    """Impute missing values with the context median, then z-score.

    ``rows`` must be laid out like the matrix the preprocessor was fitted
    on; the result holds kept columns only.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != len(pre.column_names):
        raise SchemaError(
            f"expected rows with {len(pre.column_names)} columns, got shape {rows.shape}"
        )
    out = rows[:, list(pre.kept)].copy()
    median = np.array(pre.median)
    missing = np.isnan(out)
    if missing.any():
        out[missing] = np.broadcast_to(median, out.shape)[missing]
    return (out - np.array(pre.mean)) / np.array(pre.sd)
