"""Scoring: rounded exact-match consistency, standardized regression
metrics, and cross-problem aggregation.

Consistency counts predictions that round to the same integer as the
target, with half-away-from-zero rounding on both sides.  R2/RMSE/MAE
are computed after standardizing both series with the context-fitted
target mean and sd; R2 is measured about the query-set mean and becomes
null when the query targets have zero variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError
from .oplang.interp import round_half_away
from .oplang.errors import RangeError


@dataclass(frozen=True)
class MetricSet:
    rounded_consistency: float
    r2: float | None
    rmse: float
    mae: float
    n_query: int
    null_variance: bool

    def to_json_dict(self) -> dict:
        return {
            "rounded_consistency": self.rounded_consistency,
            "r2": self.r2,
            "rmse": self.rmse,
            "mae": self.mae,
            "n_query": self.n_query,
            "null_variance": self.null_variance,
        }

    @classmethod
    def from_json_dict(cls, raw: dict) -> "MetricSet":
        return cls(
            rounded_consistency=raw["rounded_consistency"],
            r2=raw["r2"],
            rmse=raw["rmse"],
            mae=raw["mae"],
            n_query=raw["n_query"],
            null_variance=raw["null_variance"],
        )


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise LengthMismatchError(f"{name} must be one-dimensional")
    return arr


def rounded_consistency(predictions, targets) -> float:
    """Fraction of predictions that round to the rounded target."""
    p = _as_float_array(predictions, "predictions")
    t = _as_float_array(targets, "targets")
    if len(p) != len(t):
        raise LengthMismatchError(f"{len(p)} predictions vs {len(t)} targets")
    if len(p) == 0:
        raise LengthMismatchError("need at least one prediction")
    hits = sum(1 for a, b in zip(p, t) if round_half_away(float(a)) == round_half_away(float(b)))
    return hits / len(p)


def regression_metrics(predictions, targets, target_mean: float, target_sd: float):
    """(r2, rmse, mae) on the standardized target scale.

    r2 is None when the query targets are all equal (SS_tot = 0).
    """
    p = _as_float_array(predictions, "predictions")
    t = _as_float_array(targets, "targets")
    if len(p) != len(t):
        raise LengthMismatchError(f"{len(p)} predictions vs {len(t)} targets")
    if len(p) == 0:
        raise LengthMismatchError("need at least one prediction")
    if not target_sd > 0:
        raise RangeError(f"target standard deviation must be positive, got {target_sd}")
    pz = (p - target_mean) / target_sd
    tz = (t - target_mean) / target_sd
    residual = pz - tz
    rmse = float(np.sqrt(np.mean(residual**2)))
    mae = float(np.mean(np.abs(residual)))
    ss_res = float(np.sum(residual**2))
    ss_tot = float(np.sum((tz - tz.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return r2, rmse, mae


def compute_metric_set(predictions, targets, target_mean: float, target_sd: float) -> MetricSet:
    consistency = rounded_consistency(predictions, targets)
    r2, rmse, mae = regression_metrics(predictions, targets, target_mean, target_sd)
    return MetricSet(
        rounded_consistency=consistency,
        r2=r2,
        rmse=rmse,
        mae=mae,
        n_query=len(np.asarray(predictions)),
        null_variance=r2 is None,
    )


@dataclass(frozen=True)
class AggregateRow:
    model: str
    split: str
    cap: int
    n_problems: int
    mean_consistency: float
    median_consistency: float
    sd_consistency: float
    ci_lo: float | None
    ci_hi: float | None
    median_r2: float | None
    median_rmse: float | None
    median_mae: float | None

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "split": self.split,
            "cap": self.cap,
            "n_problems": self.n_problems,
            "mean_consistency": self.mean_consistency,
            "median_consistency": self.median_consistency,
            "sd_consistency": self.sd_consistency,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "median_r2": self.median_r2,
            "median_rmse": self.median_rmse,
            "median_mae": self.median_mae,
        }


def _median(values: list[float]) -> float:
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def _population_sd(values: list[float], mean: float) -> float:
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def confidence_interval(values: list[float]) -> tuple[float, float] | None:
    """Normal-approximation 95% interval for the mean; None below two
    samples."""
    n = len(values)
    if n < 2:
        return None
    ordered = sorted(values)
    mean = sum(ordered) / n
    half = 1.96 * _population_sd(ordered, mean) / math.sqrt(n)
    return (mean - half, mean + half)


def aggregate(model: str, split: str, cap: int, cells: list[MetricSet]) -> AggregateRow:
    """Collapse per-problem metric sets into one summary row.

    Sums run over sorted values so the result is exactly permutation
    invariant, not merely up to float reassociation.
    """
    if not cells:
        raise LengthMismatchError("cannot aggregate zero problems")
    consistency = sorted(c.rounded_consistency for c in cells)
    mean_c = sum(consistency) / len(consistency)
    ci = confidence_interval(consistency)
    r2s = [c.r2 for c in cells if c.r2 is not None]
    return AggregateRow(
        model=model,
        split=split,
        cap=cap,
        n_problems=len(cells),
        mean_consistency=mean_c,
        median_consistency=_median(consistency),
        sd_consistency=_population_sd(consistency, mean_c),
        ci_lo=None if ci is None else ci[0],
        ci_hi=None if ci is None else ci[1],
        median_r2=_median(r2s) if r2s else None,
        median_rmse=_median([c.rmse for c in cells]),
        median_mae=_median([c.mae for c in cells]),
    )
