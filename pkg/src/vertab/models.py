"""Baseline regressors with seeded, platform-stable determinism.

Families: mean, ols (ridge-damped normal equations), knn, cart, random
forest, and two gradient-boosting profiles.  mean/knn/cart/rf predictions
are convex combinations of training targets and are clamped to the
training range, so they provably cannot extrapolate; the boosters can
leave the range and are only required to stay finite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .bulkrand import bulk_indices, feature_keys
from .errors import SchemaError
from .oplang.rng import derive_state
from .trees import BinnedFeatures, Tree, bin_features, grow_forest, grow_tree

MODEL_NAMES = ("mean", "ols", "knn", "cart", "rf", "gbt-xgb", "gbt-cat")

RANGE_BOUNDED_FAMILIES = frozenset({"mean", "knn", "cart", "rf"})

_MAX_TREE_DEPTH = 60  # keeps the (tree, depth) stream counter packable


class DegenerateDataWarning(UserWarning):
    """Training data had no usable feature columns; fell back to mean."""


@dataclass(frozen=True)
class ModelSpec:
    family: str
    seed: int = 42
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in MODEL_NAMES:
            raise SchemaError(f"unknown model family {self.family!r}; know {MODEL_NAMES}")
        merged = dict(_DEFAULT_HYPER[self.family])
        unknown = set(self.hyper) - set(merged)
        if unknown:
            raise SchemaError(f"{self.family}: unknown hyperparameters {sorted(unknown)}")
        merged.update(self.hyper)
        for name, v in merged.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
                raise SchemaError(f"{self.family}: {name} must be positive, got {v!r}")
        lr = merged.get("learning_rate")
        if lr is not None and lr > 1:
            raise SchemaError(f"{self.family}: learning_rate must be in (0, 1], got {lr}")
        ff = merged.get("feature_fraction")
        if ff is not None and ff > 1:
            raise SchemaError(f"{self.family}: feature_fraction must be in (0, 1], got {ff}")
        depth = merged.get("max_depth")
        if depth is not None and depth > _MAX_TREE_DEPTH:
            raise SchemaError(f"{self.family}: max_depth must be <= {_MAX_TREE_DEPTH}")
        object.__setattr__(self, "hyper", merged)

    def __getitem__(self, name):
        return self.hyper[name]


_DEFAULT_HYPER = {
    "mean": {},
    "ols": {},
    "knn": {"k": 5},
    "cart": {"max_depth": 16, "min_samples_leaf": 1},
    "rf": {"n_trees": 500, "max_depth": 12, "min_samples_leaf": 1, "feature_fraction": 1 / 3},
    "gbt-xgb": {"n_estimators": 600, "learning_rate": 0.05, "max_depth": 8},
    "gbt-cat": {"n_estimators": 500, "learning_rate": 0.05, "max_depth": 6},
}


def default_spec(family: str, seed: int = 42) -> ModelSpec:
    return ModelSpec(family=family, seed=seed)


@dataclass
class TrainedModel:
    family: str  # family actually used for prediction
    requested_family: str
    n_features: int
    y_min: float
    y_max: float
    degenerate: bool
    _state: dict

    def predict(self, X) -> np.ndarray:
        return predict(self, X)


def train(spec: ModelSpec, X, y) -> TrainedModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise SchemaError(f"X must be 2-dimensional, got shape {X.shape}")
    if len(y) != X.shape[0]:
        raise SchemaError(f"{X.shape[0]} rows but {len(y)} targets")
    if X.shape[0] == 0:
        raise SchemaError("cannot train on zero rows")

    family = spec.family
    degenerate = X.shape[1] == 0 and family != "mean"
    if degenerate:
        warnings.warn(
            f"{spec.family}: no feature columns left after preprocessing; using the mean",
            DegenerateDataWarning,
            stacklevel=2,
        )
        family = "mean"

    state = _FITTERS[family](spec, X, y)
    return TrainedModel(
        family=family,
        requested_family=spec.family,
        n_features=X.shape[1],
        y_min=float(y.min()),
        y_max=float(y.max()),
        degenerate=degenerate,
        _state=state,
    )


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise SchemaError(f"X must be 2-dimensional, got shape {X.shape}")
    if X.shape[1] != model.n_features and model.family != "mean":
        raise SchemaError(
            f"model was trained on {model.n_features} columns, got {X.shape[1]}"
        )
    out = _PREDICTORS[model.family](model._state, X)
    if model.family in RANGE_BOUNDED_FAMILIES:
        # the estimate is already a convex combination of training
        # targets; clipping only irons out float wobble at the edges
        out = np.clip(out, model.y_min, model.y_max)
    return out


# mean ----------------------------------------------------------------

def _fit_mean(spec, X, y):
    return {"value": float(y.mean())}


def _predict_mean(state, X):
    return np.full(X.shape[0], state["value"])


# ols -----------------------------------------------------------------

_RIDGE = 1e-8


def _fit_ols(spec, X, y):
    A = np.column_stack([X, np.ones(X.shape[0])])
    gram = A.T @ A
    gram[np.diag_indices_from(gram)] += _RIDGE
    beta = np.linalg.solve(gram, A.T @ y)
    return {"coefficients": beta[:-1], "intercept": float(beta[-1])}


def _predict_ols(state, X):
    return X @ state["coefficients"] + state["intercept"]


# knn -----------------------------------------------------------------

def _fit_knn(spec, X, y):
    return {"X": X.copy(), "y": y.copy(), "k": int(spec["k"])}


def _predict_knn(state, X):
    train_X, train_y = state["X"], state["y"]
    k = min(state["k"], len(train_y))
    d2 = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * (X @ train_X.T)
        + np.sum(train_X * train_X, axis=1)[None, :]
    )
    # stable ordering makes neighbor ties deterministic: lowest index wins
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return train_y[order].mean(axis=1)


# cart ----------------------------------------------------------------

def _fit_cart(spec, X, y):
    binned = bin_features(X)
    tree = grow_tree(
        binned,
        y,
        np.arange(X.shape[0]),
        max_depth=int(spec["max_depth"]),
        min_samples_leaf=int(spec["min_samples_leaf"]),
    )
    return {"tree": tree}


def _predict_cart(state, X):
    return state["tree"].predict(X)


# random forest --------------------------------------------------------

def _rf_feature_mask(seed: int, tree_index: int, n_features: int, fraction: float):
    k = max(1, int(n_features * fraction))
    if k >= n_features:
        return None

    def mask_fn(depth: int, n_nodes: int):
        state = derive_state("rf", "feature_subset", seed, tree_index * (_MAX_TREE_DEPTH + 1) + depth)
        keys = feature_keys(state, n_nodes, n_features)
        chosen = np.argpartition(keys, k - 1, axis=1)[:, :k]
        mask = np.zeros((n_nodes, n_features), dtype=bool)
        mask[np.arange(n_nodes)[:, None], chosen] = True
        return mask

    return mask_fn


# trees grown per grow_forest batch; bounds level-loop working memory
_RF_CHUNK = 32


def _fit_rf(spec, X, y):
    n = X.shape[0]
    binned = bin_features(X)
    trees: list[Tree] = []
    for first in range(0, int(spec["n_trees"]), _RF_CHUNK):
        batch = range(first, min(first + _RF_CHUNK, int(spec["n_trees"])))
        row_sets = [
            bulk_indices(derive_state("rf", "bootstrap", spec.seed, t), n, n)
            for t in batch
        ]
        mask_fns = [
            _rf_feature_mask(spec.seed, t, X.shape[1], float(spec["feature_fraction"]))
            for t in batch
        ]
        if any(fn is not None for fn in mask_fns):
            def fmf(i, depth, m, _fns=mask_fns):
                fn = _fns[i]
                return fn(depth, m) if fn is not None else None
        else:
            fmf = None
        trees.extend(
            grow_forest(
                binned,
                y,
                row_sets,
                max_depth=int(spec["max_depth"]),
                min_samples_leaf=int(spec["min_samples_leaf"]),
                feature_mask_fn=fmf,
            )
        )
    return {"trees": trees}


def _predict_rf(state, X):
    total = np.zeros(X.shape[0])
    for tree in state["trees"]:
        total += tree.predict(X)
    return total / len(state["trees"])


# gradient boosting ------------------------------------------------------

def _fit_gbt(spec, X, y):
    binned = bin_features(X)
    base = float(y.mean())
    lr = float(spec["learning_rate"])
    rows = np.arange(X.shape[0])
    current = np.full(X.shape[0], base)
    trees: list[Tree] = []
    for _ in range(int(spec["n_estimators"])):
        residual = y - current
        tree = grow_tree(binned, residual, rows, max_depth=int(spec["max_depth"]))
        trees.append(tree)
        current += lr * tree.predict(X)
    return {"base": base, "learning_rate": lr, "trees": trees}


def _predict_gbt(state, X):
    out = np.full(X.shape[0], state["base"])
    lr = state["learning_rate"]
    for tree in state["trees"]:
        out += lr * tree.predict(X)
    return out


_FITTERS = {
    "mean": _fit_mean,
    "ols": _fit_ols,
    "knn": _fit_knn,
    "cart": _fit_cart,
    "rf": _fit_rf,
    "gbt-xgb": _fit_gbt,
    "gbt-cat": _fit_gbt,
}

_PREDICTORS = {
    "mean": _predict_mean,
    "ols": _predict_ols,
    "knn": _predict_knn,
    "cart": _predict_cart,
    "rf": _predict_rf,
    "gbt-xgb": _predict_gbt,
    "gbt-cat": _predict_gbt,
}
