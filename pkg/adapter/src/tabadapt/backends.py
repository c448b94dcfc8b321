"""Prediction backends keyed by the --model flag.

A backend is a callable (Xc, yc, Xq) -> predictions.  Import errors
for optional libraries surface as AdapterError so a missing backend is
reported instead of silently skipped.
"""

from __future__ import annotations

import numpy as np

from .errors import AdapterError


def _predict_dummy_mean(Xc: np.ndarray, yc: np.ndarray, Xq: np.ndarray) -> np.ndarray:
    """Context target mean repeated for every query row."""
    return np.full(Xq.shape[0], float(yc.mean()))


def _predict_hist_gbt(Xc: np.ndarray, yc: np.ndarray, Xq: np.ndarray) -> np.ndarray:
    """Histogram gradient boosted trees from scikit-learn.

    Library defaults except a pinned random_state so reruns match.
    NaN cells (unseen categories, unparseable numbers) are handled by
    the library's native missing-value support.
    """
    try:
        from sklearn.ensemble import HistGradientBoostingRegressor
    except ImportError as err:
        raise AdapterError(
            f"model 'hist-gbt' needs scikit-learn installed: {err}"
        ) from err
    model = HistGradientBoostingRegressor(random_state=0)
    model.fit(Xc, yc)
    return model.predict(Xq)


_BACKENDS = {
    "dummy-mean": _predict_dummy_mean,
    "hist-gbt": _predict_hist_gbt,
}

BACKEND_NAMES = tuple(sorted(_BACKENDS))


def lookup_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise AdapterError(
            f"unknown model {name!r}; available: {', '.join(BACKEND_NAMES)}"
        ) from None
