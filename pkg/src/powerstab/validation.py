"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .trace import PowerTrace


def check_power_matrix(X) -> np.ndarray:
    """Coerce ``X`` to a finite, non-negative float array of shape (n_timesteps, n_devices).

    A 1-D input is read as a single device.
    """
    X = np.asarray(X, dtype=float) if not hasattr(X, "shape") else X
    if np.ndim(X) == 1:
        X = np.reshape(X, (-1, 1))
    X = check_array(X, dtype=np.float64, ensure_min_samples=2, copy=True)
    if np.any(X < 0):
        raise ValueError("power samples must be non-negative")
    return X


def check_dt(dt) -> float:
    dt = float(dt)
    if not (np.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    return dt


def check_n_features(estimator, X: np.ndarray) -> None:
    if X.shape[1] != estimator.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} columns; {type(estimator).__name__} "
                         f"was fitted with {estimator.n_features_in_}")


def column_traces(X: np.ndarray, dt: float) -> list[PowerTrace]:
    return [PowerTrace(dt, X[:, j]) for j in range(X.shape[1])]
