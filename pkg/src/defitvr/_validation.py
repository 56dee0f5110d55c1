"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import SchemaError
from .snapshot import Snapshot


def check_snapshot(obj) -> Snapshot:
    if not isinstance(obj, Snapshot):
        raise TypeError(f"expected a Snapshot, got {type(obj).__name__}")
    return obj.validate()


def check_snapshots(X) -> list[Snapshot]:
    if isinstance(X, Snapshot):
        return [check_snapshot(X)]
    return [check_snapshot(s) for s in X]


def check_decline_grid(X) -> np.ndarray:
    """1-d float array of declines in [0, 1]; accepts lists, (n,) or (n, 1) arrays."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"declines must be 1-d or a single column, got shape {arr.shape}")
    arr = check_array(arr.reshape(-1, 1), ensure_min_samples=1)[:, 0]
    if np.any((arr < 0) | (arr > 1)):
        raise SchemaError("declines must lie in [0, 1]", "X")
    return arr
