"""Small input-validation helpers shared by the estimators."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def as_vector(name: str, v, expect_len: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-d float array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr.ravel()
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    if expect_len is not None and arr.shape[0] != expect_len:
        raise DataError(f"{name} has length {arr.shape[0]}, expected {expect_len}")
    return arr


def as_matrix(name: str, m, min_cols: int = 0, expect_rows: int | None = None) -> np.ndarray:
    """Coerce to a finite 2-d float array (1-d input becomes a single column)."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DataError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.shape[1] < min_cols:
        raise DataError(f"{name} needs at least {min_cols} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    if expect_rows is not None and arr.shape[0] != expect_rows:
        raise DataError(f"{name} has {arr.shape[0]} rows, expected {expect_rows}")
    return arr
