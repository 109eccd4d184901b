"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import OutOfRangeError, SizeMismatchError


def check_samples(x, min_rows: int = 1) -> np.ndarray:
    """Coerce to a finite float64 2-d array with at least ``min_rows`` rows."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise SizeMismatchError(f"expected a 2-d sample array, got ndim={arr.ndim}")
    if arr.shape[0] < min_rows:
        raise SizeMismatchError(f"need at least {min_rows} sample rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise SizeMismatchError("sample array has no columns")
    if not np.all(np.isfinite(arr)):
        raise OutOfRangeError("sample array contains non-finite entries")
    return arr


def check_vector(v, dim: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape != (dim,):
        raise SizeMismatchError(f"{name} must have length {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise OutOfRangeError(f"{name} contains non-finite entries")
    return arr


def check_open_unit(value: float, name: str, upper: float = 1.0) -> float:
    value = float(value)
    if not 0.0 < value < upper:
        raise OutOfRangeError(f"{name} must lie in (0, {upper}), got {value}")
    return value
