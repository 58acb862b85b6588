"""Small input-checking helpers shared by the estimators and solvers."""

import numbers

import numpy as np
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

__all__ = ["NotFittedError", "check_is_fitted", "check_positive", "check_in_interval",
           "check_increasing", "check_points"]


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_in_interval(value, name, low, high, *, closed=(False, False)):
    value = float(value)
    lo_ok = value >= low if closed[0] else value > low
    hi_ok = value <= high if closed[1] else value < high
    if not (lo_ok and hi_ok):
        left = "[" if closed[0] else "("
        right = "]" if closed[1] else ")"
        raise ValueError(f"{name} must lie in {left}{low}, {high}{right}, got {value!r}")
    return value


def check_increasing(values, name, *, strict=True):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    diffs = np.diff(arr)
    if strict and np.any(diffs <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if not strict and np.any(diffs < 0):
        raise ValueError(f"{name} must be non-decreasing")
    return arr


def check_points(x, dim, name="x"):
    """Return ``x`` as a float array of shape (..., dim)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise ValueError(f"{name} must have trailing dimension {dim}, got shape {arr.shape}")
    return arr
