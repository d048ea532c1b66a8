"""Small input-check helpers shared across the package."""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_float_array",
    "check_same_length",
    "check_positive",
    "check_nonnegative",
    "check_in_range",
]


def as_float_array(values, name: str) -> np.ndarray:
    """Coerce to a 1-D float array, rejecting NaN and infinities."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_same_length(*named_arrays) -> int:
    """Verify all (name, array) pairs share one length and return it."""
    lengths = {name: len(arr) for name, arr in named_arrays}
    if len(set(lengths.values())) > 1:
        raise ValueError(f"length mismatch: {lengths}")
    return next(iter(lengths.values()))


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_nonnegative(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def check_in_range(value: float, name: str, low: float, high: float,
                   include_low: bool = True, include_high: bool = False) -> float:
    value = float(value)
    ok_low = value >= low if include_low else value > low
    ok_high = value <= high if include_high else value < high
    if not (np.isfinite(value) and ok_low and ok_high):
        lo_b = "[" if include_low else "("
        hi_b = "]" if include_high else ")"
        raise ValueError(f"{name} must lie in {lo_b}{low}, {high}{hi_b}, got {value}")
    return value
