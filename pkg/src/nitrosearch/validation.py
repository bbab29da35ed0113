"""Input validation helpers shared by the index builders and estimators."""
from __future__ import annotations

import numbers

import numpy as np

MAX_SENTINEL = 2**32 - 1
"""Largest 32-bit value; reserved as padding and never a legal key."""

UINT32_MAX = 2**32 - 1


def _as_integer_array(X, name):
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        return np.zeros(0, dtype=np.uint32)
    if arr.dtype == object:
        try:
            arr = arr.astype(np.int64)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"{name} must contain integers") from exc
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.floor(arr)):
            raise ValueError(f"{name} must contain integers")
        arr = arr.astype(np.int64)
    elif arr.dtype.kind == "b":
        arr = arr.astype(np.int64)
    elif arr.dtype.kind not in "iu":
        raise ValueError(f"{name} must contain integers, got dtype {arr.dtype}")
    return arr


def check_keys(X, name="keys"):
    """Return ``X`` as a uint32 array, rejecting the sentinel and out-of-range values."""
    arr = _as_integer_array(X, name)
    if arr.size and arr.dtype != np.uint32:
        lo, hi = int(arr.min()), int(arr.max())
        if lo < 0 or hi > UINT32_MAX:
            raise ValueError(f"{name} must fit in 32 unsigned bits")
    arr = arr.astype(np.uint32, copy=False)
    if arr.size and int(arr.max()) == MAX_SENTINEL:
        raise ValueError(f"{name} may not contain the reserved sentinel {MAX_SENTINEL}")
    return arr


def check_values(y, n, name="values"):
    if y is None:
        return np.arange(n, dtype=np.uint32)
    arr = _as_integer_array(y, name)
    if arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if arr.size and arr.dtype != np.uint32:
        lo, hi = int(arr.min()), int(arr.max())
        if lo < 0 or hi > UINT32_MAX:
            raise ValueError(f"{name} must fit in 32 unsigned bits")
    return arr.astype(np.uint32, copy=False)


def check_key(key):
    """Validate one query key. Any value in [0, 2**32) is a legal query."""
    if isinstance(key, (bool, np.bool_)) or not isinstance(key, (numbers.Integral, np.integer)):
        raise TypeError(f"query key must be an integer, got {type(key).__name__}")
    key = int(key)
    if key < 0 or key > UINT32_MAX:
        raise ValueError(f"query key {key} does not fit in 32 unsigned bits")
    return key


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_queries(X, name="queries"):
    """Query keys as int64; the sentinel is allowed (it simply never matches)."""
    arr = _as_integer_array(X, name).astype(np.int64, copy=False)
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) > UINT32_MAX):
        raise ValueError(f"{name} must fit in 32 unsigned bits")
    return arr
