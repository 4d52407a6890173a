"""Input validation helpers shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


def check_probabilities(probs, name="probs"):
    """Return ``probs`` as a 1-d float array with every entry in [0, 1]."""
    arr = np.asarray(probs, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must contain at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    return arr


def check_probability(p, name="p"):
    if not isinstance(p, numbers.Real) or not 0.0 <= float(p) <= 1.0:
        raise ValueError(f"{name} must be a probability in [0, 1], got {p!r}")
    return float(p)


def check_state(x, n):
    """Coerce a state vector to a boolean array of length ``n``."""
    arr = np.asarray(x)
    if arr.shape != (n,):
        raise ValueError(f"state vector must have shape ({n},), got {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise ValueError("state vector entries must be 0/1")
        arr = arr.astype(bool)
    return arr


def check_states(X, n):
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError(f"state matrix must have shape (m, {n}), got {arr.shape}")
    return arr.astype(bool, copy=False)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_generator(seed):
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
