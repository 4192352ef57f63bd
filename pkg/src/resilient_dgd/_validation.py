"""Input validation helpers shared by the public API."""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np


def check_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_square(a, dim: int | None = None, name: str = "A") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_agent_subset(subset: Iterable[int], n: int, name: str = "subset") -> tuple[int, ...]:
    """Normalize an agent-id collection to a sorted tuple of distinct ids in ``[0, n)``."""
    ids = sorted({int(i) for i in subset})
    if not ids:
        raise ValueError(f"{name} must be nonempty")
    if ids[0] < 0 or ids[-1] >= n:
        raise ValueError(f"{name} has agent ids outside [0, {n})")
    return tuple(ids)


def check_budget(n: int, f: int, r: int) -> None:
    if n < 1:
        raise ValueError("n must be at least 1")
    if f < 0 or r < 0:
        raise ValueError("f and r must be nonnegative")
    if r >= n:
        raise ValueError(f"r={r} must be smaller than n={n}")
