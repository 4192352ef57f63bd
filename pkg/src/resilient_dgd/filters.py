"""Gradient aggregation rules: plain sum, CGE and coordinate-wise trimmed mean.

Every rule accepts the received gradients keyed by agent id, either as a
mapping, a sequence of ``(agent_id, vector)`` pairs, or a 2-D array whose row
index is the agent id. Sums are always accumulated in ascending agent-id
order, which makes the output bit-for-bit independent of input order.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from typing import Literal

import numpy as np

FilterName = Literal["sum", "cge", "cwtm"]
FILTER_NAMES = ("sum", "cge", "cwtm")


def _items(vectors) -> tuple[list[int], np.ndarray]:
    if isinstance(vectors, Mapping):
        pairs = list(vectors.items())
    elif isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        pairs = list(enumerate(vectors))
    else:
        pairs = _pairs(vectors)
    if not pairs:
        raise ValueError("cannot aggregate an empty set of vectors")
    pairs.sort(key=lambda p: p[0])
    ids = [int(p[0]) for p in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate agent ids in aggregation input")
    stacked = np.stack([np.asarray(p[1], dtype=np.float64) for p in pairs])
    if stacked.ndim != 2:
        raise ValueError("aggregation input vectors must be one-dimensional")
    return ids, stacked


def _pairs(vectors):
    seq = list(vectors)
    if seq and all(isinstance(v, tuple) and len(v) == 2 for v in seq):
        return seq
    return list(enumerate(seq))


def _ordered_sum(rows: np.ndarray) -> np.ndarray:
    # left-to-right accumulation in row order; rows are already id-sorted
    total = rows[0].copy()
    for row in rows[1:]:
        total += row
    return total


def aggregate_sum(vectors) -> np.ndarray:
    _, stacked = _items(vectors)
    return _ordered_sum(stacked)


def cge_selection(vectors, f: int) -> list[int]:
    """Agent ids kept by CGE: the ``m - f`` smallest norms, ties to lower id."""
    ids, stacked = _items(vectors)
    m = len(ids)
    if not 0 <= f < m:
        raise ValueError(f"CGE needs 0 <= f < m; got f={f}, m={m}")
    norms = np.linalg.norm(stacked, axis=1)
    order = np.lexsort((np.asarray(ids), norms))
    return sorted(ids[k] for k in order[: m - f])


def aggregate_cge(vectors, f: int) -> np.ndarray:
    """Comparative gradient elimination: sum of the ``m - f`` smallest-norm vectors."""
    ids, stacked = _items(vectors)
    m = len(ids)
    if not 0 <= f < m:
        raise ValueError(f"CGE needs 0 <= f < m; got f={f}, m={m}")
    if f == 0:
        return _ordered_sum(stacked)
    return _cge_rows(stacked, f)


def _cge_rows(stacked: np.ndarray, f: int) -> np.ndarray:
    norms = np.linalg.norm(stacked, axis=1)
    # rows are id-sorted, so a stable sort on norms breaks ties by agent id
    keep = np.sort(np.argsort(norms, kind="stable")[: stacked.shape[0] - f])
    return _ordered_sum(stacked[keep])


def aggregate_cwtm(vectors, f: int) -> np.ndarray:
    """Coordinate-wise trimmed mean rescaled to a sum of ``m - f`` terms.

    Per coordinate, the ``f`` largest and ``f`` smallest values are dropped,
    the remaining ``m - 2f`` are averaged, and the mean is multiplied by
    ``m - f``.
    """
    ids, stacked = _items(vectors)
    m = len(ids)
    if not 0 <= 2 * f < m:
        raise ValueError(f"CWTM needs 0 <= 2f < m; got f={f}, m={m}")
    if f == 0:
        return _ordered_sum(stacked)
    return _cwtm_rows(stacked, f)


def _cwtm_rows(stacked: np.ndarray, f: int) -> np.ndarray:
    m = stacked.shape[0]
    ranks = np.argsort(np.argsort(stacked, axis=0, kind="stable"), axis=0, kind="stable")
    keep = (ranks >= f) & (ranks < m - f)
    total = _ordered_sum(np.where(keep, stacked, 0.0))
    return total * ((m - f) / (m - 2 * f))


@dataclass(frozen=True)
class FilterKind:
    """A named aggregation rule with its fault budget."""

    variant: FilterName = "sum"
    f: int = 0

    def __post_init__(self):
        if self.variant not in FILTER_NAMES:
            raise ValueError(f"unknown filter {self.variant!r}; choose from {FILTER_NAMES}")
        if self.f < 0:
            raise ValueError("f must be nonnegative")

    @classmethod
    def parse(cls, spec: str, f: int = 0) -> "FilterKind":
        return cls(spec.strip().lower(), int(f))

    def rows(self, stacked: np.ndarray) -> np.ndarray:
        """Aggregate a 2-D array whose rows are already in ascending agent-id order."""
        m = stacked.shape[0]
        if m == 0:
            raise ValueError("cannot aggregate an empty set of vectors")
        if self.variant == "sum" or self.f == 0:
            return _ordered_sum(stacked)
        if self.variant == "cge":
            if not self.f < m:
                raise ValueError(f"CGE needs 0 <= f < m; got f={self.f}, m={m}")
            return _cge_rows(stacked, self.f)
        if not 2 * self.f < m:
            raise ValueError(f"CWTM needs 0 <= 2f < m; got f={self.f}, m={m}")
        return _cwtm_rows(stacked, self.f)

    def __call__(self, vectors) -> np.ndarray:
        if self.variant == "sum":
            return aggregate_sum(vectors)
        if self.variant == "cge":
            return aggregate_cge(vectors, self.f)
        return aggregate_cwtm(vectors, self.f)
