"""Axis-aligned feasible box and Euclidean projection onto it."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ._validation import check_vector


@dataclass(frozen=True, eq=False)
class FeasibleBox:
    """``W = prod_j [lower_j, upper_j]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = check_vector(self.lower, name="lower")
        hi = check_vector(self.upper, lo.shape[0], name="upper")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        lo, hi = lo.copy(), hi.copy()
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, half_width: float, d: int, center=None) -> "FeasibleBox":
        c = np.zeros(d) if center is None else check_vector(center, d, "center")
        return cls(c - half_width, c + half_width)

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def project(self, x) -> np.ndarray:
        return np.minimum(np.maximum(x, self.lower), self.upper)

    def max_distance(self, point) -> float:
        """``max_{x in W} ||x - point||``; attained at the corner farthest per coordinate."""
        p = check_vector(point, self.dimension, "point")
        far = np.where(np.abs(self.lower - p) >= np.abs(self.upper - p), self.lower, self.upper)
        return float(np.linalg.norm(far - p))

    def corners(self):
        for bits in product((0, 1), repeat=self.dimension):
            yield np.where(np.array(bits, dtype=bool), self.upper, self.lower)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def __eq__(self, other):
        if not isinstance(other, FeasibleBox):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None


def project(box: FeasibleBox, x) -> np.ndarray:
    """Coordinatewise clamp of ``x`` onto ``box``."""
    return box.project(np.asarray(x, dtype=np.float64))
