"""Byzantine message corruption.

A faulty agent computes its true (possibly stochastic) gradient and then
replaces it according to a fixed strategy. Strategies are assigned once per
run and never change mid-run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .costs import QuadraticCost

StrategyName = Literal["reverse", "random", "large", "centerflip"]


@dataclass(frozen=True)
class ByzantineStrategy:
    """What a faulty agent sends instead of its gradient.

    ``centerflip`` is the quadratic stand-in for label flipping: the agent
    reports the gradient of its cost with ``b`` negated.
    """

    variant: StrategyName
    scale: float = 1.0

    def __post_init__(self):
        if self.variant not in ("reverse", "random", "large", "centerflip"):
            raise ValueError(f"unknown Byzantine strategy {self.variant!r}")
        if self.scale < 0:
            raise ValueError("scale must be nonnegative")

    @property
    def role(self) -> str:
        if self.variant in ("random", "large"):
            return f"{self.variant}:{self.scale:g}"
        return self.variant


def parse_role(role: str) -> ByzantineStrategy | None:
    """``"honest"`` maps to ``None``; anything else to a strategy.

    Accepted: ``honest``, ``reverse``, ``centerflip``, ``random:SCALE``,
    ``large:SCALE``.
    """
    text = role.strip().lower()
    if text == "honest":
        return None
    name, _, arg = text.partition(":")
    if name in ("reverse", "centerflip"):
        if arg:
            raise ValueError(f"role {role!r} takes no argument")
        return ByzantineStrategy(name)
    if name in ("random", "large"):
        if not arg:
            raise ValueError(f"role {role!r} needs a scale, e.g. {name}:2.0")
        return ByzantineStrategy(name, float(arg))
    raise ValueError(f"unknown role {role!r}")


def corrupt(
    strategy: ByzantineStrategy,
    true_gradient: np.ndarray,
    cost: QuadraticCost,
    x: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    g = np.asarray(true_gradient, dtype=np.float64)
    if strategy.variant == "reverse":
        return -g
    if strategy.variant == "large":
        return strategy.scale * g
    if strategy.variant == "centerflip":
        # grad of 0.5 x^T A x + b^T x, keeping any stochastic noise in g
        return g + 2.0 * cost.b
    if rng is None:
        raise ValueError("the random strategy needs an rng stream")
    return strategy.scale * rng.standard_normal(g.shape[0])
