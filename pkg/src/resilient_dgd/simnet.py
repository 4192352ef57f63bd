"""Simulated server/agent messaging in discrete iterations.

Agent ``i``'s gradient for timestamp ``t`` reaches the server at iteration
``t + delay_i(t)``; an infinite delay means it never arrives. The fresh
collector keeps the first ``n - r`` arrivals for the current timestamp. The
stale collector keeps, for each agent, its newest gradient no older than
``tau`` iterations.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .exceptions import ArrivalError, StaleBudgetError

DelayKind = Literal["constant", "geometric", "slow", "rotating"]


@dataclass(frozen=True)
class DelayModel:
    """Per-agent response delays, in whole iterations.

    * ``constant``: every agent is delayed by ``value`` iterations.
    * ``geometric``: independent delays ``k >= 0`` with
      ``P(k) = (1 - p)^k p``, drawn from the run's delay stream.
    * ``slow``: agents in ``agents`` are delayed by ``extra`` (``None`` for
      never), everyone else answers immediately.
    * ``rotating``: at timestamp ``t`` the ``count`` agents starting at
      ``(t * count) mod n`` are delayed by ``extra``.
    """

    kind: DelayKind = "constant"
    value: int = 0
    p: float = 0.5
    agents: tuple[int, ...] = ()
    extra: int | None = None
    count: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "geometric", "slow", "rotating"):
            raise ValueError(f"unknown delay model {self.kind!r}")
        if self.value < 0:
            raise ValueError("delays must be nonnegative")
        if self.kind == "geometric" and not 0 < self.p <= 1:
            raise ValueError("geometric delay needs 0 < p <= 1")
        if self.extra is not None and self.extra < 0:
            raise ValueError("extra delay must be nonnegative")
        if self.count < 0:
            raise ValueError("count must be nonnegative")
        object.__setattr__(self, "agents", tuple(sorted({int(a) for a in self.agents})))

    @property
    def is_random(self) -> bool:
        return self.kind == "geometric"

    def slow_agents_bound(self, n: int) -> int:
        """Largest number of agents that can be late at once under this model."""
        if self.kind == "slow":
            return len(self.agents) if (self.extra is None or self.extra > 0) else 0
        if self.kind == "rotating":
            return min(self.count, n) if (self.extra is None or self.extra > 0) else 0
        if self.kind == "constant":
            return 0
        return n

    def delays(self, t: int, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Delay of each agent's timestamp-``t`` gradient (float, ``inf`` allowed)."""
        late = math.inf if self.extra is None else float(self.extra)
        if self.kind == "constant":
            return np.full(n, float(self.value))
        if self.kind == "slow":
            out = np.zeros(n)
            for a in self.agents:
                if a < n:
                    out[a] = late
            return out
        if self.kind == "rotating":
            out = np.zeros(n)
            for j in range(min(self.count, n)):
                out[(t * self.count + j) % n] = late
            return out
        if rng is None:
            raise ValueError("geometric delays need an rng stream")
        return rng.geometric(self.p, size=n).astype(np.float64) - 1.0

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "geometric":
            out["p"] = self.p
        elif self.kind == "slow":
            out["agents"] = list(self.agents)
            out["extra"] = self.extra
        else:
            out["extra"] = self.extra
            out["count"] = self.count
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "DelayModel":
        doc = dict(doc)
        if "agents" in doc:
            doc["agents"] = tuple(doc["agents"])
        return cls(**doc)


@dataclass(frozen=True)
class ArrivalSet:
    iteration: int
    members: tuple[int, ...]
    arrival_order: tuple[int, ...]

    def bitmask(self) -> int:
        return sum(1 << i for i in self.members)


def collect_fresh(delays: np.ndarray, t: int, n: int, r: int) -> ArrivalSet:
    """First ``n - r`` arrivals for timestamp ``t``; ties go to the lower id.

    ``delays`` is the vector produced by :meth:`DelayModel.delays` for
    timestamp ``t``.
    """
    need = n - r
    if need < 1:
        raise ValueError("need n - r >= 1")
    d = np.asarray(delays, dtype=np.float64)
    order = [int(i) for i in np.lexsort((np.arange(n), d)) if math.isfinite(d[i])]
    if len(order) < need:
        raise ArrivalError(f"iteration {t}: only {len(order)} agents can respond, need {need}")
    chosen = order[:need]
    return ArrivalSet(t, tuple(sorted(chosen)), tuple(chosen))


@dataclass
class StaleBuffer:
    """Arrival bookkeeping for updates that reuse gradients up to ``tau`` old.

    ``arrival_at[k][i]`` is the iteration at which agent ``i``'s
    timestamp-``k`` gradient reaches the server. Only the last ``tau + 1``
    timestamps are retained.
    """

    n: int
    tau: int
    arrival_at: deque = field(default_factory=deque)
    stamps: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    def record(self, t: int, delays: np.ndarray) -> None:
        if self.stamps and t != self.stamps[-1] + 1:
            raise ValueError(f"timestamps must be consecutive; got {t} after {self.stamps[-1]}")
        self.stamps.append(t)
        self.arrival_at.append(t + np.asarray(delays, dtype=np.float64))
        while len(self.stamps) > self.tau + 1:
            self.stamps.popleft()
            self.arrival_at.popleft()

    def received(self, t: int, k: int) -> frozenset[int]:
        """Agents whose timestamp-``k`` gradient has arrived by iteration ``t``."""
        idx = k - self.stamps[0]
        if idx < 0 or k > self.stamps[-1]:
            return frozenset()
        arrivals = self.arrival_at[idx]
        return frozenset(int(i) for i in np.flatnonzero(arrivals <= t))


def collect_stale(buffer: StaleBuffer, t: int, r: int) -> list[frozenset[int]]:
    """Partition ``[T^{t;t}, T^{t;t-1}, ..., T^{t;t-tau}]`` of the usable gradients.

    Cell ``i`` holds the agents whose newest received gradient was computed
    at the estimate of iteration ``t - i``. Raises :class:`StaleBudgetError`
    when fewer than ``n - r`` agents are covered.
    """
    if not buffer.stamps or buffer.stamps[-1] != t:
        raise ValueError(f"buffer has no record for iteration {t}")
    cells: list[frozenset[int]] = []
    covered: set[int] = set()
    for i in range(buffer.tau + 1):
        k = t - i
        cell = buffer.received(t, k) - covered if k >= 0 else frozenset()
        cells.append(frozenset(cell))
        covered |= cell
    if len(covered) < buffer.n - r:
        raise StaleBudgetError(
            f"iteration {t}: only {len(covered)} usable gradients within staleness {buffer.tau}, "
            f"need {buffer.n - r}"
        )
    return cells
