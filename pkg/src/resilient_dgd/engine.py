"""The server loop: projected resilient gradient descent over simulated agents.

Each iteration the server broadcasts ``x^t``, gathers agent messages
according to the run mode, aggregates them and takes a projected step

    x^{t+1} = clip_W(x^t - eta_t * aggregate).

Modes: ``sync`` (all agents), ``async`` (first ``n - r`` arrivals),
``stale`` (newest gradient of each agent, at most ``tau`` iterations old) and
``stochastic`` (``async`` with noisy gradients and a constant step).
"""

from __future__ import annotations

import io
import json
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .box import FeasibleBox, project
from .config import RunConfig
from .costs import CostFamily, StochasticGradConfig, draw_noise, gradient
from .exceptions import ResilientDGDError
from .faults import ByzantineStrategy, corrupt
from .filters import FilterKind
from .problem import ProblemInstance, StepSchedule
from .simnet import ArrivalSet, StaleBuffer, collect_fresh, collect_stale

logger = logging.getLogger(__name__)

__all__ = [
    "AgentPool",
    "IterState",
    "MonteCarloResult",
    "StepInfo",
    "Trace",
    "project",
    "run",
    "run_monte_carlo",
    "step_async",
    "step_stale",
    "step_stochastic",
    "step_sync_dgd",
]


class RunError(ResilientDGDError):
    """A step failed; carries the iteration index."""

    def __init__(self, iteration: int, cause: Exception):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause


def _seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


class AgentPool:
    """Produces every agent's message for an estimate.

    Honest agents send their (stochastic) gradient; faulty agents corrupt it.
    Each agent owns independent noise and fault streams derived from
    ``(seed, replication, agent)``, and every agent draws once per iteration
    whether or not its message is used, so results do not depend on arrival
    patterns or on ``workers``.
    """

    def __init__(
        self,
        family: CostFamily,
        strategies: list[ByzantineStrategy | None] | None = None,
        noise: StochasticGradConfig | None = None,
        seed: int = 0,
        replication: int = 0,
        workers: int = 1,
    ):
        self.family = family
        self.strategies = list(strategies) if strategies is not None else [None] * family.n
        if len(self.strategies) != family.n:
            raise ValueError("one strategy slot per agent is required")
        self.noise = noise if noise is not None and noise.sigma > 0 else None
        self.noise_rngs = [np.random.default_rng(_seed_sequence(seed, replication, 0, i)) for i in range(family.n)]
        self.fault_rngs = [np.random.default_rng(_seed_sequence(seed, replication, 1, i)) for i in range(family.n)]
        self._A = np.stack([c.A for c in family.costs])
        self._b = np.stack([c.b for c in family.costs])
        # agents whose message differs from their exact gradient
        self._perturbed = [i for i in range(family.n) if self.noise is not None or self.strategies[i] is not None]
        self.workers = max(1, int(workers))
        self._executor = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def _perturb(self, i: int, g: np.ndarray, x: np.ndarray) -> np.ndarray:
        cost = self.family.costs[i]
        if self.noise is not None:
            g = g + draw_noise(self.noise_rngs[i], cost.dimension, self.noise)
        strategy = self.strategies[i]
        if strategy is not None:
            g = corrupt(strategy, g, cost, x, self.fault_rngs[i])
        return g

    def messages(self, x: np.ndarray) -> np.ndarray:
        """Row ``i`` is agent ``i``'s message for the estimate ``x``."""
        # one batched product for the exact part keeps serial and threaded runs bitwise equal
        out = self._A @ x - self._b
        if not self._perturbed:
            return out
        if self._executor is None:
            rows = [self._perturb(i, out[i], x) for i in self._perturbed]
        else:
            rows = list(self._executor.map(lambda i: self._perturb(i, out[i], x), self._perturbed))
        out[self._perturbed] = rows
        return out


@dataclass
class IterState:
    """Current iteration, estimate, and the recent estimates kept for stale updates."""

    t: int
    x: np.ndarray
    history: deque = field(default_factory=deque)

    @classmethod
    def initial(cls, x0, tau: int = 0) -> "IterState":
        x0 = np.array(x0, dtype=np.float64)
        return cls(0, x0, deque([x0], maxlen=tau + 1))

    def advance(self, x_next: np.ndarray) -> "IterState":
        hist = deque(self.history, maxlen=self.history.maxlen)
        hist.appendleft(x_next)
        return IterState(self.t + 1, x_next, hist)


@dataclass
class StepInfo:
    aggregate: np.ndarray
    eta: float
    bitmask: int
    partition: tuple[int, ...] | None = None


def _apply(state: IterState, box: FeasibleBox, aggregate: np.ndarray, eta: float) -> IterState:
    return state.advance(project(box, state.x - eta * aggregate))


def step_sync_dgd(
    state: IterState,
    agents: AgentPool,
    aggregator: FilterKind,
    schedule: StepSchedule,
    box: FeasibleBox,
) -> tuple[IterState, StepInfo]:
    """All ``n`` messages pass through the aggregator."""
    msgs = agents.messages(state.x)
    agg = aggregator.rows(msgs)
    eta = schedule(state.t)
    return _apply(state, box, agg, eta), StepInfo(agg, eta, (1 << len(msgs)) - 1)


def step_async(
    state: IterState,
    agents: AgentPool,
    aggregator: FilterKind,
    arrivals: ArrivalSet,
    schedule: StepSchedule,
    box: FeasibleBox,
) -> tuple[IterState, StepInfo]:
    """Only the agents in ``arrivals`` contribute."""
    msgs = agents.messages(state.x)
    agg = aggregator.rows(msgs[list(arrivals.members)])
    eta = schedule(state.t)
    return _apply(state, box, agg, eta), StepInfo(agg, eta, arrivals.bitmask())


def step_stochastic(
    state: IterState,
    agents: AgentPool,
    aggregator: FilterKind,
    arrivals: ArrivalSet,
    eta: float,
    box: FeasibleBox,
) -> tuple[IterState, StepInfo]:
    """As :func:`step_async` with a constant step; ``agents`` carries the noise model."""
    return step_async(state, agents, aggregator, arrivals, StepSchedule("constant", eta), box)


def step_stale(
    state: IterState,
    family: CostFamily,
    partition: list[frozenset[int]],
    schedule: StepSchedule,
    box: FeasibleBox,
) -> tuple[IterState, StepInfo]:
    """Sum each agent's gradient taken at the estimate its newest message was computed on."""
    contributions = []
    for i, cell in enumerate(partition):
        if not cell:
            continue
        if i >= len(state.history):
            raise ResilientDGDError(f"missing estimate x^(t-{i}) for stale update")
        x_old = state.history[i]
        contributions.extend((j, x_old) for j in cell)
    contributions.sort(key=lambda p: p[0])
    agg = None
    for j, x_old in contributions:
        g = gradient(family.costs[j], x_old)
        agg = g if agg is None else agg + g
    if agg is None:
        raise ResilientDGDError("stale partition is empty")
    eta = schedule(state.t)
    mask = 0
    for cell in partition:
        for j in cell:
            mask |= 1 << j
    return _apply(state, box, agg, eta), StepInfo(agg, eta, mask, tuple(len(c) for c in partition))


# -- traces ---------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


@dataclass
class Trace:
    """Per-iteration record of a run.

    Row ``t`` holds ``x^t`` and, for ``t < T``, the aggregate used to move
    from ``x^t`` to ``x^{t+1}`` together with ``eta_t``, the arrival bitmask
    and the diagnostic ``phi_t = <x^t - target, aggregate>``.
    """

    target: np.ndarray
    xs: list[np.ndarray] = field(default_factory=list)
    aggregates: list[np.ndarray] = field(default_factory=list)
    etas: list[float] = field(default_factory=list)
    bitmasks: list[int] = field(default_factory=list)
    partitions: list[tuple[int, ...] | None] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.aggregates)

    def append(self, x_next: np.ndarray, info: StepInfo) -> None:
        self.aggregates.append(info.aggregate)
        self.etas.append(info.eta)
        self.bitmasks.append(info.bitmask)
        self.partitions.append(info.partition)
        self.xs.append(x_next)

    def positions(self) -> np.ndarray:
        return np.array(self.xs)

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.positions() - self.target, axis=1)

    def aggregate_norms(self) -> np.ndarray:
        if not self.aggregates:
            return np.zeros(0)
        return np.linalg.norm(np.array(self.aggregates), axis=1)

    def phis(self) -> np.ndarray:
        if not self.aggregates:
            return np.zeros(0)
        diffs = self.positions()[:-1] - self.target
        return np.einsum("ij,ij->i", diffs, np.array(self.aggregates))

    def rows(self):
        dist = self.distances()
        norms = self.aggregate_norms()
        phis = self.phis()
        for t in range(len(self.xs)):
            if t < self.iterations:
                part = self.partitions[t]
                yield (
                    t, dist[t], norms[t], phis[t], self.etas[t], self.bitmasks[t],
                    ";".join(str(k) for k in part) if part is not None else "",
                )
            else:
                yield (t, dist[t], None, None, None, None, "")

    def to_csv(self, header_lines: list[str] | None = None) -> str:
        buf = io.StringIO()
        for line in header_lines or []:
            buf.write(f"# {line}\n")
        buf.write("t,dist,agg_norm,phi,eta,arrival_bitmask,partition\n")
        for t, d, a, p, e, m, part in self.rows():
            buf.write(f"{t},{_fmt(d)},{_fmt(a)},{_fmt(p)},{_fmt(e)},{'' if m is None else m},{part}\n")
        return buf.getvalue()

    def to_json(self, include_vectors: bool = False, provenance: dict | None = None) -> str:
        records = []
        for t, d, a, p, e, m, part in self.rows():
            rec = {"t": t, "dist": d, "agg_norm": a, "phi": p, "eta": e, "arrival_bitmask": m}
            if part:
                rec["partition"] = [int(k) for k in part.split(";")]
            if include_vectors:
                rec["x"] = self.xs[t].tolist()
                rec["aggregate"] = self.aggregates[t].tolist() if t < self.iterations else None
            records.append(rec)
        doc = {
            "provenance": provenance or {},
            "meta": self.meta,
            "target": self.target.tolist(),
            "records": records,
        }
        return json.dumps(doc, indent=1, default=_json_default) + "\n"

    def write_csv(self, path, header_lines=None) -> None:
        Path(path).write_text(self.to_csv(header_lines))


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- run loops ------------------------------------------------------------


def _simulate(problem: ProblemInstance, replication: int = 0, workers: int | None = None) -> Trace:
    cfg = problem.config
    n, r = problem.n, cfg.r
    box = problem.box
    schedule = problem.schedule
    tau = cfg.tau if cfg.mode == "stale" else 0
    state = IterState.initial(problem.x0, tau)
    trace = Trace(problem.target.copy(), xs=[state.x])
    agents = AgentPool(
        problem.family,
        problem.strategies,
        problem.noise,
        seed=cfg.seed,
        replication=replication,
        workers=cfg.workers if workers is None else workers,
    )
    delay_rng = np.random.default_rng(_seed_sequence(cfg.seed, replication, 2))
    delay = problem.delay
    cached_arrivals: ArrivalSet | None = None
    buffer = StaleBuffer(n, tau) if cfg.mode == "stale" else None
    try:
        for t in range(cfg.iterations):
            try:
                if cfg.mode == "sync":
                    state, info = step_sync_dgd(state, agents, problem.aggregator, schedule, box)
                elif cfg.mode == "stale":
                    buffer.record(t, delay.delays(t, n, delay_rng))
                    cells = collect_stale(buffer, t, r)
                    state, info = step_stale(state, problem.family, cells, schedule, box)
                else:
                    if delay.is_random or delay.kind == "rotating" or cached_arrivals is None:
                        arrivals = collect_fresh(delay.delays(t, n, delay_rng), t, n, r)
                        if not (delay.is_random or delay.kind == "rotating"):
                            cached_arrivals = arrivals
                    else:
                        arrivals = ArrivalSet(t, cached_arrivals.members, cached_arrivals.arrival_order)
                    state, info = step_async(state, agents, problem.aggregator, arrivals, schedule, box)
            except (ResilientDGDError, ValueError) as exc:
                raise RunError(t, exc) from exc
            trace.append(state.x, info)
    finally:
        agents.close()
    trace.meta = {"mode": cfg.mode, "n": n, "f": cfg.f, "r": r, "seed": cfg.seed, "replication": replication}
    return trace


def run(config: RunConfig | ProblemInstance, workers: int | None = None) -> Trace:
    """Execute ``config.iterations`` steps; deterministic given the config and seed."""
    problem = config if isinstance(config, ProblemInstance) else ProblemInstance.from_config(config)
    return _simulate(problem, 0, workers)


@dataclass
class MonteCarloResult:
    """Squared distance to the target across replications.

    ``mean_sq[t]`` and ``se[t]`` describe ``||x^t - target||^2``;
    ``bound[t]`` is the closed-form bound on its expectation (``bound[0]`` is
    the deterministic initial value).
    """

    mean_sq: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    replications: int

    def violations(self, n_se: float = 3.0) -> np.ndarray:
        """Iterations ``t >= 1`` whose mean exceeds the bound by more than ``n_se`` standard errors."""
        excess = self.mean_sq[1:] > self.bound[1:] + n_se * self.se[1:]
        return np.flatnonzero(excess) + 1

    def to_csv(self, header_lines: list[str] | None = None) -> str:
        buf = io.StringIO()
        for line in header_lines or []:
            buf.write(f"# {line}\n")
        buf.write("t,mean_sq,se,bound\n")
        for t in range(len(self.mean_sq)):
            buf.write(f"{t},{_fmt(self.mean_sq[t])},{_fmt(self.se[t])},{_fmt(self.bound[t])}\n")
        return buf.getvalue()


def run_monte_carlo(config: RunConfig | ProblemInstance) -> MonteCarloResult:
    """Replicate a stochastic run ``config.replications`` times and compare with the bound."""
    problem = config if isinstance(config, ProblemInstance) else ProblemInstance.from_config(config)
    cfg = problem.config
    R, T = cfg.replications, cfg.iterations
    sq = np.empty((R, T + 1))
    for k in range(R):
        d = _simulate(problem, k).distances()
        sq[k] = d * d
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.zeros(T + 1)
    bound = np.empty(T + 1)
    initial_sq = float(np.sum((problem.x0 - problem.target) ** 2))
    bound[0] = initial_sq
    b = problem.bounds
    for t in range(T):
        bound[t + 1] = b.mean_square_bound(t, initial_sq)
    return MonteCarloResult(mean, se, bound, R)
