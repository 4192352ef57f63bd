"""Subset minimizers and the exact (f, r; epsilon)-redundancy parameter."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy import linalg

from ._validation import check_agent_subset, check_budget
from .box import FeasibleBox
from .costs import DEFAULT_MAX_AGENTS, CostFamily
from .exceptions import ConfigError, EnumerationCapError, OutsideBoxError, SingularAggregateError

SINGULAR_TOL = 1e-10
RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SubsetMinimizer:
    subset: tuple[int, ...]
    minimizer: np.ndarray
    aggregate_condition: float


@dataclass(frozen=True)
class RedundancyReport:
    f: int
    r: int
    epsilon: float
    witness_pair: tuple[tuple[int, ...], tuple[int, ...]] | None
    pairs_examined: int

    def to_dict(self) -> dict:
        witness = None
        if self.witness_pair is not None:
            witness = {"S": list(self.witness_pair[0]), "S_hat": list(self.witness_pair[1])}
        return {
            "f": self.f,
            "r": self.r,
            "epsilon": self.epsilon,
            "witness_pair": witness,
            "pairs_examined": self.pairs_examined,
        }


def subset_minimizer(family: CostFamily, subset) -> SubsetMinimizer:
    """Unique minimizer of ``sum_{i in subset} Q_i`` by a dense LU solve.

    Raises :class:`SingularAggregateError` when the summed curvature is not
    positive definite, since the minimizer set is then not a single point.
    """
    ids = check_agent_subset(subset, family.n)
    A, b = family.aggregate(ids)
    lam_min = float(linalg.eigvalsh(A)[0])
    scale = max(1.0, float(np.max(np.abs(A))))
    if lam_min <= SINGULAR_TOL * scale:
        raise SingularAggregateError(
            f"aggregate over {list(ids)} is singular (smallest eigenvalue {lam_min:.3e})"
        )
    x = np.linalg.solve(A, b)
    residual = np.linalg.norm(A @ x - b)
    if residual > RESIDUAL_TOL * max(1.0, np.linalg.norm(b)):
        raise SingularAggregateError(f"aggregate over {list(ids)} is ill-conditioned (residual {residual:.3e})")
    return SubsetMinimizer(ids, x, lam_min)


class _MinimizerCache:
    def __init__(self, family: CostFamily):
        self.family = family
        self._store: dict[tuple[int, ...], np.ndarray] = {}

    def __call__(self, ids: tuple[int, ...]) -> np.ndarray:
        x = self._store.get(ids)
        if x is None:
            x = subset_minimizer(self.family, ids).minimizer
            self._store[ids] = x
        return x


def count_pairs(n: int, f: int, r: int) -> int:
    lo = n - r - 2 * f
    inner = sum(comb(n - f, k) for k in range(max(lo, 1), n - f))
    return comb(n, n - f) * inner


def compute_epsilon(
    family: CostFamily, f: int, r: int, max_agents: int = DEFAULT_MAX_AGENTS
) -> RedundancyReport:
    """Exact epsilon: the largest ``||x_S - x_Shat||`` over all admissible pairs.

    ``S`` ranges over the ``(n - f)``-subsets and ``Shat`` over the proper
    subsets of ``S`` with at least ``n - r - 2f`` members. Ties on the
    maximal distance keep the lexicographically smallest ``(S, Shat)``.
    """
    n = family.n
    check_budget(n, f, r)
    if not 2 * f < n - r:
        raise ConfigError(f"need f < (n - r)/2; got n={n}, f={f}, r={r}")
    if n > max_agents:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap of {max_agents} agents")
    size_s = n - f
    min_hat = n - r - 2 * f
    cache = _MinimizerCache(family)
    best = 0.0
    witness = None
    examined = 0
    for S in combinations(range(n), size_s):
        xs = cache(S)
        for k in range(min_hat, size_s):
            for S_hat in combinations(S, k):
                dist = float(np.linalg.norm(xs - cache(S_hat)))
                examined += 1
                if witness is None or dist > best or (dist == best and (S, S_hat) < witness):
                    best, witness = dist, (S, S_hat)
    return RedundancyReport(int(f), int(r), best, witness, examined)


def epsilon_grid(family: CostFamily, max_agents: int = DEFAULT_MAX_AGENTS) -> list[RedundancyReport]:
    """Reports for every feasible ``(f, r)`` with ``r < n`` and ``2f < n - r``."""
    n = family.n
    out = []
    for r in range(n):
        for f in range(n):
            if 2 * f < n - r:
                out.append(compute_epsilon(family, f, r, max_agents=max_agents))
    return out


def target_minimizer(family: CostFamily, honest, box: FeasibleBox | None = None) -> np.ndarray:
    """Minimizer of the honest agents' aggregate, required to lie in ``box``."""
    x = subset_minimizer(family, honest).minimizer
    if box is not None and not box.contains(x):
        raise OutsideBoxError(f"target minimizer {x.tolist()} lies outside the feasible box")
    return x
