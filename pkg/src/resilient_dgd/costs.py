"""Quadratic agent costs, their gradients, and smoothness/convexity certificates.

Each agent ``i`` holds ``Q_i(x) = 0.5 * x^T A_i x - b_i^T x`` with ``A_i``
symmetric positive semidefinite, so ``grad Q_i(x) = A_i x - b_i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Literal

import numpy as np

from ._validation import check_square, check_vector
from .exceptions import EnumerationCapError

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-12
DEFAULT_MAX_AGENTS = 20
TRUNCATION_RADIUS = 6.0

NoiseModel = Literal["gaussian", "sphere"]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuadraticCost:
    """One agent's cost ``0.5 x^T A x - b^T x``.

    ``A`` is symmetrized on construction, then checked for nonnegative
    spectrum.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = check_square(self.A)
        b = check_vector(self.b, A.shape[0], name="b")
        if np.max(np.abs(A - A.T), initial=0.0) > 1e3 * SYMMETRY_TOL * max(1.0, np.max(np.abs(A))):
            raise ValueError("A must be symmetric")
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A)[0] < -PSD_TOL * max(1.0, np.max(np.abs(A))):
            raise ValueError("A must be positive semidefinite")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def dimension(self) -> int:
        return self.b.shape[0]

    def value(self, x) -> float:
        x = check_vector(x, self.dimension)
        return float(0.5 * x @ self.A @ x - self.b @ x)

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    def __eq__(self, other):
        if not isinstance(other, QuadraticCost):
            return NotImplemented
        return np.array_equal(self.A, other.A) and np.array_equal(self.b, other.b)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CostFamily:
    """The ``n`` agents' costs, all of a shared dimension."""

    costs: tuple[QuadraticCost, ...]
    dimension: int = field(default=-1)

    def __post_init__(self):
        costs = tuple(self.costs)
        if not costs:
            raise ValueError("a cost family needs at least one agent")
        for c in costs:
            if not isinstance(c, QuadraticCost):
                raise TypeError("costs must be QuadraticCost instances")
        d = costs[0].dimension
        if any(c.dimension != d for c in costs):
            raise ValueError("all costs must share one dimension")
        if self.dimension not in (-1, d):
            raise ValueError(f"declared dimension {self.dimension} does not match costs ({d})")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "dimension", d)

    @property
    def n(self) -> int:
        return len(self.costs)

    def __len__(self) -> int:
        return len(self.costs)

    def __getitem__(self, i: int) -> QuadraticCost:
        return self.costs[i]

    def __iter__(self):
        return iter(self.costs)

    def __eq__(self, other):
        if not isinstance(other, CostFamily):
            return NotImplemented
        return self.n == other.n and all(a == b for a, b in zip(self.costs, other.costs))

    __hash__ = None

    def aggregate(self, subset) -> tuple[np.ndarray, np.ndarray]:
        """Summed ``(A, b)`` over ``subset`` in ascending agent order."""
        ids = sorted(subset)
        A = np.zeros((self.dimension, self.dimension))
        b = np.zeros(self.dimension)
        for i in ids:
            A += self.costs[i].A
            b += self.costs[i].b
        return A, b

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "agents": [c.to_dict() for c in self.costs]}

    @classmethod
    def from_dict(cls, doc: dict) -> "CostFamily":
        try:
            agents = doc["agents"]
        except (KeyError, TypeError) as exc:
            raise ValueError("cost family document needs an 'agents' list") from exc
        costs = tuple(QuadraticCost(np.asarray(a["A"], float), np.asarray(a["b"], float)) for a in agents)
        return cls(costs, int(doc.get("dimension", -1)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CostFamily":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "CostFamily":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


@dataclass(frozen=True)
class SmoothnessCertificate:
    mu: float
    gamma: float
    subset_floor: int

    def to_dict(self) -> dict:
        return {"mu": self.mu, "gamma": self.gamma, "subset_floor": self.subset_floor}


@dataclass(frozen=True)
class StochasticGradConfig:
    """Noise model for stochastic gradients.

    ``sigma`` bounds the root-mean-square norm of the noise added to one
    agent's gradient; ``batch_size`` draws are averaged per gradient.
    """

    sigma: float = 0.0
    batch_size: int = 1
    noise_model: NoiseModel = "gaussian"

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be a finite nonnegative number")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.noise_model not in ("gaussian", "sphere"):
            raise ValueError(f"unknown noise model {self.noise_model!r}")


def gradient(cost: QuadraticCost, x) -> np.ndarray:
    """Exact gradient ``A x - b``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cost.dimension,):
        raise ValueError(f"x has shape {x.shape}, expected ({cost.dimension},)")
    return cost.A @ x - cost.b


def _single_draw(rng: np.random.Generator, d: int, sigma: float, model: str) -> np.ndarray:
    if model == "sphere":
        while True:
            v = rng.standard_normal(d)
            nv = np.linalg.norm(v)
            if nv > 0:
                return (sigma / nv) * v
    scale = sigma / math.sqrt(d)
    while True:
        v = scale * rng.standard_normal(d)
        if v @ v <= (TRUNCATION_RADIUS * sigma) ** 2:
            return v


def draw_noise(rng: np.random.Generator, d: int, cfg: StochasticGradConfig) -> np.ndarray:
    """Zero-mean noise with ``E||noise||^2 <= sigma^2``.

    Gaussian noise is isotropic with total variance ``sigma^2`` and rejected
    beyond radius ``6 sigma``; sphere noise has norm exactly ``sigma``. Both
    are symmetric, so truncation keeps the mean at zero.
    """
    if cfg.sigma == 0:
        return np.zeros(d)
    k = int(cfg.batch_size)
    total = _single_draw(rng, d, cfg.sigma, cfg.noise_model)
    for _ in range(k - 1):
        total = total + _single_draw(rng, d, cfg.sigma, cfg.noise_model)
    return total / k if k > 1 else total


def stochastic_gradient(
    cost: QuadraticCost, x, cfg: StochasticGradConfig, rng: np.random.Generator
) -> np.ndarray:
    g = gradient(cost, x)
    if cfg.sigma == 0:
        return g
    return g + draw_noise(rng, cost.dimension, cfg)


def certify_constants(
    family: CostFamily, subset_floor: int, max_agents: int = DEFAULT_MAX_AGENTS
) -> SmoothnessCertificate:
    """Exact smoothness ``mu`` and subset strong-convexity ``gamma``.

    ``mu`` is the largest eigenvalue over the individual ``A_i``. ``gamma`` is
    the smallest eigenvalue of ``mean(A_i for i in S)`` over every subset with
    ``|S| >= subset_floor``, found by full enumeration.
    """
    n = family.n
    if not 1 <= subset_floor <= n:
        raise ValueError(f"subset_floor must lie in [1, {n}], got {subset_floor}")
    if n > max_agents:
        raise EnumerationCapError(f"n={n} exceeds the enumeration cap of {max_agents} agents")
    stacked = np.stack([c.A for c in family.costs])
    mu = float(max(np.linalg.eigvalsh(stacked)[:, -1]))
    gamma = math.inf
    for size in range(subset_floor, n + 1):
        idx = np.array(list(combinations(range(n), size)))
        means = stacked[idx].sum(axis=1) / size
        # chunked to bound memory for large binomials
        for start in range(0, len(means), 4096):
            gamma = min(gamma, float(np.linalg.eigvalsh(means[start:start + 4096])[:, 0].min()))
    gamma = max(gamma, 0.0)
    if gamma > mu:
        # averaging matrices with spectra <= mu cannot exceed mu; only rounding can
        if gamma - mu > 1e-12 * mu:
            raise ArithmeticError(f"subset curvature {gamma!r} exceeds smoothness {mu!r}")
        gamma = mu
    return SmoothnessCertificate(mu=mu, gamma=gamma, subset_floor=int(subset_floor))


def line3() -> CostFamily:
    """Scalar unit-curvature costs centred at 0, 1 and 2."""
    return CostFamily(tuple(QuadraticCost(np.eye(1), np.array([c])) for c in (0.0, 1.0, 2.0)))


def identical(n: int, d: int = 1, center=None) -> CostFamily:
    c = np.zeros(d) if center is None else check_vector(center, d, "center")
    return CostFamily(tuple(QuadraticCost(np.eye(d), c.copy()) for _ in range(n)))


def generate_family(
    seed: int,
    n: int,
    d: int,
    spread: float = 1.0,
    eig_low: float = 1.0,
    eig_high: float = 2.0,
) -> CostFamily:
    """Random SPD quadratics with spectra in ``[eig_low, eig_high]``.

    Minimizers are drawn uniformly from ``[-spread, spread]^d``; ``spread=0``
    gives a family where every agent shares the minimizer at the origin.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    if not 0 < eig_low <= eig_high:
        raise ValueError("need 0 < eig_low <= eig_high")
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    rng = np.random.default_rng(seed)
    costs = []
    for _ in range(n):
        q, rmat = np.linalg.qr(rng.standard_normal((d, d)))
        q = q * np.sign(np.diag(rmat))
        eigs = rng.uniform(eig_low, eig_high, size=d)
        A = (q * eigs) @ q.T
        A = 0.5 * (A + A.T)
        center = spread * rng.uniform(-1.0, 1.0, size=d)
        costs.append(QuadraticCost(A, A @ center))
    return CostFamily(tuple(costs))


PRESETS = {"line3": line3}
