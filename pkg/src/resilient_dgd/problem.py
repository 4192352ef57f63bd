"""Resolve a :class:`RunConfig` into a concrete, validated problem instance."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .bounds import TheoremBounds, bounds_thm1, bounds_thm2, bounds_thm3_cge, bounds_thm4
from .box import FeasibleBox
from .config import RunConfig
from .costs import CostFamily, SmoothnessCertificate, StochasticGradConfig, certify_constants
from .exceptions import ConfigError
from .faults import ByzantineStrategy, parse_role
from .filters import FilterKind
from .redundancy import RedundancyReport, compute_epsilon, target_minimizer
from .simnet import DelayModel


@dataclass(frozen=True)
class StepSchedule:
    """``constant``: ``eta_t = eta``; ``harmonic``: ``eta_t = eta / (t + 1)``."""

    kind: str
    eta: float

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError("step size must be finite and nonnegative")

    def __call__(self, t: int) -> float:
        if self.kind == "constant":
            return self.eta
        return self.eta / (t + 1)


def _build_box(spec: dict, d: int) -> FeasibleBox:
    try:
        if "lower" in spec:
            return FeasibleBox(np.asarray(spec["lower"], float), np.asarray(spec["upper"], float))
        return FeasibleBox.cube(float(spec["half_width"]), d, spec.get("center"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad box specification: {exc}") from exc


@dataclass
class ProblemInstance:
    config: RunConfig
    family: CostFamily
    box: FeasibleBox
    roles: list[str]
    strategies: list[ByzantineStrategy | None]
    delay: DelayModel
    aggregator: FilterKind
    x0: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_config(cls, config: RunConfig, base_dir: Path | None = None) -> "ProblemInstance":
        config.validate()
        family = config.load_family(base_dir)
        n, d = family.n, family.dimension
        f, r = int(config.f), int(config.r)
        if r >= n:
            raise ConfigError(f"r={r} must be smaller than n={n}")
        if config.filter == "cge" and not f < n - r:
            raise ConfigError("CGE needs f < n - r")
        if config.filter == "cwtm" and not 2 * f < n - r:
            raise ConfigError("CWTM needs 2f < n - r")
        roles = config.resolved_roles(n)
        strategies = [parse_role(role) for role in roles]
        if all(s is not None for s in strategies):
            raise ConfigError("at least one agent must be honest")
        delay = DelayModel.from_dict(config.delay)
        if config.mode in ("async", "stochastic") and delay.kind in ("slow", "rotating"):
            if delay.slow_agents_bound(n) > r:
                raise ConfigError(f"delay model can slow {delay.slow_agents_bound(n)} agents but r={r}")
        box = _build_box(config.box, d)
        x0 = box.center if config.x0 is None else np.asarray(config.x0, dtype=np.float64)
        if x0.shape != (d,) or not box.contains(x0):
            raise ConfigError("x0 must be a point of the feasible box")
        inst = cls(config, family, box, roles, strategies, delay, FilterKind(config.filter, f), x0)
        inst.target  # raises OutsideBoxError when the target leaves the box
        return inst

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def honest(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.strategies) if s is None)

    @property
    def faulty(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.strategies) if s is not None)

    @cached_property
    def target(self) -> np.ndarray:
        return target_minimizer(self.family, self.honest, self.box)

    @cached_property
    def x_star(self) -> np.ndarray:
        return target_minimizer(self.family, range(self.n), None)

    @property
    def Gamma(self) -> float:
        return self.box.max_distance(self.target)

    @cached_property
    def mu(self) -> float:
        return float(max(np.linalg.eigvalsh(c.A)[-1] for c in self.family))

    def certificate(self, subset_floor: int) -> SmoothnessCertificate:
        key = ("cert", subset_floor)
        if key not in self._cache:
            self._cache[key] = certify_constants(self.family, subset_floor)
        return self._cache[key]

    def redundancy(self, f: int, r: int) -> RedundancyReport:
        key = ("eps", f, r)
        if key not in self._cache:
            self._cache[key] = compute_epsilon(self.family, f, r)
        return self._cache[key]

    @property
    def noise(self) -> StochasticGradConfig | None:
        if self.config.mode != "stochastic":
            return None
        return StochasticGradConfig(self.config.sigma, self.config.batch_size, self.config.noise_model)

    @property
    def delta(self) -> float:
        return self.config.delta if self.config.delta is not None else 1e-3 * self.Gamma

    # -- bounds -----------------------------------------------------------

    def _stochastic_bounds(self, eta: float) -> TheoremBounds:
        cfg = self.config
        n, f, r = self.n, cfg.f, cfg.r
        floor = n - r if cfg.problem == "CS" else n - f
        cert = self.certificate(floor)
        eps = self.redundancy(0 if cfg.problem == "CS" else f, 0 if cfg.problem == "BS" else r).epsilon
        return bounds_thm4(cfg.problem, n, f, r, cert.mu, cert.gamma, cfg.sigma, eps, eta, self.Gamma)

    @cached_property
    def schedule(self) -> StepSchedule:
        spec = self.config.schedule
        if spec["kind"] == "harmonic":
            eta0 = spec.get("eta0")
            return StepSchedule("harmonic", 1.0 / (self.n * self.mu) if eta0 is None else float(eta0))
        if "eta" in spec:
            return StepSchedule("constant", float(spec["eta"]))
        if self.config.mode != "stochastic":
            raise ConfigError("eta_fraction is only meaningful for stochastic runs")
        eta_bar = self._stochastic_bounds(1.0).eta_bar
        if not eta_bar > 0:
            raise ConfigError("step bound is not positive (resilience margin alpha <= 0)")
        return StepSchedule("constant", float(spec["eta_fraction"]) * eta_bar)

    @cached_property
    def bounds(self) -> TheoremBounds | None:
        """The guarantee governing this run, or ``None`` if no result applies."""
        cfg = self.config
        n, f, r = self.n, cfg.f, cfg.r
        if cfg.mode == "stochastic":
            b = self._stochastic_bounds(self.schedule.eta)
            if b.feasible and self.schedule.eta >= b.eta_bar:
                warnings.warn(f"step {self.schedule.eta:g} is not below the bound {b.eta_bar:g}", stacklevel=2)
            return b
        r_eff = 0 if cfg.mode == "sync" else r
        if cfg.filter == "sum":
            if self.faulty or f:
                return None
            cert = self.certificate(n - r_eff)
            eps = self.redundancy(0, r_eff).epsilon
            fn = bounds_thm2 if cfg.mode == "stale" else bounds_thm1
            return fn(n, r_eff, cert.mu, cert.gamma, eps)
        if cfg.filter == "cge":
            cert = self.certificate(n - f)
            eps = self.redundancy(f, r_eff).epsilon
            return bounds_thm3_cge(n, f, r_eff, cert.mu, cert.gamma, eps, self.delta)
        if cfg.dstar is not None:
            return TheoremBounds("thm3_cge", math.nan, True, radius=float(cfg.dstar), delta=self.delta)
        return None

    def aggregate_norm_bound(self) -> float | None:
        """``(n - r)(2 n mu eps + mu Gamma)`` for honest-only full-gradient runs."""
        cfg = self.config
        if self.faulty or cfg.mode == "stochastic" or cfg.filter == "cwtm":
            return None
        r_eff = 0 if cfg.mode == "sync" else cfg.r
        n = self.n
        if not 0 < n - r_eff:
            return None
        eps = self.redundancy(0, r_eff).epsilon
        gamma_box = self.box.max_distance(self.x_star)
        return (n - r_eff) * (2.0 * n * self.mu * eps + self.mu * gamma_box)
