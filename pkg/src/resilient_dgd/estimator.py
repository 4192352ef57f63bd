"""scikit-learn style front end for the simulator.

``ResilientDGD`` treats a :class:`CostFamily` as its training input: ``fit``
runs the server loop and stores the final estimate in ``coef_``. Because it
derives from :class:`sklearn.base.BaseEstimator`, ``get_params``,
``set_params`` and ``clone`` work as usual, so parameter sweeps can use the
standard tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .config import RunConfig
from .costs import CostFamily
from .engine import run
from .problem import ProblemInstance


def _as_family(X) -> CostFamily:
    if isinstance(X, CostFamily):
        return X
    if isinstance(X, dict):
        return CostFamily.from_dict(X)
    if isinstance(X, str):
        return CostFamily.load(X)
    raise TypeError(f"expected a CostFamily, dict or path, got {type(X).__name__}")


class ResilientDGD(BaseEstimator):
    """Projected gradient descent tolerant to ``f`` faulty agents and ``r`` stragglers.

    Parameters mirror :class:`RunConfig`; ``box`` is a half-width (cube
    around the origin) or a ``(lower, upper)`` pair.

    Attributes set by ``fit``: ``coef_`` (final estimate), ``target_``,
    ``trace_``, ``bounds_`` and ``n_iter_``.
    """

    def __init__(
        self,
        f=0,
        r=0,
        mode="sync",
        aggregator="sum",
        tau=0,
        problem=None,
        roles=None,
        delay=None,
        eta=None,
        schedule="harmonic",
        max_iter=1000,
        box=10.0,
        sigma=0.0,
        batch_size=1,
        random_state=0,
    ):
        self.f = f
        self.r = r
        self.mode = mode
        self.aggregator = aggregator
        self.tau = tau
        self.problem = problem
        self.roles = roles
        self.delay = delay
        self.eta = eta
        self.schedule = schedule
        self.max_iter = max_iter
        self.box = box
        self.sigma = sigma
        self.batch_size = batch_size
        self.random_state = random_state

    def _config(self, family: CostFamily) -> RunConfig:
        if np.isscalar(self.box):
            box = {"half_width": float(self.box)}
        else:
            lower, upper = self.box
            box = {"lower": list(np.broadcast_to(lower, family.dimension).astype(float)),
                   "upper": list(np.broadcast_to(upper, family.dimension).astype(float))}
        if self.schedule == "harmonic":
            schedule = {"kind": "harmonic", "eta0": self.eta}
        elif self.eta is None:
            schedule = {"kind": "constant", "eta_fraction": 0.5}
        else:
            schedule = {"kind": "constant", "eta": float(self.eta)}
        doc = {
            "family": {"inline": family.to_dict()},
            "f": int(self.f),
            "r": int(self.r),
            "mode": self.mode,
            "tau": int(self.tau),
            "problem": self.problem,
            "filter": self.aggregator,
            "roles": list(self.roles) if self.roles is not None else None,
            "delay": dict(self.delay) if self.delay is not None else {"kind": "constant", "value": 0},
            "schedule": schedule,
            "iterations": int(self.max_iter),
            "box": box,
            "sigma": float(self.sigma),
            "batch_size": int(self.batch_size),
            "seed": int(self.random_state),
        }
        return RunConfig.from_dict(doc)

    def fit(self, X, y=None):
        family = _as_family(X)
        problem = ProblemInstance.from_config(self._config(family))
        self.trace_ = run(problem)
        self.coef_ = self.trace_.xs[-1].copy()
        self.target_ = problem.target.copy()
        self.bounds_ = problem.bounds
        self.n_iter_ = self.trace_.iterations
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit before using this estimator")

    def predict(self, X=None) -> np.ndarray:
        """The fitted estimate (the input is accepted for API symmetry only)."""
        self._check_fitted()
        return self.coef_.copy()

    def score(self, X, y=None) -> float:
        """Negative distance from ``coef_`` to the honest minimizer of ``X``."""
        self._check_fitted()
        family = _as_family(X)
        problem = ProblemInstance.from_config(self._config(family))
        return -float(np.linalg.norm(self.coef_ - problem.target))
