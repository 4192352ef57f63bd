"""Simulator for resilient distributed gradient descent.

Agents hold quadratic costs; a server runs projected gradient descent while
some agents straggle and some send Byzantine messages. The package computes
the exact redundancy parameter of a cost family and checks simulated
trajectories against the closed-form convergence bounds.
"""

from .bounds import (
    TheoremBounds,
    bounds_thm1,
    bounds_thm2,
    bounds_thm3_cge,
    bounds_thm4,
    check_rho_range,
)
from .box import FeasibleBox, project
from .config import RunConfig
from .costs import (
    CostFamily,
    QuadraticCost,
    SmoothnessCertificate,
    StochasticGradConfig,
    certify_constants,
    generate_family,
    gradient,
    line3,
    stochastic_gradient,
)
from .engine import Trace, run, run_monte_carlo
from .estimator import ResilientDGD
from .faults import ByzantineStrategy, corrupt, parse_role
from .filters import FilterKind, aggregate_cge, aggregate_cwtm, aggregate_sum
from .problem import ProblemInstance, StepSchedule
from .redundancy import RedundancyReport, compute_epsilon, subset_minimizer, target_minimizer
from .simnet import ArrivalSet, DelayModel, StaleBuffer, collect_fresh, collect_stale

__version__ = "0.1.0"
