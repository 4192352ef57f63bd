"""Closed-form convergence constants for the supported problem variants.

``thm1``/``thm2``: full gradients, stragglers only, sum aggregator.
``thm3_cge``: full gradients, Byzantine agents and stragglers, CGE filter.
``thm4_bs``/``thm4_cs``/``thm4_ds``: stochastic gradients with a constant
step for the Byzantine-only, straggler-only and combined settings.

The combined-setting margin is ``((n - f) gamma - 2 (f + r) mu) / ((n - r) gamma)``,
i.e. ``1 - (f - r)/m - (2 mu / gamma)(f + r)/m`` with ``m = n - r``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

Variant = Literal["thm1", "thm2", "thm3_cge", "thm4_bs", "thm4_cs", "thm4_ds"]
STOCHASTIC_VARIANTS = {"BS": "thm4_bs", "CS": "thm4_cs", "DS": "thm4_ds"}


@dataclass(frozen=True)
class TheoremBounds:
    variant: Variant
    alpha: float
    feasible: bool
    radius: float | None = None
    eta_bar: float | None = None
    eta: float | None = None
    rho: float | None = None
    M: float | None = None
    Gamma: float | None = None
    delta: float | None = None
    xi: float | None = None

    @property
    def D(self) -> float | None:
        return self.radius

    @property
    def asymptotic_radius(self) -> float | None:
        """``M / (1 - rho)``, the limiting mean-square error, when defined."""
        if self.rho is None or self.M is None or not self.rho < 1:
            return None
        return self.M / (1.0 - self.rho)

    def mean_square_bound(self, t: int, initial_sq: float) -> float:
        """``rho^(t+1) ||x0 - target||^2 + (1 - rho^(t+1)) / (1 - rho) * M``."""
        if self.rho is None or self.M is None:
            raise ValueError("mean-square bound only exists for stochastic variants")
        pk = self.rho ** (t + 1)
        if self.rho == 1.0:
            return initial_sq + (t + 1) * self.M
        return pk * initial_sq + (1.0 - pk) / (1.0 - self.rho) * self.M

    def to_dict(self) -> dict:
        out = asdict(self)
        out["asymptotic_radius"] = self.asymptotic_radius
        return out


def _require_positive(**kw):
    for name, val in kw.items():
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")


def bounds_thm1(n: int, r: int, mu: float, gamma: float, epsilon: float) -> TheoremBounds:
    """Margin ``1 - (r/n)(mu/gamma)`` and radius ``2 r mu eps / (alpha gamma)``."""
    _require_positive(mu=mu, gamma=gamma)
    alpha = 1.0 - (r / n) * (mu / gamma)
    feasible = alpha > 0
    D = 2.0 * r * mu * epsilon / (alpha * gamma) if feasible else math.inf
    return TheoremBounds("thm1", alpha, feasible, radius=D)


def bounds_thm2(n: int, r: int, mu: float, gamma: float, epsilon: float) -> TheoremBounds:
    b = bounds_thm1(n, r, mu, gamma, epsilon)
    return TheoremBounds("thm2", b.alpha, b.feasible, radius=b.radius)


def cge_alpha(n: int, f: int, r: int, mu: float, gamma: float) -> float:
    m = n - r
    return ((n - f) * gamma - 2.0 * (f + r) * mu) / (m * gamma)


def bounds_thm3_cge(
    n: int, f: int, r: int, mu: float, gamma: float, epsilon: float, delta: float
) -> TheoremBounds:
    _require_positive(mu=mu, gamma=gamma, delta=delta)
    m = n - r
    alpha = cge_alpha(n, f, r, mu, gamma)
    feasible = alpha > 0
    if not feasible:
        return TheoremBounds("thm3_cge", alpha, False, radius=math.inf, delta=delta)
    core = 4.0 * mu * (f + r) * epsilon / (alpha * gamma)
    d_star = core + delta
    xi = alpha * m * gamma * delta * (core + delta)
    return TheoremBounds("thm3_cge", alpha, True, radius=d_star, delta=delta, xi=xi)


def bounds_thm4(
    variant: str,
    n: int,
    f: int,
    r: int,
    mu: float,
    gamma: float,
    sigma: float,
    epsilon: float,
    eta: float,
    Gamma: float,
) -> TheoremBounds:
    """Constant-step stochastic constants for ``BS``, ``CS`` or ``DS``.

    ``BS`` ignores ``r`` (no stragglers) and ``CS`` ignores ``f`` (no
    faulty agents).
    """
    key = variant.upper()
    if key not in STOCHASTIC_VARIANTS:
        raise ValueError(f"unknown stochastic variant {variant!r}; use BS, CS or DS")
    _require_positive(mu=mu, gamma=gamma, eta=eta)
    if Gamma < 0 or sigma < 0 or epsilon < 0:
        raise ValueError("Gamma, sigma and epsilon must be nonnegative")
    e, s, G = epsilon, sigma, Gamma
    if key == "BS":
        alpha = 1.0 - (f / n) * (gamma + 2.0 * mu) / gamma
        eta_bar = 2.0 * n * gamma * alpha / ((n - f) ** 2 * mu**2)
        rho = 1.0 - 2.0 * (n - f) * eta * gamma + 4.0 * f * eta * mu + (n - f) ** 2 * eta**2 * mu**2
        M = (
            4.0 * n * eta * mu * e * (2.0 * f + (n - f) ** 2 * eta * mu) * G
            + 4.0 * n**2 * (n - f) ** 2 * eta**2 * mu**2 * e**2
            + 2.0 * f * eta * s * G
            + (n - f) ** 2 * eta**2 * s**2
        )
        feasible = alpha > 0
    elif key == "CS":
        alpha = 1.0 - (r / n) * (mu / gamma)
        eta_bar = 2.0 * n * gamma * alpha / ((n - r) ** 2 * mu**2)
        rho = 1.0 - 2.0 * (n * gamma - r * mu) * eta + (n - r) ** 2 * eta**2 * mu**2
        M = (
            4.0 * n * eta * mu * e * (r + (n - r) ** 2 * eta * mu) * G
            + 4.0 * n**2 * (n - r) ** 2 * eta**2 * mu**2 * e**2
            + (n - r) ** 2 * eta**2 * s**2
        )
        feasible = alpha > 0
    else:
        m = n - r
        alpha = cge_alpha(n, f, r, mu, gamma)
        eta_bar = 2.0 * m * gamma * alpha / ((m - f) ** 2 * mu**2)
        rho = 1.0 - 2.0 * (n - f) * eta * gamma + 4.0 * (f + r) * eta * mu + (m - f) ** 2 * eta**2 * mu**2
        M = (
            4.0 * m * eta * mu * e * (2.0 * (f + r) + (m - f) ** 2 * eta * mu) * G
            + 4.0 * m**2 * (m - f) ** 2 * eta**2 * mu**2 * e**2
            + 2.0 * (f + r) * eta * s * G
            + (m - f) ** 2 * eta**2 * s**2
        )
        feasible = alpha > 0 and n >= 2 * f + r / 2
    return TheoremBounds(
        STOCHASTIC_VARIANTS[key], alpha, feasible, eta_bar=eta_bar, eta=eta, rho=rho, M=M, Gamma=Gamma
    )


def check_rho_range(bounds: TheoremBounds) -> bool:
    return bounds.rho is not None and 0.0 <= bounds.rho < 1.0
