"""Dual-function machinery: the pricing rule, stochastic subgradients,
projections, closed forms for the multi-secretary family, and the
error-bound diagnostics.

Dual prices are nonnegative float64 vectors.  Every operation here is pure;
nothing holds state, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .domain import Arrival, MarketConfig
from .distributions import DistributionSpec, Finite, generate_instance
from .hindsight import solve_expected_dual_finite, solve_knapsack_m1, solve_simplex

__all__ = [
    "ErrorBoundSpec", "DualConvergenceStat", "check_dual_price",
    "decide", "stochastic_subgradient", "project_nonneg", "project_ball_orthant",
    "sample_dual_value", "multisecretary_dual", "multisecretary_optimum",
    "dist_to_optimal", "empirical_dual_convergence",
]


@dataclass(frozen=True)
class ErrorBoundSpec:
    """Growth condition of the expected dual around its optimal set.

    States that the dual objective grows at least like
    ``mu * dist(y, optimal set) ** gamma`` on the working ball.  ``y_star``
    is supplied in the closed-form cases (singleton optimum); instance
    families without a known modulus are fitted empirically rather than
    asserted.  The general-growth constants of the power-law example
    (lambda_4, lambda_5, p) are documentation-only: no generator here
    instantiates them.
    """

    gamma: float
    mu: float
    diam_ystar: float = 0.0
    y_star: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.gamma < 1.0 or self.mu <= 0.0 or self.diam_ystar < 0.0:
            raise ValueError("need gamma >= 1, mu > 0, diam >= 0")
        if self.y_star is not None:
            object.__setattr__(
                self, "y_star", np.atleast_1d(np.asarray(self.y_star, dtype=np.float64)))


def check_dual_price(y: np.ndarray) -> np.ndarray:
    """Validate and return a dual price vector (nonnegative float64)."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if y.ndim != 1 or np.any(y < 0):
        raise ValueError("dual price must be a nonnegative vector")
    return y


def decide(y: np.ndarray, arrival: Arrival) -> int:
    """Accept iff the reward covers the priced resource cost (ties accept)."""
    return int(arrival.reward >= float(arrival.request @ y))


def stochastic_subgradient(y: np.ndarray, arrival: Arrival, d: np.ndarray) -> np.ndarray:
    """d - a * x at the price y; unbiased for the expected dual's gradient."""
    return np.asarray(d, dtype=np.float64) - arrival.request * decide(y, arrival)


def project_nonneg(y: np.ndarray) -> np.ndarray:
    """Componentwise positive part."""
    return np.maximum(np.asarray(y, dtype=np.float64), 0.0)


def project_ball_orthant(
    y: np.ndarray, radius: float, center: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Exact Euclidean projection onto {y >= 0, ||y - center|| <= radius}.

    Origin-centered balls project in a single clip-then-scale pass (exact
    for the orthant/ball pair); a general center runs Dykstra alternation
    to the 1e-12 fixed point.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if center is None:
        return _kernels.proj_orthant_ball0(y, radius)
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    return _kernels.proj_capped_ball(y, np.inf, center, radius)


def sample_dual_value(y: np.ndarray, rewards: np.ndarray, requests: np.ndarray,
                      d: np.ndarray) -> float:
    """Finite-sample dual objective: mean of <d, y> + [c_t - <a_t, y>]_+."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if len(rewards) == 0:
        raise ValueError("need at least one arrival")
    requests = np.atleast_2d(np.asarray(requests, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    return float(np.asarray(d) @ y) + float(
        np.mean(np.maximum(rewards - requests @ y, 0.0)))


def multisecretary_dual(y: float, d: float = 0.5) -> float:
    """Expected dual of the unit-request uniform-reward family, exactly.

    For rewards U[0, 1] and unit requests at resource rate d:
    f(y) = d*y + (1-y)^2/2 on [0, 1] and d*y beyond; at d = 1/2 this is
    the quadratic y^2/2 - y/2 + 1/2 with unique minimizer 1 - d.
    """
    if y < 0:
        raise ValueError("dual price must be nonnegative")
    if y >= 1.0:
        return d * y
    return d * y + 0.5 * (1.0 - y) ** 2


def multisecretary_optimum(d: float = 0.5) -> tuple[float, float]:
    """(y_star, f(y_star)) of the multi-secretary expected dual."""
    y_star = max(0.0, 1.0 - d)
    return y_star, multisecretary_dual(y_star, d)


def dist_to_optimal(y: np.ndarray, eb: ErrorBoundSpec) -> float:
    """Distance to the known optimal dual (singleton from the spec).

    Finite supports with a possibly fat optimal face should use the face
    oracle on the expected-LP solution instead.
    """
    if eb.y_star is None:
        raise ValueError("ErrorBoundSpec carries no y_star; use the face oracle")
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    return float(np.linalg.norm(y - eb.y_star))


@dataclass(frozen=True)
class DualConvergenceStat:
    """Mean gamma-power distance of hindsight duals to the expected optimum."""

    horizon: int
    gamma: float
    trials: int
    mean_dist_pow: float


def empirical_dual_convergence(
    config: MarketConfig,
    trials: int,
    gamma: float,
    eb: Optional[ErrorBoundSpec] = None,
) -> DualConvergenceStat:
    """Sample mean of dist(hindsight dual, optimal set)^gamma across trials.

    Trials re-seed from config.seed + trial index.  The optimal set comes
    from ``eb.y_star`` when given; otherwise the multi-secretary closed
    form or, for finite supports, the expected-LP face oracle.
    """
    spec: DistributionSpec = config.dist
    total = 0.0
    for trial in range(trials):
        cfg, c, a = generate_instance(spec, config.horizon, config.seed + trial)
        if cfg.n_resources == 1:
            sol = solve_knapsack_m1(c, a[:, 0], float(cfg.b[0]))
        else:
            sol = solve_simplex(c, a, cfg.b)
        if eb is not None and eb.y_star is not None:
            dist = float(np.linalg.norm(sol.y - eb.y_star))
        elif isinstance(spec, Finite):
            face = solve_expected_dual_finite(spec.support, cfg.d).face
            dist = face.distance(sol.y)
        elif spec.name == "multi-secretary":
            y_star, _ = multisecretary_optimum(float(cfg.d[0]))
            dist = abs(float(sol.y[0]) - y_star)
        else:
            raise ValueError("no optimal-dual oracle for this distribution")
        total += dist ** gamma
    return DualConvergenceStat(config.horizon, gamma, trials, total / trials)
