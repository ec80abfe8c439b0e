"""Core instance, trace, and metric types shared by every policy.

Dual prices are plain nonnegative float64 ndarrays throughout the package;
``check_dual_price`` validates one at API boundaries.  All types here are
immutable after construction and safe to share across concurrent trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .distributions import DistributionSpec

__all__ = [
    "Arrival",
    "BoundsSpec",
    "MarketConfig",
    "DecisionTrace",
    "RunReport",
    "TRIAL_CSV_HEADER",
    "regret",
    "violation",
    "exploration_score",
    "dual_log_times",
]

#: Column order of one serialized trial row (see RunReport.csv_row).
TRIAL_CSV_HEADER = (
    "trial_id,algo,dist,T,m,seed,regret,violation,r_plus_v,hindsight,T_e,wall_time_s"
)


@dataclass(frozen=True)
class Arrival:
    """One customer: a reward and an m-vector resource request."""

    reward: float
    request: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "request", np.atleast_1d(np.asarray(self.request, dtype=np.float64)))


@dataclass(frozen=True)
class BoundsSpec:
    """Data bounds of an instance family and the constants derived from them.

    ``a_max``/``c_max`` bound |a_i| and |c| samplewise; ``d_min``/``d_max``
    bracket the per-period resource vector.  When a generating recipe is
    unbounded the recorded values are a 99.999th-percentile envelope and
    ``envelope`` is set, so reports can flag that the almost-sure bound
    assumption does not literally hold.
    """

    m: int
    a_max: float
    c_max: float
    d_min: float
    d_max: float
    envelope: bool = False

    def __post_init__(self):
        if min(self.a_max, self.c_max, self.d_min, self.d_max) <= 0 or self.d_min > self.d_max:
            raise ValueError("bounds must be positive with d_min <= d_max")

    @property
    def subgradient_bound(self) -> float:
        """Norm bound sqrt(m) * (a_max + d_max) on the stochastic subgradient."""
        return math.sqrt(self.m) * (self.a_max + self.d_max)

    @property
    def dual_radius(self) -> float:
        """Radius c_max / d_min of the ball containing every dual optimum."""
        return self.c_max / self.d_min


@dataclass(frozen=True)
class MarketConfig:
    """One OLP instance family: horizon, resources, distribution, and seed."""

    horizon: int
    n_resources: int
    d: np.ndarray
    dist: "DistributionSpec"
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "d", np.atleast_1d(np.asarray(self.d, dtype=np.float64)))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_resources < 1 or self.d.shape != (self.n_resources,):
            raise ValueError("d must have length n_resources >= 1")
        if np.any(self.d <= 0):
            raise ValueError("per-period resources must be positive")

    @property
    def b(self) -> np.ndarray:
        """Total resource vector: horizon * d, exactly."""
        return self.horizon * self.d


@dataclass(frozen=True)
class DecisionTrace:
    """Accept/reject decisions of one run with cached aggregates.

    Decisions are kept as full-precision scalars in [0, 1] even though the
    online policies emit {0, 1}: the hindsight solver and the resolving
    baseline produce fractional values, and one trace type serves them all.
    ``explore_len`` marks the phase boundary for two-phase policies (0 for
    single-phase runs), with the exploration aggregates split out.
    """

    decisions: np.ndarray
    revenue: float
    consumption: np.ndarray
    explore_len: int = 0
    explore_revenue: float = 0.0
    explore_consumption: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "decisions", np.asarray(self.decisions, dtype=np.float64))
        object.__setattr__(self, "consumption", np.atleast_1d(np.asarray(self.consumption, dtype=np.float64)))
        if self.explore_consumption is not None:
            object.__setattr__(
                self, "explore_consumption",
                np.atleast_1d(np.asarray(self.explore_consumption, dtype=np.float64)),
            )
        if not (0 <= self.explore_len <= len(self.decisions)):
            raise ValueError("explore_len out of range")

    @property
    def horizon(self) -> int:
        return len(self.decisions)

    def recompute_totals(self, rewards: np.ndarray, requests: np.ndarray) -> tuple[float, np.ndarray]:
        """Recompute (revenue, consumption) from raw arrivals and decisions."""
        x = self.decisions
        return float(rewards @ x), np.asarray(x @ requests, dtype=np.float64)


@dataclass(frozen=True)
class RunReport:
    """One trial's scored outcome."""

    trial_id: int
    algo: str
    dist_name: str
    horizon: int
    n_resources: int
    seed: int
    regret: float
    violation: float
    hindsight_value: float
    explore_score: float
    explore_len: int
    wall_time_s: float
    total_time_s: float = 0.0
    dual_samples: tuple = field(default_factory=tuple)
    flags: str = ""

    @property
    def r_plus_v(self) -> float:
        return self.regret + self.violation

    def csv_row(self) -> str:
        """Serialize to one CSV row matching TRIAL_CSV_HEADER."""
        vals = (
            str(self.trial_id), self.algo, self.dist_name, str(self.horizon),
            str(self.n_resources), str(self.seed),
            repr(self.regret), repr(self.violation), repr(self.r_plus_v),
            repr(self.hindsight_value), str(self.explore_len), repr(self.wall_time_s),
        )
        return ",".join(vals)


def regret(trace: DecisionTrace, hindsight_value: float) -> float:
    """Hindsight optimum minus realized revenue (negative if over-consuming)."""
    return float(hindsight_value) - trace.revenue


def violation(trace: DecisionTrace, b: np.ndarray) -> float:
    """Euclidean norm of the positive part of (consumption - b)."""
    over = np.maximum(trace.consumption - np.asarray(b, dtype=np.float64), 0.0)
    return float(np.linalg.norm(over))


def exploration_score(
    trace: DecisionTrace,
    f_star: float,
    explore_len: int,
    d: np.ndarray,
    rewards: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
) -> float:
    """Single-trial sample of the exploration-phase score V(T_e).

    Sums the norm of positive over-consumption beyond the pro-rata resource
    share with the gap between the optimal per-period dual value ``f_star``
    and realized per-step revenue, over the first ``explore_len`` periods.
    Uses the trace's stored phase split when it matches; otherwise the raw
    arrivals must be supplied for a recomputation.
    """
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    if not (1 <= explore_len <= trace.horizon):
        raise ValueError(f"explore_len {explore_len} out of range [1, {trace.horizon}]")
    if explore_len == trace.explore_len and trace.explore_consumption is not None:
        cons_e = trace.explore_consumption
        rev_e = trace.explore_revenue
    else:
        if rewards is None or requests is None:
            raise ValueError("explore_len differs from the stored split; pass rewards/requests")
        x = trace.decisions[:explore_len]
        cons_e = x @ np.atleast_2d(requests)[:explore_len]
        rev_e = float(rewards[:explore_len] @ x)
    over = np.maximum(cons_e - explore_len * d, 0.0)
    return float(np.linalg.norm(over)) + explore_len * float(f_star) - rev_e


def dual_log_times(horizon: int, explore_len: int = 0) -> np.ndarray:
    """Geometrically spaced snapshot times (powers of 2, phase switch, final).

    Times are 1-based step indices; a snapshot at time t records the dual
    iterate after the update of step t.  Keeps diagnostics memory O(log T).
    """
    ts = {1, horizon}
    p = 1
    while p <= horizon:
        ts.add(p)
        p *= 2
    if 0 < explore_len < horizon:
        ts.add(explore_len)
        ts.add(explore_len + 1)
    return np.array(sorted(t for t in ts if 1 <= t <= horizon), dtype=np.int64)
