"""Online policies: the constant-step subgradient benchmark, inverse-time
learning, shrinking-ball learners with and without restarts, the decoupled
exploration/exploitation policy, and a dual-resolving baseline proxy.

Runners accept pre-generated arrival arrays (the harness times only the
policy loop); when omitted they regenerate the instance's streams from its
seed, which yields bit-identical arrivals.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .domain import BoundsSpec, DecisionTrace, MarketConfig, dual_log_times
from .distributions import generate_instance
from .hindsight import solve_knapsack_m1, solve_simplex

__all__ = [
    "Constant", "InverseTime", "InverseTimeShift", "StepsizeSchedule",
    "AssgConfig", "RassgConfig", "TwoPhaseConfig", "PolicyResult",
    "benchmark_stepsize", "admissible_stepsize", "run_benchmark_subgradient",
    "run_learner_as_decider", "run_assg", "run_rassg",
    "configure_two_phase_theorem", "configure_two_phase_experiment",
    "run_two_phase", "run_resolving_baseline",
]


@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("stepsize must be positive")


@dataclass(frozen=True)
class InverseTime:
    """alpha_t = 1 / (mu * t), 1-based t within the run."""

    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("rate parameter must be positive")


@dataclass(frozen=True)
class InverseTimeShift:
    """alpha_t = 1 / (mu * (t + 1)), 1-based t within the run."""

    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("rate parameter must be positive")


StepsizeSchedule = Union[Constant, InverseTime, InverseTimeShift]


def benchmark_stepsize(bounds: BoundsSpec, horizon: int) -> float:
    """Constant stepsize sqrt(2*c_max / (m*d_min*(a_max+d_max)^2)) / sqrt(T)."""
    base = math.sqrt(2.0 * bounds.c_max / (bounds.m * bounds.d_min
                                           * (bounds.a_max + bounds.d_max) ** 2))
    return base / math.sqrt(horizon)


def admissible_stepsize(bounds: BoundsSpec) -> float:
    """Largest constant stepsize keeping every iterate inside the working ball:
    2*d_min / (3*m*(a_max+d_max)^2)."""
    return 2.0 * bounds.d_min / (3.0 * bounds.m * (bounds.a_max + bounds.d_max) ** 2)


@dataclass(frozen=True)
class AssgConfig:
    """Shrinking-ball learner configuration.

    ``inner`` holds the per-round projected-step counts (the last round
    absorbs any remainder of a fixed draw budget); stepsize starts at
    eps0 / (3 G^2) and halves each round together with the ball diameter.
    """

    inner: tuple[int, ...]
    eps0: float
    d1: float
    g_bound: float
    radius: float
    delta: float = 0.0
    growth_mod: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if len(self.inner) < 1 or min(self.inner) < 1:
            raise ValueError("need at least one round of at least one step")
        if min(self.eps0, self.d1, self.g_bound, self.radius) <= 0:
            raise ValueError("eps0, d1, g_bound, radius must be positive")

    @property
    def rounds(self) -> int:
        return len(self.inner)

    @property
    def eta1(self) -> float:
        return self.eps0 / (3.0 * self.g_bound ** 2)

    @property
    def total_draws(self) -> int:
        return int(sum(self.inner))

    @classmethod
    def from_accuracy(cls, eps0: float, eps: float, delta: float, gamma: float,
                      growth_mod: float, g_bound: float, radius: float) -> "AssgConfig":
        """Accuracy-driven configuration: rounds ceil(log2(2*eps0/eps)),
        initial diameter 2^(1-theta) * growth_mod^(-theta) * eps0 / eps^(1-theta)
        with theta = 1/gamma, and the high-probability inner count."""
        if not (0 < eps <= 2 * eps0):
            raise ValueError("need 0 < eps <= 2*eps0")
        theta = 1.0 / gamma
        k = max(1, math.ceil(math.log2(2.0 * eps0 / eps)))
        d1 = 2.0 ** (1.0 - theta) * growth_mod ** (-theta) * eps0 / eps ** (1.0 - theta)
        t = math.ceil(max(9.0, 1728.0 * math.log(k / delta))
                      * g_bound ** 2 * d1 ** 2 / eps0 ** 2)
        return cls((t,) * k, eps0, d1, g_bound, radius,
                   delta=delta, growth_mod=growth_mod, theta=theta)

    @classmethod
    def from_budget(cls, budget: int, horizon: int, bounds: BoundsSpec,
                    eps0: Optional[float] = None) -> "AssgConfig":
        """Budget-driven configuration for a fixed draw count.

        Targets accuracy 1/horizon to pick the round count, but never lets
        rounds starve below ~48 draws (the halving schedule needs enough
        averaging per round to hold its gains); the budget splits evenly
        with the remainder on the last round.  The initial diameter is the
        always-valid c_max/d_min.
        """
        if budget < 1:
            raise ValueError("budget must be >= 1")
        eps0 = bounds.c_max if eps0 is None else eps0
        k = max(1, math.ceil(math.log2(2.0 * eps0 * horizon)))
        k = max(1, min(k, budget // 48, budget))
        base, rem = divmod(budget, k)
        inner = [base] * k
        inner[-1] += rem
        return cls(tuple(inner), eps0, bounds.dual_radius,
                   bounds.subgradient_bound, bounds.dual_radius)


@dataclass(frozen=True)
class RassgConfig:
    """Restarted shrinking-ball learner: round s runs the base learner with
    inner count, diameter, and error estimate grown by the documented
    geometric schedules, which adapts to an unknown growth modulus."""

    restarts: int
    rounds: int
    inner1: int
    d1: float
    eps0: float
    omega: float
    gamma: float
    g_bound: float
    radius: float

    def __post_init__(self):
        if self.restarts < 1 or self.rounds < 1 or self.inner1 < 1:
            raise ValueError("need restarts, rounds, inner1 >= 1")
        if not (0 < self.omega <= 1):
            raise ValueError("omega must lie in (0, 1]")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")

    def round_params(self, s: int) -> tuple[int, float, float]:
        """(inner count, initial diameter, error estimate) of restart s (0-based)."""
        grow_t = 2.0 ** (2.0 * (1.0 - 1.0 / self.gamma) * s)
        grow_d = 2.0 ** ((1.0 - 1.0 / self.gamma) * s)
        return (math.ceil(self.inner1 * grow_t), self.d1 * grow_d,
                self.eps0 * self.omega ** s)

    @property
    def total_draws(self) -> int:
        return sum(self.round_params(s)[0] * self.rounds for s in range(self.restarts))


@dataclass(frozen=True)
class TwoPhaseConfig:
    """Exploration/exploitation split: decision stepsizes for both phases
    plus the learner run in parallel during exploration."""

    explore_len: int
    alpha_e: float
    alpha_p: float
    learner: str = "inverse-time"          # "inverse-time" | "assg" | "rassg"
    learner_mu: float = 1.0
    assg: Optional[AssgConfig] = None
    rassg: Optional[RassgConfig] = None
    delta_target: Optional[float] = None

    def __post_init__(self):
        if self.explore_len < 1:
            raise ValueError("exploration length must be >= 1")
        if self.alpha_e <= 0 or self.alpha_p <= 0:
            raise ValueError("stepsizes must be positive")
        if self.learner not in ("inverse-time", "assg", "rassg"):
            raise ValueError(f"unknown learner {self.learner!r}")
        if self.learner == "assg" and self.assg is None:
            raise ValueError("assg learner needs an AssgConfig")
        if self.learner == "rassg" and self.rassg is None:
            raise ValueError("rassg learner needs a RassgConfig")


@dataclass(frozen=True)
class PolicyResult:
    """One policy run: trace, final dual price, policy-loop seconds, the
    resolved parameters for auditability, and sparse dual snapshots."""

    trace: DecisionTrace
    y_final: np.ndarray
    policy_seconds: float
    resolved: dict
    dual_samples: tuple = ()
    flags: str = ""


def _sched_args(schedule: StepsizeSchedule) -> tuple[int, float, float]:
    if isinstance(schedule, Constant):
        return _kernels.SCHED_CONST, schedule.alpha, 1.0
    if isinstance(schedule, InverseTime):
        return _kernels.SCHED_INV_T, 0.0, schedule.mu
    if isinstance(schedule, InverseTimeShift):
        return _kernels.SCHED_INV_T1, 0.0, schedule.mu
    raise TypeError(f"unknown schedule {schedule!r}")


def _instance_arrays(config: MarketConfig, rewards, requests):
    if rewards is None or requests is None:
        _, rewards, requests = generate_instance(config.dist, config.horizon, config.seed)
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    requests = np.ascontiguousarray(np.atleast_2d(requests), dtype=np.float64)
    return rewards, requests


def _pack_samples(log_ts, log_ys):
    return tuple((int(t), tuple(float(v) for v in ys)) for t, ys in zip(log_ts, log_ys))


def run_benchmark_subgradient(
    config: MarketConfig,
    schedule: StepsizeSchedule,
    y_init: Optional[np.ndarray] = None,
    rewards: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
) -> PolicyResult:
    """Single-pass online subgradient policy (decide, subgradient, project)."""
    _kernels.warmup()
    rewards, requests = _instance_arrays(config, rewards, requests)
    m = config.n_resources
    y = np.zeros(m) if y_init is None else np.array(y_init, dtype=np.float64)
    if y.shape != (m,) or np.any(y < 0):
        raise ValueError("initial dual price must be a nonnegative m-vector")
    sched, alpha, mu = _sched_args(schedule)
    log_ts = dual_log_times(config.horizon)
    log_ys = np.zeros((len(log_ts), m))
    t0 = time.perf_counter()
    x, rev, cons = _kernels.subgradient_loop(
        rewards, requests, config.d, y, sched, alpha, mu, 0, log_ts, log_ys)
    secs = time.perf_counter() - t0
    trace = DecisionTrace(x, float(rev), cons)
    resolved = {"algo": "benchmark-subgradient", "schedule": repr(schedule)}
    return PolicyResult(trace, y, secs, resolved, _pack_samples(log_ts, log_ys))


def run_learner_as_decider(
    config: MarketConfig,
    mu: float = 1.0,
    rewards: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
) -> PolicyResult:
    """The dilemma policy: a 1/(mu t) learning schedule used for decisions.

    Converges well as an estimator of the optimal dual yet accumulates
    regret from its vanishing adaptivity; exposed as a named benchmark
    scenario for the unit-request uniform-reward market.
    """
    out = run_benchmark_subgradient(config, InverseTime(mu), None, rewards, requests)
    resolved = dict(out.resolved, algo="learner-as-decider", mu=mu)
    return PolicyResult(out.trace, out.y_final, out.policy_seconds, resolved,
                        out.dual_samples)


def run_assg(
    rewards: np.ndarray,
    requests: np.ndarray,
    cfg: AssgConfig,
    y0: np.ndarray,
    d: np.ndarray,
) -> np.ndarray:
    """Shrinking-ball stochastic subgradient learner over an arrival stream.

    Consumes cfg.total_draws arrivals; each round averages its projected
    iterates, then halves the stepsize and ball diameter.  Raises if the
    stream is shorter than the configured budget.
    """
    _kernels.warmup()
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    requests = np.ascontiguousarray(np.atleast_2d(requests), dtype=np.float64)
    if len(rewards) < cfg.total_draws:
        raise ValueError(
            f"stream exhausted: need {cfg.total_draws} draws, have {len(rewards)}")
    y0 = np.asarray(y0, dtype=np.float64)
    if np.any(y0 < 0) or np.linalg.norm(y0) > cfg.radius * (1 + 1e-12):
        raise ValueError("y0 must lie in the nonnegative ball of the configured radius")
    return _kernels.assg_loop(
        rewards, requests, np.asarray(d, dtype=np.float64), y0.copy(),
        np.asarray(cfg.inner, dtype=np.int64), cfg.eta1, cfg.d1, cfg.radius)


def run_rassg(
    rewards: np.ndarray,
    requests: np.ndarray,
    cfg: RassgConfig,
    y0: np.ndarray,
    d: np.ndarray,
) -> np.ndarray:
    """Restarted shrinking-ball learner; round s re-runs the base learner
    with geometrically grown inner counts and diameters."""
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    requests = np.ascontiguousarray(np.atleast_2d(requests), dtype=np.float64)
    if len(rewards) < cfg.total_draws:
        raise ValueError(
            f"stream exhausted: need {cfg.total_draws} draws, have {len(rewards)}")
    y = np.asarray(y0, dtype=np.float64)
    pos = 0
    for s in range(cfg.restarts):
        inner, d1, eps0 = cfg.round_params(s)
        sub = AssgConfig((inner,) * cfg.rounds, eps0, d1, cfg.g_bound, cfg.radius)
        need = sub.total_draws
        y = run_assg(rewards[pos:pos + need], requests[pos:pos + need], sub, y, d)
        pos += need
    return y


def configure_two_phase_theorem(
    horizon: int,
    eb,
    bounds: BoundsSpec,
    explore_mult: float = 1.0,
) -> TwoPhaseConfig:
    """Stepsizes and exploration length from the rate guarantees.

    Point optimum: explore ceil(T^((2g-2)/(2g-1)) * ln(T)^2) steps with
    alpha_e = T^(-(g-1)/(2g-1))/ln T, exploit with alpha_p = T^(-g/(2g-1)).
    Fat optimal set of diameter D: split at 2D/(2D+1) of the horizon with
    the square-root stepsizes in the bound constants.  ``explore_mult``
    scales the point-optimum exploration length (the analysis only pins it
    up to a constant).  Raises when alpha_e exceeds the iterate-boundedness
    threshold, naming the bound.
    """
    g = eb.gamma
    diam = eb.diam_ystar
    lnt = math.log(horizon)
    if diam == 0.0:
        t_e = math.ceil(explore_mult * horizon ** ((2 * g - 2) / (2 * g - 1)) * lnt ** 2)
        alpha_e = horizon ** (-(g - 1) / (2 * g - 1)) / lnt
        alpha_p = horizon ** (-g / (2 * g - 1))
    else:
        frac = 2 * diam / (2 * diam + 1)
        t_e = math.ceil(frac * horizon)
        base = 2.0 * bounds.c_max / (bounds.m * (bounds.a_max + bounds.d_max) ** 2
                                     * bounds.d_min)
        alpha_e = math.sqrt(base * (2 * diam + 1) / (2 * diam * horizon))
        alpha_p = math.sqrt(base * 2 * diam * (2 * diam + 1) / horizon)
    cap = admissible_stepsize(bounds)
    for name, val in (("alpha_e", alpha_e), ("alpha_p", alpha_p)):
        if val > cap:
            raise ValueError(
                f"horizon too small: {name}={val:.6g} exceeds the iterate bound "
                f"2*d_min/(3*m*(a_max+d_max)^2) = {cap:.6g}")
    if not 1 <= t_e < horizon:
        raise ValueError(f"exploration length {t_e} does not fit horizon {horizon}")
    assg = AssgConfig.from_budget(t_e, horizon, bounds)
    return TwoPhaseConfig(t_e, alpha_e, alpha_p, learner="assg", assg=assg,
                          delta_target=horizon ** (-1.0 / (2 * g - 1)))


def configure_two_phase_experiment(
    horizon: int,
    setting: str,
    bounds: Optional[BoundsSpec] = None,
) -> TwoPhaseConfig:
    """The benchmark-suite configurations.

    continuous: explore ceil(T^(2/3)) steps with alpha_e = T^(-1/3), exploit
    with alpha_p = T^(-2/3), inverse-time learner with untuned mu = 1.
    finite: explore ceil(50 ln T) with alpha_e = 1/sqrt(explore length),
    exploit with alpha_p = 1/T, shrinking-ball learner sized from the
    exploration budget.  Both exploration stepsizes follow the
    1/sqrt(exploration length) trade-off; a global 1/sqrt(T) there would
    make the exploration cost itself grow like sqrt(T).
    """
    if horizon < 100:
        raise ValueError("experiment configurations assume horizon >= 100")
    if setting == "continuous":
        t_e = math.ceil(horizon ** (2.0 / 3.0))
        return TwoPhaseConfig(t_e, horizon ** (-1.0 / 3.0), horizon ** (-2.0 / 3.0),
                              learner="inverse-time", learner_mu=1.0)
    if setting == "finite":
        if bounds is None:
            raise ValueError("finite setting needs the instance bounds for the learner")
        t_e = math.ceil(50.0 * math.log(horizon))
        if t_e >= horizon:
            raise ValueError(
                f"exploration length {t_e} = ceil(50 ln T) does not fit horizon "
                f"{horizon}; the finite protocol assumes T >= 1000")
        assg = AssgConfig.from_budget(t_e, horizon, bounds)
        return TwoPhaseConfig(t_e, t_e ** (-0.5), 1.0 / horizon,
                              learner="assg", assg=assg)
    raise ValueError("setting must be 'continuous' or 'finite'")


def run_two_phase(
    config: MarketConfig,
    tp: TwoPhaseConfig,
    rewards: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
) -> PolicyResult:
    """Decoupled exploration/exploitation policy.

    During exploration both paths consume each arrival: the decision path
    (constant alpha_e from zero prices) makes every decision, while the
    learner follows its own virtual iterates.  Exploitation restarts the
    decision path at the learner's output, clipped into the working ball,
    with stepsize alpha_p.
    """
    _kernels.warmup()
    rewards, requests = _instance_arrays(config, rewards, requests)
    horizon, m = config.horizon, config.n_resources
    t_e = tp.explore_len
    if not 1 <= t_e < horizon:
        raise ValueError(f"explore_len {t_e} must lie in [1, horizon)")
    bounds = config.dist.bounds()
    log_ts = dual_log_times(horizon, t_e)
    log_ys = np.zeros((len(log_ts), m))

    y_dec = np.zeros(m)
    t0 = time.perf_counter()
    x_e, rev_e, cons_e = _kernels.subgradient_loop(
        rewards[:t_e], requests[:t_e], config.d, y_dec,
        _kernels.SCHED_CONST, tp.alpha_e, 1.0, 0, log_ts, log_ys)

    if tp.learner == "inverse-time":
        y_learn = np.zeros(m)
        _kernels.subgradient_loop(
            rewards[:t_e], requests[:t_e], config.d, y_learn,
            _kernels.SCHED_INV_T, 0.0, tp.learner_mu, 0,
            np.empty(0, dtype=np.int64), np.zeros((0, m)))
    elif tp.learner == "assg":
        y_learn = run_assg(rewards[:t_e], requests[:t_e], tp.assg, np.zeros(m), config.d)
    else:
        y_learn = run_rassg(rewards[:t_e], requests[:t_e], tp.rassg, np.zeros(m), config.d)
    # Hand-off lands in the working ball regardless of the learner's path.
    y_start = _kernels.proj_orthant_ball0(y_learn, bounds.dual_radius)

    y_exp = y_start.copy()
    x_p, rev_p, cons_p = _kernels.subgradient_loop(
        rewards[t_e:], requests[t_e:], config.d, y_exp,
        _kernels.SCHED_CONST, tp.alpha_p, 1.0, t_e, log_ts, log_ys)
    secs = time.perf_counter() - t0

    trace = DecisionTrace(
        np.concatenate([x_e, x_p]), float(rev_e + rev_p), cons_e + cons_p,
        explore_len=t_e, explore_revenue=float(rev_e), explore_consumption=cons_e)
    resolved = {
        "algo": "two-phase",
        "explore_len": t_e,
        "alpha_e": tp.alpha_e,
        "alpha_p": tp.alpha_p,
        "learner": tp.learner,
        "learner_mu": tp.learner_mu,
        "learner_output": tuple(float(v) for v in y_learn),
        "restart_point": tuple(float(v) for v in y_start),
    }
    if tp.assg is not None:
        resolved["assg"] = {
            "inner": tp.assg.inner, "eps0": tp.assg.eps0, "d1": tp.assg.d1,
            "eta1": tp.assg.eta1, "g_bound": tp.assg.g_bound, "radius": tp.assg.radius,
        }
    if tp.delta_target is not None:
        resolved["delta_target"] = tp.delta_target
    return PolicyResult(trace, y_exp, secs, resolved, _pack_samples(log_ts, log_ys))


def run_resolving_baseline(
    config: MarketConfig,
    resolve_every: Optional[int] = None,
    rewards: Optional[np.ndarray] = None,
    requests: Optional[np.ndarray] = None,
) -> PolicyResult:
    """Generic dual-resolving baseline (labeled proxy in every output).

    At each resolve point it solves the LP of the empirical arrivals seen
    so far against the remaining per-period resources, then prices every
    decision with that dual until the next resolve.  An infeasible
    remaining-resource vector keeps the last feasible prices and sets the
    stale-prices flag.  Resolves every ceil(sqrt(T)) steps by default.
    """
    rewards, requests = _instance_arrays(config, rewards, requests)
    horizon, m = config.horizon, config.n_resources
    if resolve_every is None:
        resolve_every = math.ceil(math.sqrt(horizon))
    if resolve_every < 1:
        raise ValueError("resolve_every must be >= 1")
    b = config.b
    x = np.zeros(horizon)
    cons = np.zeros(m)
    rev = 0.0
    y = np.zeros(m)
    flags = "proxy"
    n_resolves = 0
    t0 = time.perf_counter()
    t = 0
    while t < horizon:
        block = min(resolve_every, horizon - t)
        remaining = b - cons
        if np.all(remaining >= 0):
            d_rem = remaining / (horizon - t)
            seen_c, seen_a = rewards[:t + 1], requests[:t + 1]
            if m == 1:
                sol = solve_knapsack_m1(seen_c, seen_a[:, 0], float(d_rem[0]) * (t + 1))
            else:
                sol = solve_simplex(seen_c, seen_a, d_rem * (t + 1),
                                    warm_price=y if n_resolves else None)
            y = sol.y
            n_resolves += 1
        elif "stale-prices" not in flags:
            flags += ",stale-prices"
        xs = (rewards[t:t + block] >= requests[t:t + block] @ y).astype(np.float64)
        x[t:t + block] = xs
        rev += float(rewards[t:t + block] @ xs)
        cons += xs @ requests[t:t + block]
        t += block
    secs = time.perf_counter() - t0
    trace = DecisionTrace(x, rev, cons)
    resolved = {"algo": "resolving-baseline", "resolve_every": resolve_every,
                "n_resolves": n_resolves}
    return PolicyResult(trace, y, secs, resolved, flags=flags)
