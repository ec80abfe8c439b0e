"""Seedable simulation lab for online linear programming with first-order
dual-price policies, exact hindsight optima, and a benchmark harness."""

from .domain import (
    Arrival, BoundsSpec, DecisionTrace, MarketConfig, RunReport,
    TRIAL_CSV_HEADER, exploration_score, regret, violation,
)
from .distributions import (
    BetaCont, ContinuousU1, Custom, Finite, FiniteSupport, MultiSecretary,
    ResourceLaw, WideUniform, continuous_spec, finite_spec,
    finite_support_build, generate_instance, sample_arrival, sample_resources,
    substream,
)
from .dual_geometry import (
    ErrorBoundSpec, decide, dist_to_optimal, empirical_dual_convergence,
    multisecretary_dual, multisecretary_optimum, project_ball_orthant,
    project_nonneg, sample_dual_value, stochastic_subgradient,
)
from .hindsight import (
    DualFace, OfflineSolution, SimplexError, SimplexOptions,
    solve_expected_dual_finite, solve_knapsack_m1, solve_simplex,
)
from .algorithms import (
    AssgConfig, Constant, InverseTime, InverseTimeShift, PolicyResult,
    RassgConfig, TwoPhaseConfig, admissible_stepsize, benchmark_stepsize,
    configure_two_phase_experiment, configure_two_phase_theorem,
    run_assg, run_benchmark_subgradient, run_learner_as_decider,
    run_rassg, run_resolving_baseline, run_two_phase,
)
from .bench import (
    AggregateRow, DEFAULT_SEED, ExperimentPlan, fit_growth_slope, log_grid,
    run_plan, timing_table,
)

__version__ = "0.1.0"
