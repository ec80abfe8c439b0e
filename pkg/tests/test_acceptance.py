"""Acceptance suite: every criterion runs at its stated tolerance and ends
with one pass/fail line (run with ``pytest tests/test_acceptance.py -s`` to
see them stream)."""

import itertools
import time

import numpy as np
import pytest

from olplab.bench import DEFAULT_SEED, ExperimentPlan, run_plan, slope_by_algo
from olplab.distributions import MultiSecretary, ResourceLaw, generate_instance
from olplab.dual_geometry import (
    multisecretary_dual, multisecretary_optimum, sample_dual_value,
    empirical_dual_convergence,
)
from olplab.algorithms import Constant, run_benchmark_subgradient, run_learner_as_decider
from olplab.hindsight import solve_knapsack_m1, solve_simplex

FIXED_HALF = MultiSecretary(d_law=ResourceLaw("fixed", value=0.5))


def report(num, ok, detail):
    line = f"ACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def multisecretary_plan(tmp_path_factory):
    """Shared benchmark-protocol run: both policies, full grid, 100 trials."""
    out = tmp_path_factory.mktemp("ms_plan")
    plan = ExperimentPlan(name="accept-ms", dist="continuous-2",
                          algorithms=("benchmark", "two-phase"),
                          trials=100, seed=DEFAULT_SEED, out_dir=str(out))
    t0 = time.perf_counter()
    rows = run_plan(plan)
    return rows, time.perf_counter() - t0


def test_criterion_1_benchmark_rate(multisecretary_plan):
    rows, elapsed = multisecretary_plan
    slope = slope_by_algo(rows)["benchmark"]
    ok = 0.40 <= slope <= 0.60 and elapsed < 120.0
    report(1, ok, f"benchmark slope {slope:.3f} in [0.40, 0.60], "
                  f"plan runtime {elapsed:.1f}s < 120s")


def test_criterion_2_two_phase_continuous_rate(multisecretary_plan):
    rows, _ = multisecretary_plan
    slopes = slope_by_algo(rows)
    gap = slopes["benchmark"] - slopes["two-phase"]
    ok = 0.20 <= slopes["two-phase"] <= 0.45 and gap >= 0.08
    report(2, ok, f"two-phase slope {slopes['two-phase']:.3f} in [0.20, 0.45], "
                  f"below benchmark by {gap:.3f} >= 0.08")


def test_criterion_3_two_phase_finite_rate(tmp_path):
    plan = ExperimentPlan(name="accept-fin", dist="finite-1",
                          algorithms=("benchmark", "two-phase"),
                          t_grid=(10 ** 3, 10 ** 5), trials=100,
                          seed=DEFAULT_SEED, out_dir=str(tmp_path))
    rows = {(r.algo, r.horizon): r.mean_r_plus_v for r in run_plan(plan)}
    m1_ratio = rows[("benchmark", 10 ** 5)] / rows[("benchmark", 10 ** 3)]
    m2_ratio = rows[("two-phase", 10 ** 5)] / rows[("two-phase", 10 ** 3)]
    ok = m2_ratio <= 3.0 and m1_ratio >= 5.0
    report(3, ok, f"finite-1 mean r+v ratio 1e5/1e3: two-phase {m2_ratio:.2f} <= 3, "
                  f"benchmark {m1_ratio:.2f} >= 5")


def test_criterion_4_desk_scale_ordering(tmp_path):
    plan = ExperimentPlan(name="accept-t2", dist="continuous-1",
                          algorithms=("benchmark", "two-phase"),
                          t_grid=(10 ** 5,), trials=15,
                          seed=DEFAULT_SEED, out_dir=str(tmp_path))
    rows = {r.algo: r.mean_r_plus_v for r in run_plan(plan)}
    ok = rows["two-phase"] <= rows["benchmark"] / 3.0
    report(4, ok, f"continuous-1 at T=1e5: two-phase {rows['two-phase']:.1f} "
                  f"<= benchmark {rows['benchmark']:.1f} / 3")


def test_criterion_5_dilemma(tmp_path):
    plan = ExperimentPlan(name="accept-dilemma", dist=FIXED_HALF,
                          algorithms=("learner-decider",),
                          trials=100, seed=DEFAULT_SEED, out_dir=str(tmp_path))
    slope = slope_by_algo(run_plan(plan))["learner-decider"]
    horizon = 10 ** 5
    errs = []
    for trial in range(100):
        config, c, a = generate_instance(FIXED_HALF, horizon, DEFAULT_SEED + trial)
        res = run_learner_as_decider(config, 1.0, rewards=c, requests=a)
        errs.append(abs(float(res.y_final[0]) - 0.5))
    med = float(np.median(errs))
    tol = 3.0 / np.sqrt(horizon)
    ok = slope >= 0.40 and med <= tol
    report(5, ok, f"learner-as-decider slope {slope:.3f} >= 0.40 while final "
                  f"dual error median {med:.5f} <= {tol:.5f}")


def test_criterion_6_oracle_equivalence():
    rng = np.random.default_rng(606)
    worst_knap = 0.0
    worst_gap = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        c = rng.uniform(-0.5, 2, n)
        a = rng.uniform(0, 2, n)
        b = rng.uniform(0, 1.2) * max(a.sum(), 1e-9)
        k = solve_knapsack_m1(c, a, b)
        s = solve_simplex(c, a.reshape(-1, 1), np.array([b]))
        worst_knap = max(worst_knap, abs(k.value - s.value))
        dual = b * s.y[0] + np.maximum(c - a * s.y[0], 0.0).sum()
        worst_gap = max(worst_gap, abs(dual - s.value) / max(1.0, abs(s.value)))

    def enumerate_vertices(c, amat, b, u):
        n, m = amat.shape
        best = -np.inf
        for k in range(0, min(m, n) + 1):
            for rows_ in itertools.combinations(range(m), k):
                for free in itertools.combinations(range(n), k):
                    fixed = [j for j in range(n) if j not in free]
                    for pattern in itertools.product([0.0, 1.0], repeat=len(fixed)):
                        x = np.zeros(n)
                        for j, p in zip(fixed, pattern):
                            x[j] = p * u[j]
                        if k:
                            sub = amat.T[np.array(rows_)][:, np.array(free)]
                            rhs = b[np.array(rows_)] - amat.T[np.array(rows_)] @ x
                            try:
                                solv = np.linalg.solve(sub, rhs)
                            except np.linalg.LinAlgError:
                                continue
                            for j, v in zip(free, solv):
                                x[j] = v
                        if (np.all(x >= -1e-9) and np.all(x <= u + 1e-9)
                                and np.all(amat.T @ x <= b + 1e-9)):
                            best = max(best, float(c @ x))
        return best

    worst_enum = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        m = int(rng.integers(1, 3))
        c = rng.uniform(-1, 2, n)
        amat = rng.uniform(0, 2, (n, m))
        b = rng.uniform(0.1, 1.0, m) * n * 0.5
        s = solve_simplex(c, amat, b)
        ref = enumerate_vertices(c, amat, b, np.ones(n))
        worst_enum = max(worst_enum, abs(s.value - ref))
        dual = float(b @ s.y) + float(np.maximum(c - amat @ s.y, 0.0).sum())
        worst_gap = max(worst_gap, abs(dual - s.value) / max(1.0, abs(s.value)))
    ok = worst_knap <= 1e-9 and worst_enum <= 1e-8 and worst_gap <= 1e-8
    report(6, ok, f"simplex==knapsack within {worst_knap:.1e} (1000 runs), "
                  f"==vertex enumeration within {worst_enum:.1e} (200 runs), "
                  f"duality gap <= {worst_gap:.1e}")


def test_criterion_7_dual_oracle():
    rng = np.random.default_rng(707)
    n = 10 ** 5
    c = rng.uniform(0, 2, n)
    a = rng.uniform(0, 2, (n, 1))
    d = np.array([0.5])
    h = 1e-4
    worst_fd = 0.0
    for y in np.linspace(0.05, 1.5, 20):
        avg_g = float(np.mean(d[0] - a[:, 0] * (c >= a[:, 0] * y)))
        fd = (sample_dual_value(np.array([y + h]), c, a, d)
              - sample_dual_value(np.array([y - h]), c, a, d)) / (2 * h)
        worst_fd = max(worst_fd, abs(avg_g - fd))

    cs, As = FIXED_HALF.sample_arrivals(np.random.default_rng(708), 10 ** 6)
    worst_mc = 0.0
    for y in (0.1, 0.3, 0.5, 0.8):
        mc = sample_dual_value(np.array([y]), cs, As, np.array([0.5]))
        worst_mc = max(worst_mc, abs(mc - multisecretary_dual(y, 0.5)))
    ok = worst_fd <= 1e-3 and worst_mc <= 2e-3
    report(7, ok, f"avg subgradient vs finite difference {worst_fd:.2e} <= 1e-3 "
                  f"(20 grid points); closed form vs Monte Carlo {worst_mc:.2e} <= 2e-3")


def test_criterion_8_noise_ball():
    spec = MultiSecretary()
    mu = 0.5
    bound = 40.0 * 1 * (1.0 + 2.0 / 3.0) ** 2 / mu
    fitted = 0.0
    details = []
    for horizon in (10 ** 3, 10 ** 4, 10 ** 5):
        alpha_p = horizon ** (-2.0 / 3.0)
        sq = []
        for trial in range(60):
            config, c, a = generate_instance(spec, horizon, 8000 + trial)
            y_star = max(0.0, 1.0 - float(config.d[0]))
            res = run_benchmark_subgradient(config, Constant(alpha_p),
                                            y_init=np.array([y_star]),
                                            rewards=c, requests=a)
            sq.append((float(res.y_final[0]) - y_star) ** 2)
        const = float(np.mean(sq)) / (alpha_p * np.log(horizon))
        fitted = max(fitted, const)
        details.append(f"T=1e{int(np.log10(horizon))}: C={const:.3f}")
    ok = fitted <= bound
    report(8, ok, f"oracle-start mean dist^2 <= C*alpha*lnT with "
                  f"C={fitted:.3f} <= {bound:.1f} ({'; '.join(details)})")


def test_criterion_9_dual_convergence_trend():
    spec = MultiSecretary()
    stats = []
    for horizon in (100, 464, 2154, 10 ** 4):
        config, _, _ = generate_instance(spec, horizon, 909)
        st = empirical_dual_convergence(config, trials=150, gamma=2.0)
        stats.append(st.mean_dist_pow)
    monotone = all(b < a for a, b in zip(stats, stats[1:]))
    shrink = stats[0] / stats[-1]
    ok = monotone and shrink >= 3.0
    report(9, ok, f"hindsight-dual distance^2 decreases monotonically "
                  f"({', '.join(f'{s:.2e}' for s in stats)}), shrink {shrink:.1f}x >= 3")


def test_criterion_10_determinism(tmp_path):
    plan = ExperimentPlan(name="accept-det", dist="continuous-2",
                          algorithms=("benchmark", "two-phase"),
                          trials=100, seed=DEFAULT_SEED,
                          out_dir=str(tmp_path))
    run_plan(plan)
    trials_1 = (tmp_path / "accept-det_trials.csv").read_bytes()
    agg_1 = (tmp_path / "accept-det_aggregate.csv").read_bytes()
    run_plan(plan)
    same = ((tmp_path / "accept-det_trials.csv").read_bytes() == trials_1
            and (tmp_path / "accept-det_aggregate.csv").read_bytes() == agg_1)
    report(10, same, "benchmark-protocol plan run twice produces byte-identical CSVs")
