import numpy as np
import pytest
from scipy.optimize import minimize

from olplab.domain import Arrival
from olplab.distributions import MultiSecretary, ResourceLaw, generate_instance, substream
from olplab.dual_geometry import (
    ErrorBoundSpec, decide, dist_to_optimal, empirical_dual_convergence,
    multisecretary_dual, multisecretary_optimum, project_ball_orthant,
    project_nonneg, sample_dual_value, stochastic_subgradient,
)


def qp_projection(v, radius, center):
    """Brute-force oracle: constrained QP via SLSQP."""
    center = np.zeros_like(v) if center is None else center
    res = minimize(
        lambda z: 0.5 * np.sum((z - v) ** 2),
        np.maximum(v, 0.0),
        jac=lambda z: z - v,
        constraints=[
            {"type": "ineq", "fun": lambda z: z},
            {"type": "ineq",
             "fun": lambda z: radius ** 2 - np.sum((z - center) ** 2)},
        ],
        method="SLSQP", options={"maxiter": 400, "ftol": 1e-14})
    return res.x


class TestDecide:
    def test_accept(self):
        assert decide(np.array([0.5]), Arrival(0.7, [1.0])) == 1

    def test_reject(self):
        assert decide(np.array([0.5]), Arrival(0.3, [1.0])) == 0

    def test_tie_accepts(self):
        assert decide(np.array([0.5]), Arrival(0.5, [1.0])) == 1


class TestStochasticSubgradient:
    def test_accept_branch(self):
        g = stochastic_subgradient(np.array([0.5]), Arrival(0.7, [1.0]), np.array([0.5]))
        np.testing.assert_allclose(g, [-0.5])

    def test_reject_branch(self):
        g = stochastic_subgradient(np.array([0.5]), Arrival(0.3, [1.0]), np.array([0.5]))
        np.testing.assert_allclose(g, [0.5])

    def test_huge_price_never_accepts(self):
        g = stochastic_subgradient(np.array([100.0]), Arrival(1.0, [1.0]), np.array([0.5]))
        np.testing.assert_allclose(g, [0.5])

    def test_norm_bound(self):
        spec = MultiSecretary()
        bs = spec.bounds()
        rng = substream(3, 0)
        c, a = spec.sample_arrivals(rng, 2000)
        d = np.array([2 / 3])
        for t in range(0, 2000, 97):
            g = stochastic_subgradient(np.array([0.3]), Arrival(c[t], a[t]), d)
            assert np.linalg.norm(g) <= bs.subgradient_bound + 1e-12

    def test_average_matches_expected_gradient(self):
        # At the quadratic family's prices, E[g] = y - 1/2 when d = 1/2.
        spec = MultiSecretary(d_law=ResourceLaw("fixed", value=0.5))
        rng = substream(5, 0)
        c, a = spec.sample_arrivals(rng, 10 ** 6)
        d = np.array([0.5])
        for y in (0.2, 0.5, 0.8):
            g = d[0] - a[:, 0] * (c >= y * a[:, 0])
            assert abs(g.mean() - (y - 0.5)) < 2e-3

    def test_average_matches_finite_difference_of_sample_dual(self):
        rng = np.random.default_rng(17)
        n = 10 ** 5
        c = rng.uniform(0, 2, n)
        a = rng.uniform(0, 2, (n, 1))
        d = np.array([0.5])
        h = 1e-4
        for y in np.linspace(0.05, 1.5, 20):
            avg_g = np.mean(d[0] - a[:, 0] * (c >= a[:, 0] * y))
            fd = (sample_dual_value(np.array([y + h]), c, a, d)
                  - sample_dual_value(np.array([y - h]), c, a, d)) / (2 * h)
            assert abs(avg_g - fd) < 1e-3


class TestProjections:
    def test_project_nonneg(self):
        np.testing.assert_allclose(project_nonneg(np.array([-1.0, 2.0])), [0, 2])
        np.testing.assert_allclose(project_nonneg(np.array([0.0, 0.0])), [0, 0])
        np.testing.assert_allclose(project_nonneg(np.array([-3.0])), [0])

    def test_ball_inside(self):
        np.testing.assert_allclose(
            project_ball_orthant(np.array([3.0, 4.0]), 10.0), [3, 4])

    def test_ball_radial(self):
        np.testing.assert_allclose(
            project_ball_orthant(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])

    def test_clip_then_scale_against_qp(self):
        got = project_ball_orthant(np.array([-1.0, 2.0]), 1.0)
        np.testing.assert_allclose(got, [0.0, 1.0], atol=1e-12)
        ref = qp_projection(np.array([-1.0, 2.0]), 1.0, None)
        np.testing.assert_allclose(got, ref, atol=1e-6)

    def test_general_center_against_qp(self):
        rng = np.random.default_rng(8)
        for _ in range(40):
            m = int(rng.integers(1, 4))
            v = rng.uniform(-2, 2, m)
            center = rng.uniform(0, 1.5, m)
            radius = rng.uniform(0.2, 1.5)
            got = project_ball_orthant(v, radius, center=center)
            ref = qp_projection(v, radius, center)
            np.testing.assert_allclose(got, ref, atol=5e-6)
            assert np.all(got >= -1e-12)
            assert np.linalg.norm(got - center) <= radius + 1e-9

    def test_idempotent_and_nonexpansive(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            m = int(rng.integers(1, 5))
            u_, v_ = rng.uniform(-2, 3, m), rng.uniform(-2, 3, m)
            radius = rng.uniform(0.5, 2.0)
            center = rng.uniform(0, 1.0, m) if rng.random() < 0.5 else None
            pu = project_ball_orthant(u_, radius, center)
            pv = project_ball_orthant(v_, radius, center)
            again = project_ball_orthant(pu, radius, center)
            np.testing.assert_allclose(again, pu, atol=1e-9)
            assert np.linalg.norm(pu - pv) <= np.linalg.norm(u_ - v_) + 1e-9
            qn = project_nonneg(project_nonneg(u_))
            np.testing.assert_allclose(qn, project_nonneg(u_))

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            project_ball_orthant(np.array([1.0]), 0.0)


class TestSampleDualValue:
    def test_origin_value(self):
        c = np.array([0.5, -0.25, 1.0])
        a = np.ones((3, 1))
        got = sample_dual_value(np.zeros(1), c, a, np.array([0.5]))
        assert got == pytest.approx(np.maximum(c, 0).mean())

    def test_single_arrival(self):
        got = sample_dual_value(np.array([0.25]), np.array([1.0]),
                                np.array([[1.0]]), np.array([0.5]))
        assert got == pytest.approx(0.125 + 0.75)

    def test_monte_carlo_matches_closed_form(self):
        spec = MultiSecretary(d_law=ResourceLaw("fixed", value=0.5))
        c, a = spec.sample_arrivals(substream(10, 0), 10 ** 6)
        y = 0.3
        mc = sample_dual_value(np.array([y]), c, a, np.array([0.5]))
        assert abs(mc - multisecretary_dual(y, 0.5)) < 2e-3

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sample_dual_value(np.zeros(1), np.array([]), np.zeros((0, 1)),
                              np.array([0.5]))


class TestMultisecretaryClosedForm:
    def test_values(self):
        assert multisecretary_dual(0.0, 0.5) == pytest.approx(0.5)
        assert multisecretary_dual(0.5, 0.5) == pytest.approx(0.375)
        assert multisecretary_dual(1.5, 0.5) == pytest.approx(0.75)

    def test_minimizer(self):
        y_star, f_star = multisecretary_optimum(0.5)
        assert y_star == pytest.approx(0.5)
        assert f_star == pytest.approx(0.375)
        grid = np.linspace(0, 1, 101)
        vals = [multisecretary_dual(y, 0.5) for y in grid]
        assert min(vals) >= f_star - 1e-12

    def test_quadratic_growth_modulus(self):
        # Growth with exponent 2 and modulus 1/2 holds on the whole grid.
        y_star, f_star = multisecretary_optimum(0.5)
        for y in np.linspace(0, 1, 41):
            gap = multisecretary_dual(y, 0.5) - f_star
            assert gap >= 0.5 * (y - y_star) ** 2 - 1e-12

    def test_optimum_inside_radius_envelope(self):
        # Optimal prices stay within c_max/d_min for every resource rate.
        for d in np.linspace(1 / 3, 2 / 3, 7):
            y_star, _ = multisecretary_optimum(d)
            assert y_star <= 1.0 / (1 / 3) + 1e-12


class TestDistToOptimal:
    def test_zero_at_optimum(self):
        eb = ErrorBoundSpec(2.0, 0.5, y_star=np.array([0.5]))
        assert dist_to_optimal(np.array([0.5]), eb) == 0.0

    def test_scalar_distance(self):
        eb = ErrorBoundSpec(2.0, 0.5, y_star=np.array([0.5]))
        assert dist_to_optimal(np.array([0.7]), eb) == pytest.approx(0.2)

    def test_requires_known_optimum(self):
        with pytest.raises(ValueError):
            dist_to_optimal(np.array([0.5]), ErrorBoundSpec(2.0, 0.5))


class TestEmpiricalDualConvergence:
    def test_nonnegative_and_decreasing(self):
        spec = MultiSecretary()
        stats = []
        for horizon in (100, 2154):
            cfg, _, _ = generate_instance(spec, horizon, 4242)
            st = empirical_dual_convergence(cfg, trials=60, gamma=2.0)
            assert st.mean_dist_pow >= 0.0
            stats.append(st.mean_dist_pow)
        assert stats[1] < stats[0]

    def test_degenerate_single_atom_exact(self):
        from olplab.distributions import Finite, FiniteSupport
        sup = FiniteSupport(np.array([1.0]), np.array([[1.0]]), np.array([1.0]))
        spec = Finite(sup, ResourceLaw("fixed", value=0.5), label="one-atom")
        # accepting half of every arrival is optimal; hindsight dual is the
        # atom's reward ratio for every horizon, and so is the expected dual
        cfg, _, _ = generate_instance(spec, 50, 7)
        st = empirical_dual_convergence(cfg, trials=10, gamma=1.0)
        assert st.mean_dist_pow == pytest.approx(0.0, abs=1e-9)
