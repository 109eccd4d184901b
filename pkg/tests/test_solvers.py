import math

import numpy as np
import pytest

from pathval.errors import (
    InfeasibleAnchorError,
    OutOfRangeError,
    SingularCovarianceError,
)
from pathval.numerics import cholesky_psd
from pathval.solvers import (
    INFEASIBLE,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    SocProblem,
    line_search_fast,
    solve_lp,
    solve_single_soc,
)

from .oracles import enumerate_lp


def random_box_lp(seed: int) -> LpProblem:
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    m = int(rng.integers(1, 9))
    a = rng.standard_normal((m, d))
    b = rng.uniform(-0.5, 2.0, m)
    lo = rng.uniform(-2.0, -0.5, d)
    hi = rng.uniform(0.5, 2.0, d)
    c = rng.standard_normal(d)
    return LpProblem(c=c, a=a, b=b, lo=lo, hi=hi)


class TestSolveLp:
    def test_vertex_example(self):
        prob = LpProblem(
            c=[-1.0, -2.0],
            a=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
            b=[1.0, 1.0, 1.5],
            lo=[0.0, 0.0],
        )
        sol = solve_lp(prob)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([0.5, 1.0], abs=1e-9)
        assert sol.objective == pytest.approx(-2.5, abs=1e-9)

    def test_contradictory_constraints(self):
        prob = LpProblem(c=[1.0], a=[[1.0]], b=[-1.0], lo=[0.0])
        assert solve_lp(prob).status == INFEASIBLE

    def test_unbounded_with_ray(self):
        prob = LpProblem(c=[-1.0], a=np.zeros((0, 1)), b=[], lo=[0.0])
        sol = solve_lp(prob)
        assert sol.status == UNBOUNDED
        assert sol.ray is not None
        assert float(prob.c @ sol.ray) < 0.0

    def test_free_variable_unbounded(self):
        prob = LpProblem(c=[1.0, 0.0], a=[[0.0, 1.0]], b=[1.0])
        sol = solve_lp(prob)
        assert sol.status == UNBOUNDED
        # ray must not violate the constraint direction
        assert float((prob.a @ sol.ray)[0]) <= 1e-12

    def test_at_bound_flags(self):
        prob = LpProblem(c=[-1.0, 1.0], a=np.zeros((0, 2)), b=[], lo=[-1.0, -1.0], hi=[1.0, 1.0])
        sol = solve_lp(prob)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([1.0, -1.0])
        assert sol.at_bound.all()

    def test_degenerate_redundant_constraints(self):
        # several constraints active at the optimum; Bland's rule must terminate
        prob = LpProblem(
            c=[-1.0, -1.0],
            a=[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 1.0]],
            b=[1.0, 1.0, 1.0, 2.0, 2.0],
            lo=[0.0, 0.0],
        )
        sol = solve_lp(prob)
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(-2.0, abs=1e-9)

    def test_equality_like_split_bounds(self):
        # negative lower bounds exercise the shifting path
        prob = LpProblem(c=[1.0], a=[[-1.0]], b=[0.5], lo=[-3.0], hi=[4.0])
        sol = solve_lp(prob)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([-0.5], abs=1e-9)

    @pytest.mark.parametrize("seed", range(60))
    def test_matches_vertex_enumeration(self, seed):
        prob = random_box_lp(seed)
        status, objective = enumerate_lp(prob.c, prob.a, prob.b, prob.lo, prob.hi)
        sol = solve_lp(prob)
        assert sol.status == status
        if status == OPTIMAL:
            assert sol.objective == pytest.approx(objective, abs=1e-8)


def identity_factor(d: int):
    return cholesky_psd(np.eye(d))


class TestSolveSingleSoc:
    def test_ball_constraint(self):
        prob = SocProblem(
            c=[-1.0, 0.0], mu=[0.0, 0.0], kappa=1.0, factor=identity_factor(2), b=2.0
        )
        sol = solve_single_soc(prob)
        assert sol.status == OPTIMAL
        assert sol.x == pytest.approx([2.0, 0.0], abs=1e-9)
        assert sol.objective == pytest.approx(-2.0, abs=1e-10)

    def test_hand_kkt_single_root(self):
        prob = SocProblem(
            c=[-1.0, 0.0], mu=[1.0, 0.0], kappa=2.0, factor=identity_factor(2), b=1.0
        )
        sol = solve_single_soc(prob)
        assert sol.x == pytest.approx([1.0 / 3.0, 0.0], abs=1e-8)
        assert sol.objective == pytest.approx(-1.0 / 3.0, abs=1e-8)
        assert sol.dual == pytest.approx(1.0 / 3.0, abs=1e-8)

    def test_hand_kkt_two_roots_picks_positive_scale(self):
        # dual equation has roots 2/3 and 2; the scale test rejects 2
        prob = SocProblem(
            c=[-1.0, 0.0], mu=[1.0, 0.0], kappa=0.5, factor=identity_factor(2), b=1.0
        )
        sol = solve_single_soc(prob)
        assert sol.x == pytest.approx([2.0 / 3.0, 0.0], abs=1e-8)
        assert sol.objective == pytest.approx(-2.0 / 3.0, abs=1e-8)
        assert sol.dual == pytest.approx(2.0 / 3.0, abs=1e-8)

    def test_unbounded_certificate(self):
        prob = SocProblem(
            c=[-1.0, 0.0], mu=[-1.0, 0.0], kappa=0.5, factor=identity_factor(2), b=1.0
        )
        sol = solve_single_soc(prob)
        assert sol.status == UNBOUNDED
        ray = sol.ray
        assert float(prob.c @ ray) < 0.0
        spread = float(np.linalg.norm(prob.factor.lower.T @ ray))
        assert float(prob.mu @ ray) + prob.kappa * spread <= 1e-8 * (1 + np.linalg.norm(ray))

    def test_residuals_on_random_bounded_instances(self):
        rng = np.random.default_rng(77)
        checked = 0
        for _ in range(100):
            d = int(rng.integers(1, 7))
            a = rng.standard_normal((d, d))
            factor = cholesky_psd(a @ a.T + 0.2 * np.eye(d))
            mu = rng.standard_normal(d)
            c = rng.standard_normal(d)
            if not np.any(c):
                continue
            mu_norm = math.sqrt(float(mu @ factor.pinv_apply(mu)))
            kappa = mu_norm * rng.uniform(1.05, 2.0) + 0.1  # forces a bounded problem
            b = float(rng.uniform(0.2, 3.0))
            sol = solve_single_soc(SocProblem(c=c, mu=mu, kappa=kappa, factor=factor, b=b))
            assert sol.status == OPTIMAL
            assert sol.constraint_residual <= 1e-9 * (1.0 + abs(b))
            assert sol.stationarity_residual <= 1e-8 * np.linalg.norm(c)
            checked += 1
        assert checked >= 95

    def test_objective_monotone_in_kappa(self):
        rng = np.random.default_rng(5)
        factor = cholesky_psd(np.eye(3))
        mu = rng.standard_normal(3) * 0.3
        c = rng.standard_normal(3)
        objectives = []
        for kappa in np.linspace(1.0, 6.0, 12):
            sol = solve_single_soc(SocProblem(c=c, mu=mu, kappa=kappa, factor=factor, b=1.5))
            objectives.append(sol.objective)
        assert all(b >= a - 1e-8 for a, b in zip(objectives, objectives[1:]))

    def test_rank_deficient_in_range_uses_pseudo_inverse(self):
        # covariance diag(1, 0); both c and mu live in the nonzero eigenspace
        factor = cholesky_psd(np.diag([1.0, 0.0]))
        prob = SocProblem(c=[-1.0, 0.0], mu=[1.0, 0.0], kappa=2.0, factor=factor, b=1.0)
        sol = solve_single_soc(prob)
        assert sol.x == pytest.approx([1.0 / 3.0, 0.0], abs=1e-8)
        assert sol.cov_residual <= 1e-10

    def test_rank_deficient_along_objective_raises(self):
        factor = cholesky_psd(np.diag([1.0, 0.0]))
        prob = SocProblem(c=[0.0, -1.0], mu=[1.0, 0.0], kappa=2.0, factor=factor, b=1.0)
        with pytest.raises(SingularCovarianceError):
            solve_single_soc(prob)

    def test_rejects_nonpositive_b(self):
        with pytest.raises(OutOfRangeError):
            SocProblem(c=[1.0], mu=[0.0], kappa=1.0, factor=identity_factor(1), b=0.0)


class TestLineSearchFast:
    def test_ratio_test(self):
        constraints = np.array([[2.0, 0.0], [0.5, 0.0], [-3.0, 0.0]])
        s, x = line_search_fast(
            np.array([-1.0, 0.0]), np.zeros(2), np.array([1.0, 0.0]), constraints, 1.0
        )
        assert s == pytest.approx(0.5)
        assert x == pytest.approx([0.5, 0.0])

    def test_unconstrained_segment(self):
        constraints = np.array([[-1.0], [-2.0]])
        s, x = line_search_fast(np.array([-1.0]), np.zeros(1), np.array([1.0]), constraints, 1.0)
        assert s == 1.0
        assert x == pytest.approx([1.0])

    def test_no_improvement_direction(self):
        constraints = np.array([[1.0]])
        s, x = line_search_fast(np.array([1.0]), np.zeros(1), np.array([1.0]), constraints, 1.0)
        assert s == 0.0
        assert x == pytest.approx([0.0])

    def test_infeasible_anchor(self):
        constraints = np.array([[1.0]])
        with pytest.raises(InfeasibleAnchorError):
            line_search_fast(np.array([-1.0]), np.array([5.0]), np.array([6.0]), constraints, 1.0)

    def test_output_satisfies_all_constraints(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            d = int(rng.integers(1, 6))
            rows = rng.standard_normal((int(rng.integers(1, 30)), d))
            b = float(rng.uniform(0.5, 2.0))
            x_hat = rng.standard_normal(d)
            c = rng.standard_normal(d)
            s, x = line_search_fast(c, np.zeros(d), x_hat, rows, b)
            assert 0.0 <= s <= 1.0
            assert float((rows @ x - b).max(initial=-np.inf)) <= 1e-10 * (1 + abs(b))
