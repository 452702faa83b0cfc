import dataclasses

import numpy as np
import pytest

from recursive_egm.egm import egm_step, howard_steps, log_expectations, solve_egm
from recursive_egm.evaluation import (
    ERROR_FLOOR,
    agent_uniforms,
    ergodic_errors,
    euler_error_at,
    euler_errors,
    grid_errors,
    implied_consumption,
    simulate,
    simulate_states,
    welfare_cost,
)
from recursive_egm.exceptions import ConstrainedPointError
from recursive_egm.model import IncomeProcess, Model, ModelParams, Solution, build_grids


@pytest.fixture(scope="module")
def egm_panel(egm_sol, paper_model):
    return simulate(egm_sol, paper_model, seed=7)


def policy_stub(factor):
    """Pretend the Euler equation implies ``factor`` times the policy."""
    def implied(m, states, solution, model):
        return factor * np.array([solution.policy(x, k) for x, k in zip(m, states)])
    return implied


class TestEulerError:
    def test_exact_at_endogenous_points(self, egm_tight, paper_model):
        # the implied consumption at a_j from the solution's own (c, V) is the
        # endogenous point, up to rounding
        _, ws = egm_step(egm_tight, paper_model, return_workspace=True)
        p, th = paper_model.params, paper_model.prefs.theta
        a = paper_model.a_grid[1:, None]
        log_mu, log_xi = log_expectations(egm_tight.m_grid, np.asarray(egm_tight.c),
                                          np.asarray(egm_tight.v), paper_model, a,
                                          paper_model.income.trans)
        c_tilde = np.exp(-(np.log(p.beta * p.R) + (1 - th) * log_mu + log_xi) / p.rho)
        err = np.log10(np.maximum(np.abs(1 - c_tilde / ws.endo_c[1:]), 1e-16))
        assert err.max() <= -10

    def test_thousandth_gap(self, egm_sol, paper_model):
        e = euler_errors([5.0, 8.0], [2, 6], egm_sol, paper_model, implied=policy_stub(1.001))
        np.testing.assert_allclose(e, -3.0, atol=1e-6)

    def test_perfect_stub_hits_floor(self, egm_sol, paper_model):
        rep = grid_errors(egm_sol, paper_model, implied=policy_stub(1.0))
        assert rep.mean_l1 == rep.max_linf == ERROR_FLOOR

    def test_constrained_point(self, egm_sol, paper_model):
        with pytest.raises(ConstrainedPointError):
            euler_error_at(paper_model.m_grid[3], 0, egm_sol, paper_model)
        assert np.isnan(euler_errors(paper_model.m_grid[3], 0, egm_sol, paper_model)[0])

    def test_scalar_matches_vector(self, egm_sol, paper_model):
        v = euler_errors([4.0, 7.5], [1, 8], egm_sol, paper_model)
        assert euler_error_at(4.0, 1, egm_sol, paper_model) == v[0]
        assert euler_error_at(7.5, 8, egm_sol, paper_model) == v[1]

    def test_implied_is_solver_independent(self, egm_sol, paper_model):
        # the metric depends only on the solution arrays, not on how they were made
        clone = Solution(egm_sol.m_grid, egm_sol.c, egm_sol.v, method="vfi", mode="fast")
        m, k = np.array([2.0, 6.0]), np.array([0, 9])
        np.testing.assert_array_equal(implied_consumption(m, k, egm_sol, paper_model),
                                      implied_consumption(m, k, clone, paper_model))


class TestReports:
    def test_grid_report(self, egm_sol, paper_model):
        rep = grid_errors(egm_sol, paper_model)
        assert rep.max_linf >= rep.mean_l1 and rep.n_points > 0
        assert rep.weighting == "grid" and rep.percentile_window == (10.0, 90.0)
        assert rep.mean_l1 <= -4.0 and rep.max_linf <= -2.8
        assert rep.n_points <= 80 * 10

    def test_ti_fast_grid_error(self, ti_fast_sol, paper_model):
        assert -3.8 <= grid_errors(ti_fast_sol, paper_model).mean_l1 <= -2.6

    def test_ergodic_report(self, egm_sol, paper_model, egm_panel):
        rep = ergodic_errors(egm_sol, paper_model, egm_panel)
        assert rep.max_linf >= rep.mean_l1
        assert rep.mean_l1 <= -4.0 and rep.max_linf <= -2.8
        lo, hi = rep.m_window
        assert 0.3 <= lo <= 1.2 and 6.0 <= hi <= 13.0
        assert rep.n_points <= 50_000

    def test_ti_fast_ergodic_beats_grid(self, ti_fast_sol, paper_model):
        panel = simulate(ti_fast_sol, paper_model, n_agents=2000, seed=1)
        erg = ergodic_errors(ti_fast_sol, paper_model, panel).mean_l1
        assert erg < grid_errors(ti_fast_sol, paper_model).mean_l1

    def test_grid_vs_ergodic_stability(self, egm_sol, paper_model, egm_panel):
        g = grid_errors(egm_sol, paper_model).mean_l1
        e = ergodic_errors(egm_sol, paper_model, egm_panel).mean_l1
        assert abs(g - e) <= 0.3

    def test_report_serialises(self, egm_sol, paper_model):
        d = grid_errors(egm_sol, paper_model).to_dict()
        assert set(d) >= {"mean_l1", "max_linf", "n_points", "weighting"}


def degenerate_model(R=1.0):
    inc = IncomeProcess(z_grid=[0.0, 1.0], trans=[[0.5, 0.5], [0.5, 0.5]], y=[1.0, 1.0],
                        stat_dist=[0.5, 0.5])
    return Model(ModelParams(R=R), inc, build_grids(20, 20, y_min=1.0))


class TestSimulation:
    def test_hand_to_mouth_dynamics(self):
        model = degenerate_model()
        m = model.m_grid[:, None] * np.ones(2)
        sol = Solution(model.m_grid, m, m)
        panel = simulate(sol, model, n_agents=50, n_periods=20, burn_in=0, seed=3, m0=4.0)
        assert np.all(panel.wealth[:, 0] == 4.0)
        np.testing.assert_allclose(panel.wealth[:, 1:], 1.0, rtol=0, atol=1e-15)

    def test_seed_determinism(self, egm_sol, paper_model):
        a = simulate(egm_sol, paper_model, n_agents=300, n_periods=60, burn_in=10, seed=11)
        b = simulate(egm_sol, paper_model, n_agents=300, n_periods=60, burn_in=10, seed=11)
        c = simulate(egm_sol, paper_model, n_agents=300, n_periods=60, burn_in=10, seed=12)
        np.testing.assert_array_equal(a.wealth, b.wealth)
        np.testing.assert_array_equal(a.state, b.state)
        assert not np.array_equal(a.state, c.state)
        ra = ergodic_errors(egm_sol, paper_model, a)
        assert ra == ergodic_errors(egm_sol, paper_model, b)

    def test_sharding_invariance(self):
        full = agent_uniforms(5, 40, 30)
        # agents 20..39 drawn on their own must match the pooled draw
        for i in (0, 25, 39):
            ss = np.random.SeedSequence(5, spawn_key=(i,))
            np.testing.assert_array_equal(
                full[i], np.random.Generator(np.random.PCG64(ss)).random(30))

    def test_state_frequencies(self, paper_model):
        u = agent_uniforms(2024, 10_000, 300)
        states = simulate_states(paper_model.income, u)
        freq = np.bincount(states.ravel(), minlength=10) / states.size
        tv = 0.5 * np.abs(freq - paper_model.income.stat_dist).sum()
        assert tv < 1e-2

    def test_panel_valid(self, egm_panel):
        assert np.all(egm_panel.wealth > 0)
        assert egm_panel.state.min() >= 0 and egm_panel.state.max() <= 9
        assert egm_panel.wealth.shape == (10_000, 500)

    def test_median_wealth(self, egm_panel):
        assert 2.0 <= np.median(egm_panel.wealth[:, -1]) <= 4.0


class TestWelfare:
    def test_identical_policies(self, egm_sol, paper_model):
        assert welfare_cost(egm_sol, egm_sol, paper_model, n_agents=500) == 0.0

    def test_degraded_policy_is_costly(self, egm_sol, paper_model):
        c = 0.9 * np.asarray(egm_sol.c)
        # value of following the degraded policy forever
        v = howard_steps(c, np.asarray(egm_sol.v), egm_sol.m_grid, paper_model, 2000)
        bad = dataclasses.replace(egm_sol, c=c, v=v)
        assert welfare_cost(bad, egm_sol, paper_model, n_agents=2000) > 0

    def test_homogeneity(self, egm_sol, paper_model):
        coarse = solve_egm(paper_model.with_grid_size(40))
        fine = egm_sol
        base = welfare_cost(coarse, fine, paper_model, n_agents=2000)
        k = 3.7
        up = welfare_cost(dataclasses.replace(coarse, v=k * np.asarray(coarse.v)),
                          dataclasses.replace(fine, v=k * np.asarray(fine.v)),
                          paper_model, n_agents=2000)
        assert abs(up - base) <= 1e-12

    @pytest.mark.slow
    def test_egm_welfare_bound(self, egm_sol, paper_model):
        ref = solve_egm(paper_model.with_grid_size(1000))
        assert abs(welfare_cost(egm_sol, ref, paper_model)) < 1e-3
