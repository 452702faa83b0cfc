import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from recursive_egm.exceptions import DomainError, ExistenceWarning
from recursive_egm.model import (
    DEFAULT_CURVATURE,
    M_MIN,
    IncomeProcess,
    ModelParams,
    Solution,
    build_grids,
    derive_prefs,
    exp_grid,
    initial_solution,
    make_model,
    tauchen,
    v_to_w,
    w_to_v,
)


class TestDerivePrefs:
    def test_paper_theta(self):
        assert derive_prefs(ModelParams(gamma=10, rho=2 / 3)).theta == pytest.approx(-27, abs=1e-12)

    def test_crra_collapse(self):
        assert derive_prefs(ModelParams(gamma=2, rho=2)).theta == 1.0

    def test_positive_theta(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExistenceWarning)
            p = ModelParams(gamma=5, rho=2)
        assert derive_prefs(p).theta == 4.0
        assert derive_prefs(p).one_minus_rho == -1.0

    @pytest.mark.parametrize("kw", [dict(rho=1.0), dict(gamma=1.0)])
    def test_log_limits_rejected(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)


class TestModelParams:
    @pytest.mark.parametrize("kw", [dict(beta=0), dict(beta=1), dict(R=0), dict(gamma=-1),
                                    dict(rho=0), dict(conv_tol=0), dict(max_iters=0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            ModelParams(**kw)

    def test_existence_condition_flags(self):
        assert ModelParams().satisfies_existence
        with pytest.warns(ExistenceWarning):
            p = ModelParams(gamma=10, rho=2)
        assert not p.satisfies_existence

    def test_negative_theta_form(self):
        # beta < R**|theta| is the same inequality when theta < 0
        p = ModelParams()
        assert (p.beta < p.R ** abs(p.theta)) == p.satisfies_existence


class TestValueTransform:
    def test_examples(self):
        assert v_to_w(1.0, 0.3) == 1.0
        assert v_to_w(4.0, 0.5) == pytest.approx(2.0)
        assert v_to_w(2.0, 3.0) == pytest.approx(0.25)
        assert w_to_v(1.0, 0.3) == 1.0
        assert w_to_v(2.0, 0.5) == pytest.approx(4.0)
        assert w_to_v(0.25, 3.0) == pytest.approx(2.0)

    @pytest.mark.parametrize("fn", [v_to_w, w_to_v])
    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_domain(self, fn, bad):
        with pytest.raises(DomainError):
            fn(bad, 0.5)

    @given(x=st.floats(1e-6, 1e6), rho=st.floats(0.05, 5.0).filter(lambda r: abs(r - 1) > 1e-3))
    def test_mutual_inverse(self, x, rho):
        assert w_to_v(v_to_w(x, rho), rho) == pytest.approx(x, rel=1e-12)
        assert v_to_w(w_to_v(x, rho), rho) == pytest.approx(x, rel=1e-12)

    def test_vectorised(self):
        v = np.array([1.0, 4.0, 9.0])
        np.testing.assert_allclose(v_to_w(v, 0.5), [1, 2, 3])


class TestTauchen:
    def test_iid_rows_identical(self):
        inc = tauchen(persistence=0.0, innovation_sd=0.2, n_states=5)
        assert np.allclose(inc.trans, inc.trans[0], atol=0, rtol=0) or \
            np.max(np.abs(inc.trans - inc.trans[0])) < 1e-15

    def test_row_sums(self):
        inc = tauchen(0.95, 0.10, 10)
        assert np.max(np.abs(inc.trans.sum(axis=1) - 1)) < 1e-12
        assert np.all(inc.trans >= 0)

    def test_symmetric_stationary(self):
        inc = tauchen(0.95, 0.10, 10, 3.0)
        assert np.max(np.abs(inc.stat_dist - inc.stat_dist[::-1])) < 1e-8

    def test_stationarity_and_normalisation(self):
        inc = tauchen(0.95, 0.10, 10)
        assert np.max(np.abs(inc.stat_dist @ inc.trans - inc.stat_dist)) < 1e-10
        assert abs(inc.stat_dist @ inc.y - 1) < 1e-10
        assert np.all(inc.y > 0)

    def test_grid_span(self):
        inc = tauchen(0.9, 0.2, 7, width=2.5)
        sd = 0.2 / math.sqrt(1 - 0.81)
        assert inc.z_grid[-1] == pytest.approx(2.5 * sd)
        assert inc.z_grid[0] == pytest.approx(-2.5 * sd)

    @pytest.mark.parametrize("kw", [dict(persistence=1.0), dict(innovation_sd=0),
                                    dict(n_states=1), dict(width=0)])
    def test_preconditions(self, kw):
        with pytest.raises(ValueError):
            tauchen(**kw)

    @settings(max_examples=40, deadline=None)
    @given(pers=st.floats(-0.99, 0.99), sd=st.floats(0.01, 0.5), n=st.integers(2, 25),
           width=st.floats(0.5, 5))
    def test_properties_any_parameters(self, pers, sd, n, width):
        inc = tauchen(pers, sd, n, width)
        assert np.max(np.abs(inc.trans.sum(axis=1) - 1)) < 1e-12
        assert abs(inc.mean_income - 1) < 1e-10

    def test_immutable(self):
        inc = tauchen()
        with pytest.raises(ValueError):
            inc.trans[0, 0] = 1.0

    def test_rejects_non_stochastic(self):
        with pytest.raises(ValueError):
            IncomeProcess(z_grid=[0, 1], trans=[[0.5, 0.6], [0.5, 0.5]], y=[1, 1],
                          stat_dist=[0.5, 0.5])


class TestGrids:
    def test_paper_bounds(self):
        inc = tauchen()
        g = build_grids(100, 100, 20, y_min=inc.y.min(), mean_income=1.0)
        assert g.a_grid[0] == 0.0
        assert g.a_grid[-1] == pytest.approx(20 - inc.y.min())
        assert g.m_grid[0] == M_MIN and g.m_grid[-1] == 20.0
        assert np.all(np.diff(g.m_grid) > 0) and np.all(np.diff(g.a_grid) > 0)

    def test_three_point_example(self):
        np.testing.assert_allclose(exp_grid(0.0, 1.0, 3, math.log(4)), [0, 1 / 3, 1])

    def test_zero_curvature_uniform(self):
        np.testing.assert_allclose(exp_grid(0, 1, 5, 0.0), np.linspace(0, 1, 5))
        np.testing.assert_allclose(exp_grid(0, 1, 5, 1e-9), np.linspace(0, 1, 5), atol=1e-9)

    def test_interval_ratio(self):
        g = exp_grid(0, 1, 2001, DEFAULT_CURVATURE)
        d = np.diff(g)
        assert d[-1] / d[0] == pytest.approx(50, rel=1e-2)

    def test_minimum_size(self):
        with pytest.raises(ValueError):
            build_grids(n_m=5)


class TestSolution:
    def test_initial_guess(self):
        s = initial_solution(np.array([1.0, 2.0]), 3, scale=0.5)
        np.testing.assert_array_equal(s.c, [[0.5] * 3, [1.0] * 3])
        np.testing.assert_array_equal(s.v, s.c)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            Solution(m_grid=[1, 2, 3], c=np.ones((2, 2)), v=np.ones((2, 2)))

    def test_policy_interpolates(self):
        s = Solution(m_grid=[1.0, 2.0], c=[[0.5, 1.0], [1.0, 2.0]], v=[[1, 1], [2, 2]])
        assert s.policy(1.5, 0) == pytest.approx(0.75)
        assert s.policy(1.5, 1) == pytest.approx(1.5)

    def test_make_model_grid_sizes(self):
        m = make_model(n_m=40, n_a=60)
        assert m.m_grid.size == 40 and m.a_grid.size == 60
        assert m.with_grid_size(25).m_grid.size == 25
