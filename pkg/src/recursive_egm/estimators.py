"""scikit-learn style front end to the solvers.

``fit`` builds the model from the constructor parameters and solves it;
``predict`` evaluates the consumption policy at rows ``[m, state]``::

    >>> est = EZEGMSolver(n_grid=50).fit()
    >>> est.predict([[1.0, 0], [2.0, 9]])          # doctest: +SKIP

``score`` is the negated mean Euler error (log10 units) at the query rows,
so larger is better, as scikit-learn expects.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_choice, check_points, check_positive_int
from .baselines import MODES, solve_ti, solve_vfi
from .egm import BACKENDS, solve_egm
from .evaluation import euler_errors
from .model import DEFAULT_CURVATURE, make_model


class _SolverBase(BaseEstimator):
    def __init__(self, beta=0.96, R=1.02, gamma=10.0, rho=2.0 / 3.0, persistence=0.95,
                 innovation_sd=0.10, n_states=10, width=3.0, n_grid=100,
                 m_max_multiple=20.0, curvature=DEFAULT_CURVATURE, conv_tol=1e-6,
                 max_iters=2000, howard_k=1, backend="numba"):
        self.beta = beta
        self.R = R
        self.gamma = gamma
        self.rho = rho
        self.persistence = persistence
        self.innovation_sd = innovation_sd
        self.n_states = n_states
        self.width = width
        self.n_grid = n_grid
        self.m_max_multiple = m_max_multiple
        self.curvature = curvature
        self.conv_tol = conv_tol
        self.max_iters = max_iters
        self.howard_k = howard_k
        self.backend = backend

    def _build_model(self):
        check_positive_int("n_grid", self.n_grid, 10)
        check_positive_int("howard_k", self.howard_k)
        check_choice("backend", self.backend, BACKENDS)
        return make_model(beta=self.beta, R=self.R, gamma=self.gamma, rho=self.rho,
                          persistence=self.persistence, innovation_sd=self.innovation_sd,
                          n_states=self.n_states, width=self.width, n_m=self.n_grid,
                          m_max_multiple=self.m_max_multiple, curvature=self.curvature,
                          conv_tol=self.conv_tol, max_iters=self.max_iters)

    def _solve(self, model):
        raise NotImplementedError

    def fit(self, X=None, y=None):
        """Solve the model. ``X`` and ``y`` are ignored."""
        self.model_ = self._build_model()
        self.solution_ = self._solve(self.model_)
        self.n_iter_ = self.solution_.iters
        self.converged_ = self.solution_.converged
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        """Consumption at each row ``[m, state]`` of ``X``."""
        check_is_fitted(self, "solution_")
        m, state = check_points(X, self.model_.income.n_states)
        return self.solution_.policy(m, state)

    def predict_value(self, X):
        check_is_fitted(self, "solution_")
        m, state = check_points(X, self.model_.income.n_states)
        return self.solution_.value(m, state)

    def euler_errors(self, X):
        """log10 Euler errors at ``X``; NaN where the borrowing constraint binds."""
        check_is_fitted(self, "solution_")
        m, state = check_points(X, self.model_.income.n_states)
        return euler_errors(m, state, self.solution_, self.model_)

    def score(self, X, y=None):
        errs = self.euler_errors(X)
        if not np.any(np.isfinite(errs)):
            raise ValueError("every query point is borrowing-constrained")
        return -float(np.nanmean(errs))


class EZEGMSolver(_SolverBase):
    """Endogenous grid method for Epstein-Zin preferences."""

    def _solve(self, model):
        return solve_egm(model, howard_k=self.howard_k, backend=self.backend)


class TimeIterationSolver(_SolverBase):
    """Euler-equation time iteration with bisection."""

    def __init__(self, mode="fast", beta=0.96, R=1.02, gamma=10.0, rho=2.0 / 3.0,
                 persistence=0.95, innovation_sd=0.10, n_states=10, width=3.0,
                 n_grid=100, m_max_multiple=20.0, curvature=DEFAULT_CURVATURE,
                 conv_tol=1e-6, max_iters=2000, howard_k=1, backend="numba"):
        super().__init__(beta=beta, R=R, gamma=gamma, rho=rho, persistence=persistence,
                         innovation_sd=innovation_sd, n_states=n_states, width=width,
                         n_grid=n_grid, m_max_multiple=m_max_multiple,
                         curvature=curvature, conv_tol=conv_tol, max_iters=max_iters,
                         howard_k=howard_k, backend=backend)
        self.mode = mode

    def _solve(self, model):
        check_choice("mode", self.mode, MODES)
        return solve_ti(model, self.mode, howard_k=self.howard_k, backend=self.backend)


class ValueIterationSolver(_SolverBase):
    """Value function iteration with golden-section search."""

    def __init__(self, mode="fast", beta=0.96, R=1.02, gamma=10.0, rho=2.0 / 3.0,
                 persistence=0.95, innovation_sd=0.10, n_states=10, width=3.0,
                 n_grid=100, m_max_multiple=20.0, curvature=DEFAULT_CURVATURE,
                 conv_tol=1e-6, max_iters=2000, howard_k=1, backend="numba"):
        super().__init__(beta=beta, R=R, gamma=gamma, rho=rho, persistence=persistence,
                         innovation_sd=innovation_sd, n_states=n_states, width=width,
                         n_grid=n_grid, m_max_multiple=m_max_multiple,
                         curvature=curvature, conv_tol=conv_tol, max_iters=max_iters,
                         howard_k=howard_k, backend=backend)
        self.mode = mode

    def _solve(self, model):
        check_choice("mode", self.mode, MODES)
        return solve_vfi(model, self.mode, howard_k=self.howard_k, backend=self.backend)
