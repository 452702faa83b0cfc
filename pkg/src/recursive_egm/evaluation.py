"""Accuracy and welfare diagnostics for a converged solution.

The normalised Euler error at ``(m, z)`` is ``log10|1 - c_tilde / c|``, where
``c_tilde`` is the consumption the Euler equation implies given the solution
itself: ``mu`` and ``Xi`` are recomputed exactly at ``a = m - c`` by
interpolating the solution's own ``c`` and ``V`` at next-period cash-on-hand.
Because the recomputation never uses a solver's fast-mode shortcuts the
metric is the same for every method.
"""

from dataclasses import dataclass, asdict

import numpy as np

from .egm import log_expectations
from .exceptions import ConstrainedPointError
from .kernels import interp_gather

CONSTRAINT_SLACK = 1e-8
ERROR_FLOOR = -16.0


@dataclass(frozen=True)
class EulerErrorReport:
    mean_l1: float
    max_linf: float
    n_points: int
    weighting: str
    percentile_window: tuple
    m_window: tuple

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SimPanel:
    """Simulated cash-on-hand and income-state paths, indexed ``[agent, t]``."""

    wealth: np.ndarray
    state: np.ndarray
    seed: int
    burn_in: int = 0

    @property
    def post_burn_in(self):
        return self.wealth[:, self.burn_in:], self.state[:, self.burn_in:]


def implied_consumption(m, state, solution, model):
    """Consumption implied by the Euler equation given the solution's (c, V)."""
    m = np.asarray(m, dtype=float)
    state = np.asarray(state, dtype=int)
    p = model.params
    c = interp_gather(solution.m_grid, solution.c, m, state)
    a = np.maximum(m - c, 0.0)
    log_mu, log_xi = log_expectations(solution.m_grid, np.asarray(solution.c),
                                      np.asarray(solution.v), model, a,
                                      model.income.trans[state])
    log_rhs = np.log(p.beta * p.R) + (1.0 - model.prefs.theta) * log_mu + log_xi
    return np.exp(-log_rhs / p.rho)


def euler_errors(m, state, solution, model, implied=implied_consumption):
    """Vectorised Euler errors; NaN where the borrowing constraint binds."""
    m, state = np.broadcast_arrays(np.asarray(m, float), np.asarray(state, int))
    m, state = m.ravel(), state.ravel()
    c = interp_gather(solution.m_grid, solution.c, m, state)
    free = m - c > CONSTRAINT_SLACK
    out = np.full(m.shape, np.nan)
    if np.any(free):
        c_tilde = implied(m[free], state[free], solution, model)
        gap = np.abs(1.0 - c_tilde / c[free])
        out[free] = np.log10(np.maximum(gap, 10.0**ERROR_FLOOR))
    return out


def euler_error_at(m, state, solution, model):
    """Euler error at a single unconstrained point."""
    c = float(interp_gather(solution.m_grid, solution.c, np.asarray(m, float),
                            np.asarray(state, int)))
    if m - c <= CONSTRAINT_SLACK:
        raise ConstrainedPointError(
            f"borrowing constraint binds at m={m:.6g}, state={state}")
    return float(euler_errors(m, state, solution, model)[0])


def _report(errors, weighting, pct, m_window):
    valid = errors[np.isfinite(errors)]
    if valid.size == 0:
        raise ValueError("no unconstrained points to evaluate")
    return EulerErrorReport(
        mean_l1=float(valid.mean()),
        max_linf=float(valid.max()),
        n_points=int(valid.size),
        weighting=weighting,
        percentile_window=tuple(float(x) for x in pct),
        m_window=tuple(float(x) for x in m_window),
    )


def grid_errors(solution, model, pct_lo=10, pct_hi=90, implied=implied_consumption):
    """Mean and max Euler error over grid points inside a percentile window.

    The window is taken over the sorted grid, so ``pct_lo=10, pct_hi=90``
    keeps the middle 80% of grid points in every income state.
    """
    m_grid = solution.m_grid
    lo, hi = np.percentile(m_grid, [pct_lo, pct_hi])
    inside = m_grid[(m_grid >= lo) & (m_grid <= hi)]
    n_z = solution.n_states
    m = np.repeat(inside, n_z)
    state = np.tile(np.arange(n_z), inside.size)
    errs = euler_errors(m, state, solution, model, implied)
    return _report(errs, "grid", (pct_lo, pct_hi), (lo, hi))


def agent_uniforms(seed, n_agents, n_draws):
    """Uniform draws, one independent stream per agent.

    Agent ``i`` always gets the stream spawned from ``(seed, i)``, so a panel
    split across workers reproduces the single-process result.
    """
    out = np.empty((n_agents, n_draws))
    for i in range(n_agents):
        ss = np.random.SeedSequence(seed, spawn_key=(i,))
        out[i] = np.random.Generator(np.random.PCG64(ss)).random(n_draws)
    return out


def simulate_states(income, uniforms):
    """Income-state paths by inverse-CDF sampling from the chain."""
    n_agents, n_periods = uniforms.shape
    cum_stat = np.cumsum(income.stat_dist)
    cum_trans = np.cumsum(income.trans, axis=1)
    n_z = income.n_states
    states = np.empty((n_agents, n_periods), dtype=np.int64)
    states[:, 0] = np.minimum(np.searchsorted(cum_stat, uniforms[:, 0], side="right"),
                              n_z - 1)
    for t in range(1, n_periods):
        rows = cum_trans[states[:, t - 1]]
        states[:, t] = np.minimum((uniforms[:, t, None] >= rows).sum(axis=1), n_z - 1)
    return states


def simulate(solution, model, n_agents=10_000, n_periods=500, burn_in=200, seed=0,
             m0=1.0, uniforms=None):
    """Simulate a panel of agents following ``solution``'s policy.

    Initial states come from the stationary distribution, initial
    cash-on-hand is ``m0``, and ``m' = R (m - c(m, z)) + y(z')``.
    """
    if uniforms is None:
        uniforms = agent_uniforms(seed, n_agents, n_periods)
    states = simulate_states(model.income, uniforms)
    R = model.params.R
    y = model.income.y
    wealth = np.empty(states.shape)
    wealth[:, 0] = m0
    for t in range(1, states.shape[1]):
        m = wealth[:, t - 1]
        c = interp_gather(solution.m_grid, solution.c, m, states[:, t - 1])
        wealth[:, t] = R * np.maximum(m - c, 0.0) + y[states[:, t]]
    return SimPanel(wealth=wealth, state=states, seed=seed, burn_in=burn_in)


def ergodic_errors(solution, model, panel, pct_lo=5, pct_hi=95, max_points=50_000,
                   seed=None, implied=implied_consumption):
    """Euler errors at simulated (m, z) pairs inside a wealth-percentile window."""
    wealth, states = panel.post_burn_in
    wealth, states = wealth.ravel(), states.ravel()
    lo, hi = np.percentile(wealth, [pct_lo, pct_hi])
    inside = np.flatnonzero((wealth >= lo) & (wealth <= hi))
    if inside.size > max_points:
        rng = np.random.default_rng(panel.seed if seed is None else seed)
        inside = np.sort(rng.choice(inside, size=max_points, replace=False))
    errs = euler_errors(wealth[inside], states[inside], solution, model, implied)
    return _report(errs, "ergodic", (pct_lo, pct_hi), (lo, hi))


def ergodic_value(solution, panel):
    """Average of V along the post-burn-in simulated path."""
    wealth, states = panel.post_burn_in
    return float(np.mean(interp_gather(solution.m_grid, solution.v,
                                       wealth.ravel(), states.ravel())))


def welfare_cost(approx, reference, model, n_agents=20_000, seed=0, n_periods=500,
                 burn_in=200):
    """Consumption-equivalent cost of using ``approx`` instead of ``reference``.

    Both policies are simulated on identical shocks and their ergodic
    average values compared; V is homogeneous of degree one in a permanent
    consumption scaling, so ``V_ref / V_approx - 1`` is the fraction of
    consumption the agent would give up.
    """
    uniforms = agent_uniforms(seed, n_agents, n_periods)
    panel_a = simulate(approx, model, n_agents, n_periods, burn_in, seed, uniforms=uniforms)
    panel_r = simulate(reference, model, n_agents, n_periods, burn_in, seed,
                       uniforms=uniforms)
    return ergodic_value(reference, panel_r) / ergodic_value(approx, panel_a) - 1.0
