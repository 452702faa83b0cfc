"""Endogenous grid method for Epstein-Zin preferences.

Each iteration inverts the Euler equation

    c**(-rho) = beta * R * mu(a, z)**(1 - theta) * Xi(a, z)

on a fixed grid of end-of-period assets, where ``mu`` is the certainty
equivalent of next-period transformed value ``W = V**(1 - rho)`` and
``Xi = E[W'**(theta - 1) * c'**(-rho)]``. Consumption follows in closed
form, cash-on-hand is recovered as ``m = c + a``, and the value is updated
from the additive Bellman equation ``W = (1 - beta) c**(1 - rho) + beta mu``.
No root-finding is involved.

Expectations are evaluated in log space throughout: with ``theta = -27``
the terms ``W**theta`` leave the floating-point range quickly.
"""

from dataclasses import dataclass
import time

import numpy as np

from . import _jit
from .exceptions import DomainError, MaxItersError, NonMonotoneGridError
from .kernels import bracket, interp_columns, interp_per_column, log_expect
from .model import Solution, initial_solution

BACKENDS = ("numba", "numpy")


def check_backend(backend):
    if backend not in BACKENDS:
        raise ValueError(f"backend must be one of {BACKENDS}, got {backend!r}")


@dataclass(frozen=True)
class EgmWorkspace:
    """Intermediate arrays of one EGM step, indexed ``[a_j, z_k]``."""

    mu: np.ndarray
    xi: np.ndarray
    endo_m: np.ndarray
    endo_c: np.ndarray


def next_period_logs(m_grid, c, v, R, y, a):
    """Log of next-period consumption and value at ``m' = R a + y(z')``.

    ``a`` has any shape; the result gains a trailing axis over ``z'``.
    """
    m_next = R * np.asarray(a)[..., None] + y
    idx, t = bracket(m_grid, m_next)
    cols = np.arange(c.shape[1])
    c0, v0 = c[idx, cols], v[idx, cols]
    c_next = c0 + t * (c[idx + 1, cols] - c0)
    v_next = v0 + t * (v[idx + 1, cols] - v0)
    if np.any(v_next <= 0):
        raise DomainError("interpolated next-period value is nonpositive")
    if np.any(c_next <= 0):
        raise DomainError("interpolated next-period consumption is nonpositive")
    return np.log(c_next), np.log(v_next)


def log_expectations(m_grid, c, v, model, a, weights, with_xi=True):
    """``log mu`` and ``log Xi`` at assets ``a`` under transition ``weights``.

    ``weights`` broadcasts against ``a[..., None]``; pass ``trans[states]``
    for one state per point or reshape ``a`` to ``(n, 1)`` with the full
    transition matrix to get every current state at once.
    """
    p = model.params
    theta = model.prefs.theta
    omr = model.prefs.one_minus_rho
    log_c, log_v = next_period_logs(m_grid, c, v, p.R, model.income.y, a)
    log_w = omr * log_v
    if log_c.ndim == weights.ndim - 1:
        log_c, log_w = log_c[..., None, :], log_w[..., None, :]
    log_mu = log_expect(theta * log_w, weights) / theta
    if not with_xi:
        return log_mu, None
    log_xi = log_expect((theta - 1.0) * log_w - p.rho * log_c, weights)
    return log_mu, log_xi


def _grid_logs(solution, model, a=None, with_xi=True):
    a_grid = model.a_grid if a is None else np.asarray(a, dtype=float)
    return log_expectations(solution.m_grid, solution.c, solution.v, model,
                            a_grid[:, None], model.income.trans, with_xi)


def compute_mu(solution, model, a=None):
    """Certainty equivalent ``mu(a_j, z_k)`` of next-period ``W``, shape (n_a, n_z)."""
    log_mu, _ = _grid_logs(solution, model, a, with_xi=False)
    return np.exp(log_mu)


def compute_xi(solution, model, a=None):
    """``Xi(a_j, z_k) = E[W'**(theta-1) c'**(-rho) | z_k]``, shape (n_a, n_z)."""
    _, log_xi = _grid_logs(solution, model, a)
    return np.exp(log_xi)


def invert_euler(mu, xi, model):
    """Consumption ``(beta R mu**(1-theta) Xi)**(-1/rho)``."""
    mu = np.asarray(mu, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if np.any(mu <= 0) or np.any(xi <= 0):
        raise DomainError("mu and Xi must be positive")
    return np.exp(_log_inverse(np.log(mu), np.log(xi), model))


def _log_inverse(log_mu, log_xi, model):
    p = model.params
    return -(np.log(p.beta * p.R) + (1.0 - model.prefs.theta) * log_mu + log_xi) / p.rho


def _check_monotone(endo_m):
    bad = np.diff(endo_m, axis=0) <= 0
    if np.any(bad):
        j, k = np.argwhere(bad)[0]
        raise NonMonotoneGridError(
            f"endogenous grid not increasing in state {k} at asset index {j}: "
            f"m[{j}]={endo_m[j, k]:.6g}, m[{j + 1}]={endo_m[j + 1, k]:.6g}",
            state=int(k), index=int(j),
        )


def _egm_update(c, v, m_grid, model):
    """One EGM step on raw arrays. Returns (c_new, v_new, mu, workspace parts)."""
    p = model.params
    a_grid = model.a_grid
    omr = model.prefs.one_minus_rho
    log_mu, log_xi = log_expectations(m_grid, c, v, model, a_grid[:, None],
                                      model.income.trans)
    endo_c = np.exp(_log_inverse(log_mu, log_xi, model))
    endo_m = endo_c + a_grid[:, None]
    _check_monotone(endo_m)

    n_z = c.shape[1]
    zero = np.zeros((1, n_z))
    xs = np.vstack([zero, endo_m])
    ys = np.vstack([zero, endo_c])
    m_query = np.broadcast_to(m_grid[:, None], (m_grid.shape[0], n_z))
    c_new = interp_per_column(xs, ys, m_query)
    # constrained: c(m) = m exactly
    c_new = np.where(c_new >= m_query - a_grid[0], m_query, c_new)

    mu = np.exp(log_mu)
    a_new = m_query - c_new
    w_new = (1.0 - p.beta) * c_new**omr + p.beta * interp_columns(a_grid, mu, a_new)
    v_new = w_new ** (1.0 / omr)
    return c_new, v_new, mu, log_xi, endo_m, endo_c


def jit_args(model):
    """Model arrays and scalars in the order the compiled kernels expect."""
    p = model.params
    return (model.m_grid, model.a_grid, model.income.y, model.income.trans,
            p.beta, p.R, p.rho, model.prefs.theta)


def _raise_code(code, n_z, endo_m=None):
    if code == _jit.DOMAIN:
        raise DomainError("nonpositive interpolated consumption or value")
    j, k = divmod(code, n_z)
    raise NonMonotoneGridError(
        f"endogenous grid not increasing in state {k} at asset index {j}: "
        f"m[{j}]={endo_m[j, k]:.6g}, m[{j + 1}]={endo_m[j + 1, k]:.6g}",
        state=int(k), index=int(j),
    )


def _egm_update_jit(c, v, m_grid, model):
    n_a, n_z = model.a_grid.shape[0], c.shape[1]
    c_new = np.empty_like(c)
    v_new = np.empty_like(v)
    log_mu = np.empty((n_a, n_z))
    log_xi = np.empty((n_a, n_z))
    endo_m = np.empty((n_a, n_z))
    endo_c = np.empty((n_a, n_z))
    _, a_grid, y, trans, beta, R, rho, theta = jit_args(model)
    code = _jit.egm_update(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta,
                           c_new, v_new, log_mu, log_xi, endo_m, endo_c)
    if code != _jit.OK:
        _raise_code(code, n_z, endo_m)
    return c_new, v_new, np.exp(log_mu), log_xi, endo_m, endo_c


def egm_step(current, model, return_workspace=False, backend="numpy"):
    """Apply one EGM policy-and-value update to ``current``."""
    check_backend(backend)
    update = _egm_update_jit if backend == "numba" else _egm_update
    c, v, mu, log_xi, endo_m, endo_c = update(np.asarray(current.c, dtype=float),
                                              np.asarray(current.v, dtype=float),
                                              current.m_grid, model)
    new = Solution(m_grid=current.m_grid, c=c, v=v, iters=current.iters + 1,
                   method="egm", howard_k=current.howard_k)
    if return_workspace:
        ws = EgmWorkspace(mu=mu, xi=np.exp(log_xi), endo_m=endo_m, endo_c=endo_c)
        return new, ws
    return new


def howard_update(c, v, m_grid, model):
    """Value update at a fixed policy, ``mu`` interpolated from the asset grid."""
    p = model.params
    omr = model.prefs.one_minus_rho
    a_grid = model.a_grid
    log_mu, _ = log_expectations(m_grid, c, v, model, a_grid[:, None],
                                 model.income.trans, with_xi=False)
    mu = np.exp(log_mu)
    w = (1.0 - p.beta) * c**omr + p.beta * interp_columns(a_grid, mu, m_grid[:, None] - c)
    return w ** (1.0 / omr)


def howard_update_exact(c, v, m_grid, model):
    """Value update at a fixed policy with ``mu(m - c)`` evaluated exactly."""
    p = model.params
    omr = model.prefs.one_minus_rho
    a = m_grid[:, None] - c
    log_mu, _ = log_expectations(m_grid, c, v, model, a, model.income.trans,
                                 with_xi=False)
    w = (1.0 - p.beta) * c**omr + p.beta * np.exp(log_mu)
    return w ** (1.0 / omr)


def howard_update_jit(c, v, m_grid, model):
    """Compiled equivalent of :func:`howard_update_exact`."""
    v_out = np.empty_like(v)
    _, a_grid, y, trans, beta, R, rho, theta = jit_args(model)
    code = _jit.value_update_w(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta,
                               True, np.empty((2, c.shape[1])), v_out)
    if code != _jit.OK:
        raise DomainError("nonpositive interpolated next-period value")
    return v_out


def howard_steps(c, v, m_grid, model, n_steps, update=howard_update_exact):
    """Up to ``n_steps`` fixed-policy value updates, stopping once V settles."""
    tol = model.params.conv_tol
    for _ in range(n_steps):
        v_new = update(c, v, m_grid, model)
        done = np.max(np.abs(v_new - v)) < tol
        v = v_new
        if done:
            break
    return v


def solve_egm(model, howard_k=1, init=None, raise_on_fail=True, backend="numba",
              value_tol=None):
    """Iterate EGM steps to a fixed point in consumption.

    Parameters
    ----------
    model : Model
    howard_k : int
        Total value updates per policy update; ``howard_k - 1`` extra
        fixed-policy updates follow each EGM step.
    init : Solution, optional
        Starting guess; defaults to ``c = m``, ``V = c``.
    raise_on_fail : bool
        Raise :class:`MaxItersError` when the cap is hit, otherwise return
        the last iterate with ``converged=False``.
    backend : {"numba", "numpy"}
        Compiled kernels or the vectorised numpy reference path.
    value_tol : float, optional
        Also require the relative sup-norm change in V to fall below this.
        Consumption can settle well before V does, so set it when the value
        function itself must be a fixed point to high precision.
    """
    check_backend(backend)
    if howard_k < 1:
        raise ValueError("howard_k must be at least 1")
    p = model.params
    m_grid = model.m_grid
    if init is None:
        init = initial_solution(m_grid, model.income.n_states)
    c = np.array(init.c, dtype=float)
    v = np.array(init.v, dtype=float)
    if backend == "numba":
        update, value_update = _egm_update_jit, howard_update_jit
    else:
        update, value_update = _egm_update, howard_update_exact

    start = time.perf_counter()
    converged = False
    it = 0
    while it < p.max_iters:
        it += 1
        c_new, v_new, *_ = update(c, v, m_grid, model)
        if howard_k > 1:
            v_new = howard_steps(c_new, v_new, m_grid, model, howard_k - 1,
                                 value_update)
        done = np.max(np.abs(c_new - c)) < p.conv_tol
        if value_tol is not None:
            done = done and np.max(np.abs(v_new - v) / v_new) < value_tol
        c, v = c_new, v_new
        if done:
            converged = True
            break
    elapsed = time.perf_counter() - start

    sol = Solution(m_grid=m_grid, c=c, v=v, iters=it, converged=converged,
                   solve_seconds=elapsed, method="egm", howard_k=howard_k)
    if not converged and raise_on_fail:
        raise MaxItersError(f"EGM did not converge in {it} iterations", solution=sol)
    return sol
