"""Search-based reference solvers: value function iteration and time iteration.

Both come in two modes. ``fast`` precomputes the certainty equivalent (and,
for time iteration, ``Xi``) on the asset grid once per iteration and
interpolates it during the search; ``accurate`` recomputes it exactly at
every candidate consumption, which means interpolating next-period values
at ``R (m - c) + y(z')`` for every probe.

Grid points are handled as flat arrays of ``(m, state)`` pairs so that one
golden-section search or bisection runs over the whole grid at once.
"""

import time

import numpy as np

from . import _jit
from .egm import check_backend, howard_steps, jit_args, log_expectations
from .exceptions import BracketError, DomainError, MaxItersError
from .kernels import (bisect, bisect_iterations, golden_iterations, golden_max,
                      interp_columns, interp_gather, log_expect)
from .model import Solution, initial_solution

MODES = ("fast", "accurate")
C_FLOOR = 1e-10
# relative search tolerances; the iteration counts follow from them
GOLDEN_ITERS = golden_iterations(1.0, 1e-10)
BISECT_ITERS = bisect_iterations(1.0, 1e-12)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _points(m_grid, n_states):
    m = np.repeat(np.asarray(m_grid, dtype=float), n_states)
    k = np.tile(np.arange(n_states), len(m_grid))
    return m, k


def log_mu_v(m_grid, v, model, a, weights):
    """Log certainty equivalent in value units, ``(E[V'**(1-gamma)])**(1/(1-gamma))``."""
    p = model.params
    m_next = p.R * np.asarray(a)[..., None] + model.income.y
    v_next = interp_columns(m_grid, v, m_next)
    if np.any(v_next <= 0):
        raise DomainError("interpolated next-period value is nonpositive")
    log_v = np.log(v_next)
    if log_v.ndim == np.ndim(weights) - 1:
        log_v = log_v[..., None, :]
    one_m_gamma = 1.0 - p.gamma
    return log_expect(one_m_gamma * log_v, weights) / one_m_gamma


def compute_mu_v(solution, model, a=None):
    """Certainty equivalent ``mu_V(a_j, z_k)`` on the asset grid, shape (n_a, n_z)."""
    a = model.a_grid if a is None else np.asarray(a, dtype=float)
    return np.exp(log_mu_v(solution.m_grid, solution.v, model, a[:, None],
                           model.income.trans))


def _aggregate(c, mu_v, model):
    """CES aggregator ``[(1-beta) c**(1-rho) + beta mu**(1-rho)]**(1/(1-rho))``."""
    beta = model.params.beta
    omr = model.prefs.one_minus_rho
    return ((1.0 - beta) * c**omr + beta * mu_v**omr) ** (1.0 / omr)


class _VfiProblem:
    """Bellman right-hand side for a fixed next-period value."""

    def __init__(self, v, m_grid, model, mode, m, k):
        self.v = v
        self.m_grid = m_grid
        self.model = model
        self.mode = mode
        self.m = m
        self.k = k
        self.weights = model.income.trans[k]
        if mode == "fast":
            self.mu_grid = compute_mu_v(Solution(m_grid, v, v), model)

    def mu_v(self, a):
        if self.mode == "fast":
            return interp_gather(self.model.a_grid, self.mu_grid, a, self.k)
        return np.exp(log_mu_v(self.m_grid, self.v, self.model, a, self.weights))

    def __call__(self, c):
        return _aggregate(c, self.mu_v(self.m - c), self.model)


def vfi_objective(c, m, state, solution, model, mode="fast"):
    """Lifetime value of consuming ``c`` at ``(m, state)`` given next-period V."""
    _check_mode(mode)
    c, m, state = np.broadcast_arrays(np.asarray(c, float), np.asarray(m, float),
                                      np.asarray(state, int))
    if np.any(c <= 0) or np.any(c > m):
        raise DomainError("consumption must lie in (0, m]")
    prob = _VfiProblem(np.asarray(solution.v), solution.m_grid, model, mode,
                       m.ravel(), state.ravel())
    out = prob(c.ravel()).reshape(c.shape)
    return float(out) if out.ndim == 0 else out


def _vfi_policy(v, m_grid, model, mode, m, k):
    prob = _VfiProblem(v, m_grid, model, mode, m, k)
    c, f = golden_max(prob, C_FLOOR * m, m)
    # corner solution at the borrowing limit
    f_hi = prob(m)
    corner = f_hi >= f
    return np.where(corner, m, c), np.where(corner, f_hi, f)


def _vfi_value_update(mode, m, k):
    def update(c, v, m_grid, model):
        prob = _VfiProblem(v, m_grid, model, mode, m, k)
        return prob(c.ravel()).reshape(c.shape)
    return update


def _domain(code):
    if code == _jit.DOMAIN:
        raise DomainError("nonpositive interpolated next-period value")


def _mu_v_grid_jit(v, model):
    m_grid, a_grid, y, trans, _, R, _, _ = jit_args(model)
    out = np.empty((a_grid.shape[0], y.shape[0]))
    _domain(_jit.mu_v_grid(v, m_grid, a_grid, y, trans, R, model.params.gamma, out))
    return out


def _vfi_step_jit(v, model, mode):
    m_grid, a_grid, y, trans, beta, R, rho, _ = jit_args(model)
    accurate = mode == "accurate"
    mu_grid = np.empty((2, y.shape[0])) if accurate else _mu_v_grid_jit(v, model)
    c_out = np.empty_like(v)
    v_out = np.empty_like(v)
    _domain(_jit.vfi_policy(v, m_grid, a_grid, y, trans, beta, R, rho,
                            model.params.gamma, accurate, mu_grid, GOLDEN_ITERS,
                            C_FLOOR, c_out, v_out))
    return c_out, v_out


def _vfi_value_update_jit(mode):
    accurate = mode == "accurate"

    def update(c, v, m_grid, model):
        _, a_grid, y, trans, beta, R, rho, _ = jit_args(model)
        mu_grid = np.empty((2, y.shape[0])) if accurate else _mu_v_grid_jit(v, model)
        v_out = np.empty_like(v)
        _domain(_jit.vfi_value_update(c, v, m_grid, a_grid, y, trans, beta, R, rho,
                                      model.params.gamma, accurate, mu_grid, v_out))
        return v_out
    return update


def solve_vfi(model, mode="fast", howard_k=1, init=None, raise_on_fail=True,
              backend="numba"):
    """Value function iteration with golden-section search over consumption.

    Converges when both the relative sup-norm change in V and the sup-norm
    change in consumption fall below ``conv_tol``.
    """
    _check_mode(mode)
    check_backend(backend)
    if howard_k < 1:
        raise ValueError("howard_k must be at least 1")
    p = model.params
    m_grid = model.m_grid
    n_z = model.income.n_states
    m, k = _points(m_grid, n_z)
    if init is None:
        init = initial_solution(m_grid, n_z)
    c = np.array(init.c, dtype=float)
    v = np.array(init.v, dtype=float)
    if backend == "numba":
        update = _vfi_value_update_jit(mode)

        def policy(c, v):
            return _vfi_step_jit(v, model, mode)
    else:
        update = _vfi_value_update(mode, m, k)

        def policy(c, v):
            c_flat, v_flat = _vfi_policy(v, m_grid, model, mode, m, k)
            return c_flat.reshape(c.shape), v_flat.reshape(v.shape)

    start = time.perf_counter()
    converged = False
    it = 0
    while it < p.max_iters:
        it += 1
        c_new, v_new = policy(c, v)
        if howard_k > 1:
            v_new = howard_steps(c_new, v_new, m_grid, model, howard_k - 1, update)
        dv = np.max(np.abs(v_new - v) / np.abs(v_new))
        dc = np.max(np.abs(c_new - c))
        c, v = c_new, v_new
        if dv < p.conv_tol and dc < p.conv_tol:
            converged = True
            break
    elapsed = time.perf_counter() - start

    sol = Solution(m_grid=m_grid, c=c, v=v, iters=it, converged=converged,
                   solve_seconds=elapsed, method="vfi", mode=mode, howard_k=howard_k)
    if not converged and raise_on_fail:
        raise MaxItersError(f"VFI ({mode}) did not converge in {it} iterations",
                            solution=sol)
    return sol


class _TiProblem:
    """Euler residual for fixed next-period (c', V')."""

    def __init__(self, c, v, m_grid, model, mode, m, k):
        self.c = c
        self.v = v
        self.m_grid = m_grid
        self.model = model
        self.mode = mode
        self.m = m
        self.k = k
        p = model.params
        self.log_beta_r = np.log(p.beta * p.R)
        self.theta = model.prefs.theta
        if mode == "fast":
            log_mu, log_xi = log_expectations(m_grid, c, v, model,
                                              model.a_grid[:, None], model.income.trans)
            self.mu_grid = np.exp(log_mu)
            self.xi_grid = np.exp(log_xi)

    def logs(self, a, m=None, k=None):
        k = self.k if k is None else k
        if self.mode == "fast":
            a_grid = self.model.a_grid
            mu = interp_gather(a_grid, self.mu_grid, a, k)
            xi = interp_gather(a_grid, self.xi_grid, a, k)
            if np.any(mu <= 0) or np.any(xi <= 0):
                raise DomainError("interpolated mu or Xi is nonpositive")
            return np.log(mu), np.log(xi)
        return log_expectations(self.m_grid, self.c, self.v, self.model, a,
                                self.model.income.trans[k])

    def log_rhs(self, a, k=None):
        log_mu, log_xi = self.logs(a, k=k)
        return self.log_beta_r + (1.0 - self.theta) * log_mu + log_xi

    def log_residual(self, c, m, k):
        """``log(c**-rho) - log(rhs)``; same sign and root as the level residual."""
        return -self.model.params.rho * np.log(c) - self.log_rhs(m - c, k)

    def mu(self, a, k=None):
        return np.exp(self.logs(a, k=k)[0])


def ti_residual(c, m, state, solution, model, mode="fast"):
    """Euler residual ``c**(-rho) - beta R mu(m-c)**(1-theta) Xi(m-c)``.

    Strictly decreasing in ``c``; its root is the time-iteration policy.
    """
    _check_mode(mode)
    c, m, state = np.broadcast_arrays(np.asarray(c, float), np.asarray(m, float),
                                      np.asarray(state, int))
    if np.any(c <= 0) or np.any(c > m):
        raise DomainError("consumption must lie in (0, m]")
    prob = _TiProblem(np.asarray(solution.c), np.asarray(solution.v),
                      solution.m_grid, model, mode, m.ravel(), state.ravel())
    cf, mf = c.ravel(), m.ravel()
    out = cf ** (-model.params.rho) - np.exp(prob.log_rhs(mf - cf))
    out = out.reshape(c.shape)
    return float(out) if out.ndim == 0 else out


def _ti_policy(c, v, m_grid, model, mode, m, k):
    prob = _TiProblem(c, v, m_grid, model, mode, m, k)
    c_new = m.copy()
    r_hi = prob.log_residual(m, m, k)
    free = r_hi < 0
    if np.any(free):
        mf, kf = m[free], k[free]
        lo = C_FLOOR * mf
        r_lo = prob.log_residual(lo, mf, kf)
        if np.any(r_lo <= 0):
            i = np.flatnonzero(r_lo <= 0)[0]
            raise BracketError(
                f"Euler residual has no sign change at m={mf[i]:.6g}, state={kf[i]}",
                lo=float(lo[i]), hi=float(mf[i]), r_lo=float(r_lo[i]),
                r_hi=float(r_hi[free][i]),
            )
        c_new[free] = bisect(lambda x: prob.log_residual(x, mf, kf), lo, mf,
                             r_lo=r_lo, r_hi=r_hi[free])
    # value from the Bellman equation at the new policy
    p = model.params
    omr = model.prefs.one_minus_rho
    w = (1.0 - p.beta) * c_new**omr + p.beta * prob.mu(m - c_new)
    return c_new, w ** (1.0 / omr)


def _ti_value_update(mode, m, k):
    def update(c, v, m_grid, model):
        prob = _TiProblem(c, v, m_grid, model, mode, m, k)
        p = model.params
        omr = model.prefs.one_minus_rho
        cf = c.ravel()
        w = (1.0 - p.beta) * cf**omr + p.beta * prob.mu(m - cf)
        return (w ** (1.0 / omr)).reshape(c.shape)
    return update


def _mu_xi_grid_jit(c, v, model):
    m_grid, a_grid, y, trans, _, R, rho, theta = jit_args(model)
    shape = (a_grid.shape[0], y.shape[0])
    log_mu, log_xi = np.empty(shape), np.empty(shape)
    _domain(_jit.mu_xi_grid(c, v, m_grid, a_grid, y, trans, R, rho, theta,
                            log_mu, log_xi))
    return np.exp(log_mu), np.exp(log_xi)


def _ti_step_jit(c, v, model, mode):
    m_grid, a_grid, y, trans, beta, R, rho, theta = jit_args(model)
    accurate = mode == "accurate"
    if accurate:
        mu_grid = xi_grid = np.empty((2, y.shape[0]))
    else:
        mu_grid, xi_grid = _mu_xi_grid_jit(c, v, model)
    c_out = np.empty_like(c)
    v_out = np.empty_like(v)
    code = _jit.ti_policy(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta,
                          accurate, mu_grid, xi_grid, BISECT_ITERS, C_FLOOR,
                          c_out, v_out)
    _domain(code)
    if code >= 0:
        i, k = divmod(code, y.shape[0])
        raise BracketError(
            f"Euler residual has no sign change at m={m_grid[i]:.6g}, state={k}",
            lo=C_FLOOR * m_grid[i], hi=float(m_grid[i]))
    return c_out, v_out


def _ti_value_update_jit(mode):
    accurate = mode == "accurate"

    def update(c, v, m_grid, model):
        _, a_grid, y, trans, beta, R, rho, theta = jit_args(model)
        if accurate:
            mu_grid = np.empty((2, y.shape[0]))
        else:
            mu_grid, _ = _mu_xi_grid_jit(c, v, model)
        v_out = np.empty_like(v)
        _domain(_jit.value_update_w(c, v, m_grid, a_grid, y, trans, beta, R, rho,
                                    theta, accurate, mu_grid, v_out))
        return v_out
    return update


def solve_ti(model, mode="fast", howard_k=1, init=None, raise_on_fail=True,
             backend="numba"):
    """Time iteration: bisection on the Euler equation at every grid point."""
    _check_mode(mode)
    check_backend(backend)
    if howard_k < 1:
        raise ValueError("howard_k must be at least 1")
    p = model.params
    m_grid = model.m_grid
    n_z = model.income.n_states
    m, k = _points(m_grid, n_z)
    if init is None:
        init = initial_solution(m_grid, n_z)
    c = np.array(init.c, dtype=float)
    v = np.array(init.v, dtype=float)
    if backend == "numba":
        update = _ti_value_update_jit(mode)

        def policy(c, v):
            return _ti_step_jit(c, v, model, mode)
    else:
        update = _ti_value_update(mode, m, k)

        def policy(c, v):
            c_flat, v_flat = _ti_policy(c, v, m_grid, model, mode, m, k)
            return c_flat.reshape(c.shape), v_flat.reshape(v.shape)

    start = time.perf_counter()
    converged = False
    it = 0
    while it < p.max_iters:
        it += 1
        c_new, v_new = policy(c, v)
        if howard_k > 1:
            v_new = howard_steps(c_new, v_new, m_grid, model, howard_k - 1, update)
        diff = np.max(np.abs(c_new - c))
        c, v = c_new, v_new
        if diff < p.conv_tol:
            converged = True
            break
    elapsed = time.perf_counter() - start

    sol = Solution(m_grid=m_grid, c=c, v=v, iters=it, converged=converged,
                   solve_seconds=elapsed, method="ti", mode=mode, howard_k=howard_k)
    if not converged and raise_on_fail:
        raise MaxItersError(f"TI ({mode}) did not converge in {it} iterations",
                            solution=sol)
    return sol
