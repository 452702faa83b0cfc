"""Compiled per-point kernels behind the ``numba`` solver backend.

These mirror the vectorised numpy routines in ``egm`` and ``baselines``
point for point; the numpy versions stay as the reference implementation
and the tests check the two agree. Every solver gets the same treatment so
that timing comparisons measure algorithms, not interpreter overhead.

Error conditions are reported through integer return codes because raising
inside nopython code loses the context the Python wrappers attach.
"""

import math

import numpy as np
from numba import njit

OK = -1
DOMAIN = -2


@njit(cache=True)
def locate(xs, x):
    """Left knot of the segment containing ``x``, clipped to [0, n - 2]."""
    n = xs.shape[0]
    if x < xs[1]:
        return 0
    if x >= xs[n - 2]:
        return n - 2
    lo = 1
    hi = n - 2
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def lerp(xs, ys, col, x):
    i = locate(xs, x)
    t = (x - xs[i]) / (xs[i + 1] - xs[i])
    return ys[i, col] + t * (ys[i + 1, col] - ys[i, col])


@njit(cache=True)
def _lse_push(run_max, run_sum, x, w):
    # online weighted log-sum-exp
    if w == 0.0:
        return run_max, run_sum
    if x > run_max:
        return x, run_sum * math.exp(run_max - x) + w
    return run_max, run_sum + w * math.exp(x - run_max)


@njit(cache=True)
def log_mu_xi_at(a, k, m_grid, c, v, y, trans, R, rho, theta):
    """Exact log mu and log Xi at assets ``a`` in current state ``k``."""
    omr = 1.0 - rho
    m1, s1 = -np.inf, 0.0
    m2, s2 = -np.inf, 0.0
    for l in range(y.shape[0]):
        mp = R * a + y[l]
        i = locate(m_grid, mp)
        t = (mp - m_grid[i]) / (m_grid[i + 1] - m_grid[i])
        cn = c[i, l] + t * (c[i + 1, l] - c[i, l])
        vn = v[i, l] + t * (v[i + 1, l] - v[i, l])
        if cn <= 0.0 or vn <= 0.0:
            return np.nan, np.nan
        lw = omr * math.log(vn)
        w = trans[k, l]
        m1, s1 = _lse_push(m1, s1, theta * lw, w)
        m2, s2 = _lse_push(m2, s2, (theta - 1.0) * lw - rho * math.log(cn), w)
    return (m1 + math.log(s1)) / theta, m2 + math.log(s2)


@njit(cache=True)
def log_mu_at(a, k, m_grid, v, y, trans, R, rho, theta):
    """Exact log mu (W units) at assets ``a`` in state ``k``."""
    omr = 1.0 - rho
    m1, s1 = -np.inf, 0.0
    for l in range(y.shape[0]):
        vn = lerp(m_grid, v, l, R * a + y[l])
        if vn <= 0.0:
            return np.nan
        m1, s1 = _lse_push(m1, s1, theta * omr * math.log(vn), trans[k, l])
    return (m1 + math.log(s1)) / theta


@njit(cache=True)
def log_mu_v_at(a, k, m_grid, v, y, trans, R, gamma):
    """Exact log certainty equivalent in V units at assets ``a``."""
    g = 1.0 - gamma
    m1, s1 = -np.inf, 0.0
    for l in range(y.shape[0]):
        vn = lerp(m_grid, v, l, R * a + y[l])
        if vn <= 0.0:
            return np.nan
        m1, s1 = _lse_push(m1, s1, g * math.log(vn), trans[k, l])
    return (m1 + math.log(s1)) / g


@njit(cache=True)
def mu_xi_grid(c, v, m_grid, a_grid, y, trans, R, rho, theta, log_mu, log_xi):
    """log mu and log Xi on the asset grid for every current state.

    Each next-period term is exponentiated once per (a_j, z'), then summed
    against every row of the transition matrix.
    """
    n_z = y.shape[0]
    omr = 1.0 - rho
    e1 = np.empty(n_z)
    e2 = np.empty(n_z)
    for j in range(a_grid.shape[0]):
        s1 = -np.inf
        s2 = -np.inf
        for l in range(n_z):
            mp = R * a_grid[j] + y[l]
            i = locate(m_grid, mp)
            t = (mp - m_grid[i]) / (m_grid[i + 1] - m_grid[i])
            cn = c[i, l] + t * (c[i + 1, l] - c[i, l])
            vn = v[i, l] + t * (v[i + 1, l] - v[i, l])
            if cn <= 0.0 or vn <= 0.0:
                return DOMAIN
            lw = omr * math.log(vn)
            e1[l] = theta * lw
            e2[l] = (theta - 1.0) * lw - rho * math.log(cn)
            s1 = max(s1, e1[l])
            s2 = max(s2, e2[l])
        for l in range(n_z):
            e1[l] = math.exp(e1[l] - s1)
            e2[l] = math.exp(e2[l] - s2)
        for k in range(n_z):
            t1 = 0.0
            t2 = 0.0
            for l in range(n_z):
                t1 += trans[k, l] * e1[l]
                t2 += trans[k, l] * e2[l]
            log_mu[j, k] = (s1 + math.log(t1)) / theta
            log_xi[j, k] = s2 + math.log(t2)
    return OK


@njit(cache=True)
def mu_v_grid(v, m_grid, a_grid, y, trans, R, gamma, mu_out):
    for j in range(a_grid.shape[0]):
        for k in range(y.shape[0]):
            lm = log_mu_v_at(a_grid[j], k, m_grid, v, y, trans, R, gamma)
            if lm != lm:
                return DOMAIN
            mu_out[j, k] = math.exp(lm)
    return OK


@njit(cache=True)
def egm_update(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta,
               c_out, v_out, log_mu, log_xi, endo_m, endo_c):
    """One EGM step. Returns OK, DOMAIN, or the flat index j * n_z + k of
    the first non-increasing endogenous grid point."""
    n_a = a_grid.shape[0]
    n_z = y.shape[0]
    omr = 1.0 - rho
    log_br = math.log(beta * R)
    code = mu_xi_grid(c, v, m_grid, a_grid, y, trans, R, rho, theta, log_mu, log_xi)
    if code != OK:
        return code
    for j in range(n_a):
        for k in range(n_z):
            cj = math.exp(-(log_br + (1.0 - theta) * log_mu[j, k] + log_xi[j, k]) / rho)
            endo_c[j, k] = cj
            endo_m[j, k] = cj + a_grid[j]
    for k in range(n_z):
        for j in range(n_a - 1):
            if endo_m[j + 1, k] <= endo_m[j, k]:
                return j * n_z + k

    for k in range(n_z):
        # augmented knots: point 0 is (0, 0), point q >= 1 is endo[q - 1]
        p = 0
        for i in range(m_grid.shape[0]):
            x = m_grid[i]
            while p < n_a - 1 and endo_m[p, k] <= x:
                p += 1
            if p == 0:
                x0, y0 = 0.0, 0.0
            else:
                x0, y0 = endo_m[p - 1, k], endo_c[p - 1, k]
            x1, y1 = endo_m[p, k], endo_c[p, k]
            cc = y0 + (x - x0) / (x1 - x0) * (y1 - y0)
            if cc >= x - a_grid[0]:
                cc = x
            ai = locate(a_grid, x - cc)
            t = (x - cc - a_grid[ai]) / (a_grid[ai + 1] - a_grid[ai])
            mu0 = math.exp(log_mu[ai, k])
            mu1 = math.exp(log_mu[ai + 1, k])
            w = (1.0 - beta) * cc**omr + beta * (mu0 + t * (mu1 - mu0))
            c_out[i, k] = cc
            v_out[i, k] = w ** (1.0 / omr)
    return OK


@njit(cache=True)
def value_update_w(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta,
                   accurate, mu_grid, v_out):
    """Fixed-policy update ``W = (1-beta) c**(1-rho) + beta mu(m - c)``.

    ``mu`` is exact when ``accurate`` and otherwise interpolated from
    ``mu_grid`` (W units on the asset grid).
    """
    omr = 1.0 - rho
    for i in range(m_grid.shape[0]):
        for k in range(y.shape[0]):
            a = m_grid[i] - c[i, k]
            if accurate:
                lm = log_mu_at(a, k, m_grid, v, y, trans, R, rho, theta)
                if lm != lm:
                    return DOMAIN
                mu = math.exp(lm)
            else:
                mu = lerp(a_grid, mu_grid, k, a)
            w = (1.0 - beta) * c[i, k] ** omr + beta * mu
            v_out[i, k] = w ** (1.0 / omr)
    return OK


@njit(cache=True)
def _vfi_f(cc, m, k, accurate, m_grid, v, a_grid, mu_grid, y, trans, beta, R,
           rho, gamma):
    omr = 1.0 - rho
    a = m - cc
    if accurate:
        mu = math.exp(log_mu_v_at(a, k, m_grid, v, y, trans, R, gamma))
    else:
        mu = lerp(a_grid, mu_grid, k, a)
    return ((1.0 - beta) * cc**omr + beta * mu**omr) ** (1.0 / omr)


@njit(cache=True)
def vfi_policy(v, m_grid, a_grid, y, trans, beta, R, rho, gamma, accurate,
               mu_grid, n_iter, c_floor, c_out, v_out):
    """Golden-section maximisation of the Bellman objective at every point."""
    inv_g = (math.sqrt(5.0) - 1.0) / 2.0
    for i in range(m_grid.shape[0]):
        m = m_grid[i]
        for k in range(y.shape[0]):
            lo = c_floor * m
            hi = m
            x1 = hi - inv_g * (hi - lo)
            x2 = lo + inv_g * (hi - lo)
            f1 = _vfi_f(x1, m, k, accurate, m_grid, v, a_grid, mu_grid, y, trans,
                        beta, R, rho, gamma)
            f2 = _vfi_f(x2, m, k, accurate, m_grid, v, a_grid, mu_grid, y, trans,
                        beta, R, rho, gamma)
            for _ in range(n_iter):
                if f1 > f2:
                    hi = x2
                    x2 = x1
                    f2 = f1
                    x1 = hi - inv_g * (hi - lo)
                    f1 = _vfi_f(x1, m, k, accurate, m_grid, v, a_grid, mu_grid, y,
                                trans, beta, R, rho, gamma)
                else:
                    lo = x1
                    x1 = x2
                    f1 = f2
                    x2 = lo + inv_g * (hi - lo)
                    f2 = _vfi_f(x2, m, k, accurate, m_grid, v, a_grid, mu_grid, y,
                                trans, beta, R, rho, gamma)
            cs = 0.5 * (lo + hi)
            fs = _vfi_f(cs, m, k, accurate, m_grid, v, a_grid, mu_grid, y, trans,
                        beta, R, rho, gamma)
            f_corner = _vfi_f(m, m, k, accurate, m_grid, v, a_grid, mu_grid, y,
                              trans, beta, R, rho, gamma)
            if f_corner >= fs:
                cs = m
                fs = f_corner
            if fs != fs:
                return DOMAIN
            c_out[i, k] = cs
            v_out[i, k] = fs
    return OK


@njit(cache=True)
def vfi_value_update(c, v, m_grid, a_grid, y, trans, beta, R, rho, gamma, accurate,
                     mu_grid, v_out):
    for i in range(m_grid.shape[0]):
        for k in range(y.shape[0]):
            f = _vfi_f(c[i, k], m_grid[i], k, accurate, m_grid, v, a_grid, mu_grid,
                       y, trans, beta, R, rho, gamma)
            if f != f:
                return DOMAIN
            v_out[i, k] = f
    return OK


@njit(cache=True)
def _ti_log_rhs(a, k, accurate, m_grid, c, v, a_grid, mu_grid, xi_grid, y, trans,
                R, rho, theta, log_br):
    if accurate:
        lmu, lxi = log_mu_xi_at(a, k, m_grid, c, v, y, trans, R, rho, theta)
    else:
        i = locate(a_grid, a)
        t = (a - a_grid[i]) / (a_grid[i + 1] - a_grid[i])
        mu = mu_grid[i, k] + t * (mu_grid[i + 1, k] - mu_grid[i, k])
        xi = xi_grid[i, k] + t * (xi_grid[i + 1, k] - xi_grid[i, k])
        if mu <= 0.0 or xi <= 0.0:
            return np.nan
        lmu = math.log(mu)
        lxi = math.log(xi)
    return log_br + (1.0 - theta) * lmu + lxi


@njit(cache=True)
def ti_policy(c, v, m_grid, a_grid, y, trans, beta, R, rho, theta, accurate,
              mu_grid, xi_grid, n_iter, c_floor, c_out, v_out):
    """Bisection on the log Euler residual, then the Bellman value update.

    Returns OK, DOMAIN, or the flat index i * n_z + k of a point whose
    bracket has no sign change.
    """
    omr = 1.0 - rho
    log_br = math.log(beta * R)
    n_z = y.shape[0]
    for i in range(m_grid.shape[0]):
        m = m_grid[i]
        for k in range(n_z):
            r_hi = -rho * math.log(m) - _ti_log_rhs(0.0, k, accurate, m_grid, c, v,
                                                    a_grid, mu_grid, xi_grid, y,
                                                    trans, R, rho, theta, log_br)
            if r_hi != r_hi:
                return DOMAIN
            if r_hi >= 0.0:
                cs = m
            else:
                lo = c_floor * m
                hi = m
                r_lo = -rho * math.log(lo) - _ti_log_rhs(m - lo, k, accurate, m_grid,
                                                         c, v, a_grid, mu_grid,
                                                         xi_grid, y, trans, R, rho,
                                                         theta, log_br)
                if not r_lo > 0.0:
                    return i * n_z + k
                for _ in range(n_iter):
                    mid = 0.5 * (lo + hi)
                    r = -rho * math.log(mid) - _ti_log_rhs(m - mid, k, accurate,
                                                           m_grid, c, v, a_grid,
                                                           mu_grid, xi_grid, y,
                                                           trans, R, rho, theta,
                                                           log_br)
                    if r > 0.0:
                        lo = mid
                    else:
                        hi = mid
                cs = 0.5 * (lo + hi)
            a = m - cs
            if accurate:
                mu = math.exp(log_mu_at(a, k, m_grid, v, y, trans, R, rho, theta))
            else:
                mu = lerp(a_grid, mu_grid, k, a)
            c_out[i, k] = cs
            v_out[i, k] = ((1.0 - beta) * cs**omr + beta * mu) ** (1.0 / omr)
    return OK
