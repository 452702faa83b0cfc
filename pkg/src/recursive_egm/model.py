"""Model primitives: preferences, income process, grids and solutions.

Epstein-Zin preferences are parameterised by the discount factor ``beta``,
risk aversion ``gamma`` and the inverse elasticity of intertemporal
substitution ``rho``. The solvers work with the transformed value
``W = V**(1 - rho)``, which turns the CES recursion into an additive Bellman
equation, but every :class:`Solution` stores ``V`` itself.
"""

from dataclasses import dataclass, field, replace, asdict
import math
import warnings

import numpy as np
from scipy.stats import norm

from .exceptions import DomainError, ExistenceWarning

DEFAULT_CURVATURE = math.log(50.0)
M_MIN = 1e-6


@dataclass(frozen=True)
class ModelParams:
    """Preference, return and convergence parameters."""

    beta: float = 0.96
    R: float = 1.02
    gamma: float = 10.0
    rho: float = 2.0 / 3.0
    conv_tol: float = 1e-6
    max_iters: int = 2000

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.gamma <= 0 or self.gamma == 1.0:
            raise ValueError(f"gamma must be positive and != 1, got {self.gamma}")
        if self.rho <= 0 or self.rho == 1.0:
            raise ValueError(f"rho must be positive and != 1, got {self.rho}")
        if self.conv_tol <= 0:
            raise ValueError("conv_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.satisfies_existence:
            # sufficient, not necessary: e.g. gamma=10 with any rho > 1 fails
            # it yet solves fine, so flag rather than reject
            warnings.warn(
                f"beta * R**theta = {self.beta * self.R**self.theta:.4g} >= 1; "
                "the sufficient condition for a well-defined value function "
                "does not hold",
                ExistenceWarning, stacklevel=3,
            )

    @property
    def satisfies_existence(self):
        """``beta * R**theta < 1`` (equivalently ``beta < R**|theta|`` for theta < 0)."""
        return self.beta * self.R**self.theta < 1.0

    @property
    def theta(self):
        return derive_prefs(self).theta


@dataclass(frozen=True)
class DerivedPrefs:
    theta: float
    one_minus_rho: float


def derive_prefs(params):
    """Auxiliary exponent ``theta = (1 - gamma) / (1 - rho)``."""
    if params.rho == 1.0 or params.gamma == 1.0:
        raise ValueError("rho = 1 and gamma = 1 (logarithmic limits) are not supported")
    return DerivedPrefs(
        theta=(1.0 - params.gamma) / (1.0 - params.rho),
        one_minus_rho=1.0 - params.rho,
    )


def v_to_w(v, rho):
    """Transformed value ``W = V**(1 - rho)``."""
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise DomainError("value must be strictly positive")
    out = v ** (1.0 - rho)
    return float(out) if out.ndim == 0 else out


def w_to_v(w, rho):
    """Inverse of :func:`v_to_w`."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise DomainError("transformed value must be strictly positive")
    out = w ** (1.0 / (1.0 - rho))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IncomeProcess:
    """Markov chain for log income with income levels normalised to mean one."""

    z_grid: np.ndarray
    trans: np.ndarray
    y: np.ndarray
    stat_dist: np.ndarray

    def __post_init__(self):
        trans = np.asarray(self.trans, dtype=float)
        n = trans.shape[0]
        if trans.shape != (n, n):
            raise ValueError("transition matrix must be square")
        if np.any(trans < 0) or np.max(np.abs(trans.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition matrix must be row-stochastic")
        if np.any(np.asarray(self.y) <= 0):
            raise ValueError("income levels must be positive")
        for name in ("z_grid", "trans", "y", "stat_dist"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_states(self):
        return self.trans.shape[0]

    @property
    def mean_income(self):
        return float(self.stat_dist @ self.y)


def stationary_distribution(trans, tol=1e-13, max_iter=1_000_000):
    """Stationary distribution of ``trans`` by iterating ``p <- p @ trans``."""
    n = trans.shape[0]
    p = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        p_new = p @ trans
        if np.max(np.abs(p_new - p)) < tol:
            p = p_new
            break
        p = p_new
    return p / p.sum()


def tauchen(persistence=0.95, innovation_sd=0.10, n_states=10, width=3.0):
    """Discretise ``z' = persistence * z + eps`` with Tauchen's method.

    The grid spans ``width`` unconditional standard deviations on each side.
    Income is ``exp(z)`` rescaled so that mean income under the stationary
    distribution equals one.
    """
    if not abs(persistence) < 1:
        raise ValueError("persistence must satisfy |persistence| < 1")
    if innovation_sd <= 0 or width <= 0:
        raise ValueError("innovation_sd and width must be positive")
    if n_states < 2:
        raise ValueError("need at least two income states")

    sd_z = innovation_sd / math.sqrt(1.0 - persistence**2)
    z = np.linspace(-width * sd_z, width * sd_z, n_states)
    step = z[1] - z[0]
    cond_mean = persistence * z[:, None]
    upper = norm.cdf((z[None, :] + step / 2 - cond_mean) / innovation_sd)
    lower = norm.cdf((z[None, :] - step / 2 - cond_mean) / innovation_sd)
    trans = upper - lower
    trans[:, 0] = upper[:, 0]
    trans[:, -1] = 1.0 - lower[:, -1]
    trans /= trans.sum(axis=1, keepdims=True)

    stat = stationary_distribution(trans)
    y = np.exp(z)
    y /= stat @ y
    return IncomeProcess(z_grid=z, trans=trans, y=y, stat_dist=stat)


def exp_grid(lo, hi, n, curvature=DEFAULT_CURVATURE):
    """``n`` points on ``[lo, hi]``, spaced exponentially.

    Points are ``lo + (hi - lo) * (exp(u * k) - 1) / (exp(k) - 1)`` for
    ``u`` uniform on [0, 1] and curvature ``k``; ``k -> 0`` is uniform.
    """
    u = np.linspace(0.0, 1.0, n)
    if abs(curvature) < 1e-12:
        frac = u
    else:
        frac = np.expm1(u * curvature) / np.expm1(curvature)
    grid = lo + (hi - lo) * frac
    grid[0], grid[-1] = lo, hi
    return grid


@dataclass(frozen=True)
class Grids:
    """Exogenous cash-on-hand grid and end-of-period asset grid."""

    m_grid: np.ndarray
    a_grid: np.ndarray

    def __post_init__(self):
        for name in ("m_grid", "a_grid"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or np.any(np.diff(arr) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.a_grid[0] != 0.0:
            raise ValueError("a_grid must start at the borrowing limit 0")


def build_grids(n_m=100, n_a=100, m_max_multiple=20.0, curvature=DEFAULT_CURVATURE,
                y_min=None, mean_income=1.0, m_min=M_MIN):
    """Exponentially spaced grids with ``m_max = m_max_multiple * mean_income``.

    The asset grid spans ``[0, m_max - y_min]``; ``y_min`` defaults to zero
    when not given.
    """
    if n_m < 10 or n_a < 10:
        raise ValueError("grids need at least 10 points")
    if m_max_multiple <= 0:
        raise ValueError("m_max_multiple must be positive")
    m_max = m_max_multiple * mean_income
    a_max = m_max - (y_min or 0.0)
    return Grids(
        m_grid=exp_grid(m_min, m_max, n_m, curvature),
        a_grid=exp_grid(0.0, a_max, n_a, curvature),
    )


@dataclass(frozen=True)
class Model:
    """Everything a solver needs: parameters, income chain and grids."""

    params: ModelParams
    income: IncomeProcess
    grids: Grids
    prefs: DerivedPrefs = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "prefs", derive_prefs(self.params))

    @property
    def m_grid(self):
        return self.grids.m_grid

    @property
    def a_grid(self):
        return self.grids.a_grid

    def with_grid_size(self, n, curvature=None):
        """Same model on ``n``-point grids with the same bounds."""
        g = self.grids
        k = DEFAULT_CURVATURE if curvature is None else curvature
        grids = Grids(
            m_grid=exp_grid(g.m_grid[0], g.m_grid[-1], n, k),
            a_grid=exp_grid(0.0, g.a_grid[-1], n, k),
        )
        return Model(self.params, self.income, grids)

    def with_params(self, **changes):
        return Model(replace(self.params, **changes), self.income, self.grids)


def make_model(beta=0.96, R=1.02, gamma=10.0, rho=2.0 / 3.0, persistence=0.95,
               innovation_sd=0.10, n_states=10, width=3.0, n_m=100, n_a=None,
               m_max_multiple=20.0, curvature=DEFAULT_CURVATURE, conv_tol=1e-6,
               max_iters=2000):
    """Build a :class:`Model`; defaults give the benchmark calibration."""
    params = ModelParams(beta=beta, R=R, gamma=gamma, rho=rho,
                         conv_tol=conv_tol, max_iters=max_iters)
    income = tauchen(persistence, innovation_sd, n_states, width)
    grids = build_grids(n_m, n_m if n_a is None else n_a, m_max_multiple, curvature,
                        y_min=float(income.y.min()), mean_income=income.mean_income)
    return Model(params, income, grids)


@dataclass(frozen=True)
class Solution:
    """Policy and value on the exogenous grid, indexed ``[m_i, z_k]``."""

    m_grid: np.ndarray
    c: np.ndarray
    v: np.ndarray
    iters: int = 0
    converged: bool = False
    solve_seconds: float = 0.0
    method: str = ""
    mode: str = "n/a"
    howard_k: int = 1

    def __post_init__(self):
        for name in ("m_grid", "c", "v"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.c.shape != self.v.shape or self.c.shape[0] != self.m_grid.shape[0]:
            raise ValueError("c, v must have shape (len(m_grid), n_states)")

    @property
    def n_states(self):
        return self.c.shape[1]

    def policy(self, m, state):
        """Consumption at cash-on-hand ``m`` in income state ``state``."""
        from .kernels import interp_gather
        m, state = np.broadcast_arrays(np.asarray(m, float), np.asarray(state, int))
        out = interp_gather(self.m_grid, self.c, m, state)
        return float(out) if out.ndim == 0 else out

    def value(self, m, state):
        from .kernels import interp_gather
        m, state = np.broadcast_arrays(np.asarray(m, float), np.asarray(state, int))
        out = interp_gather(self.m_grid, self.v, m, state)
        return float(out) if out.ndim == 0 else out

    def meta(self):
        d = asdict(self)
        for k in ("m_grid", "c", "v"):
            d.pop(k)
        return d


def initial_solution(m_grid, n_states, scale=1.0):
    """The consume-everything guess ``c = scale * m`` with ``V = c``."""
    c = np.tile(scale * np.asarray(m_grid)[:, None], (1, n_states))
    return Solution(m_grid=m_grid, c=c, v=c.copy())
