"""Numerical primitives shared by every solver.

All routines are vectorised over numpy arrays: a golden-section search or a
bisection runs over a whole batch of grid points at once, with the iteration
count fixed by the widest bracket.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .exceptions import BracketError, DomainError

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GOLDEN = 1.0 / INV_GOLDEN

# |exponent| above which power means are evaluated in log space
LOG_SPACE_EXPONENT = 8.0


@dataclass(frozen=True)
class InterpTable:
    """Knots and values of a piecewise-linear function."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape[0] < 2:
            raise ValueError("InterpTable needs at least two knots")
        if ys.shape[0] != xs.shape[0]:
            raise ValueError(
                f"knots and values differ in length: {xs.shape[0]} vs {ys.shape[0]}"
            )
        if np.any(np.diff(xs) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __call__(self, x):
        return interp(self, x)


def bracket(xs, x):
    """Left knot index and interpolation weight, clipped to the end segments."""
    idx = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.shape[0] - 2)
    x0 = xs[idx]
    t = (x - x0) / (xs[idx + 1] - x0)
    return idx, t


def linear_interp(xs, ys, x):
    """Piecewise-linear interpolation with linear extrapolation at both ends."""
    x = np.asarray(x, dtype=float)
    idx, t = bracket(xs, x)
    y0 = ys[idx]
    return y0 + t * (ys[idx + 1] - y0)


def interp(table, x):
    """Evaluate an :class:`InterpTable` at ``x`` (scalar or array)."""
    out = linear_interp(table.xs, table.ys, x)
    return float(out) if np.ndim(out) == 0 else out


def interp_columns(xs, ys, x):
    """Interpolate each column of ``ys`` on the shared knots ``xs``.

    ``ys`` has shape (n, k) and ``x`` shape (..., k); column ``l`` of the
    result is ``ys[:, l]`` evaluated at ``x[..., l]``.
    """
    idx, t = bracket(xs, x)
    cols = np.arange(ys.shape[1])
    y0 = ys[idx, cols]
    return y0 + t * (ys[idx + 1, cols] - y0)


def interp_gather(xs, ys, x, cols):
    """Interpolate ``ys[:, cols[p]]`` at ``x[p]`` for every point ``p``."""
    idx, t = bracket(xs, x)
    y0 = ys[idx, cols]
    return y0 + t * (ys[idx + 1, cols] - y0)


def interp_per_column(xs, ys, x):
    """Interpolate column ``l`` of ``ys`` on its own knots ``xs[:, l]``.

    ``xs`` and ``ys`` have shape (n, k), ``x`` has shape (m, k). Each column
    of ``xs`` must be strictly increasing. The columns are stacked into one
    sorted array by adding a per-column offset, so a single ``searchsorted``
    call locates every query.
    """
    n, k = xs.shape
    lo = min(xs.min(), np.min(x))
    span = max(xs.max(), np.max(x)) - lo + 1.0
    offsets = np.arange(k) * span
    flat = (xs - lo + offsets).T.ravel()
    pos = np.searchsorted(flat, (x - lo + offsets).ravel(), side="right") - 1
    pos = pos.reshape(x.shape)
    idx = np.clip(pos - np.arange(k) * n, 0, n - 2)
    cols = np.arange(k)
    x0 = xs[idx, cols]
    y0 = ys[idx, cols]
    t = (x - x0) / (xs[idx + 1, cols] - x0)
    return y0 + t * (ys[idx + 1, cols] - y0)


def log_expect(log_x, weights):
    """``log(sum(weights * exp(log_x), axis=-1))`` without overflow.

    ``weights`` broadcasts against ``log_x``; the usual case is a row of a
    transition matrix per current state.
    """
    shift = np.max(log_x, axis=-1, keepdims=True)
    if weights.ndim == 2 and log_x.ndim >= 2 and log_x.shape[-2] == 1:
        # every current state against a shared next-state axis: one matmul
        total = np.exp(log_x[..., 0, :] - shift[..., 0, :]) @ weights.T
        with np.errstate(divide="ignore"):
            out = shift[..., 0, :] + np.log(total)
        if np.all(np.isfinite(out)):
            return out
    total = np.sum(weights * np.exp(log_x - shift), axis=-1)
    return shift[..., 0] + np.log(total)


def power_mean(values, weights, exponent, axis=-1):
    """Weighted power mean ``(sum w * v**p) ** (1/p)``.

    Parameters
    ----------
    values : array_like
        Strictly positive values.
    weights : array_like
        Probability weights, broadcastable against ``values``.
    exponent : float
        Nonzero exponent ``p``. For ``abs(p) > 8`` the mean is computed in
        log space, since e.g. ``p = -27`` over/underflows in direct form.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if exponent == 0:
        raise ValueError("power_mean exponent must be nonzero")
    if np.any(values <= 0) or np.any(np.isnan(values)):
        raise DomainError("power_mean requires strictly positive values")
    if abs(exponent) > LOG_SPACE_EXPONENT:
        values, weights = np.broadcast_arrays(values, weights)
        lse = logsumexp(exponent * np.log(values), b=weights, axis=axis)
        out = np.exp(lse / exponent)
    else:
        out = np.sum(weights * values**exponent, axis=axis) ** (1.0 / exponent)
    return float(out) if np.ndim(out) == 0 else out


def golden_iterations(width, tol):
    return max(int(math.ceil(math.log(width / tol) / math.log(GOLDEN))), 0)


def bisect_iterations(width, tol):
    return max(int(math.ceil(math.log2(width / tol))), 0)


def golden_max(f, lo, hi, tol=None):
    """Maximise a unimodal ``f`` on ``[lo, hi]`` by golden-section search.

    ``lo`` and ``hi`` may be arrays, in which case ``f`` must accept an array
    of candidates of the same shape and the searches run in lockstep.
    The default tolerance is ``1e-10 * (hi - lo)``.

    Returns
    -------
    (argmax, fmax)
    """
    scalar = np.ndim(lo) == 0 and np.ndim(hi) == 0
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    width = b - a
    if np.any(width <= 0):
        raise ValueError("golden_max needs lo < hi")
    if tol is None:
        tol = 1e-10 * width
    n_iter = golden_iterations(float(np.max(width / tol)), 1.0)

    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    fc = f(c)
    fd = f(d)
    for _ in range(n_iter):
        left = fc > fd
        # left: optimum in [a, d]; otherwise in [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        keep = np.where(left, c, d)
        fkeep = np.where(left, fc, fd)
        x_new = np.where(left, b - INV_GOLDEN * (b - a), a + INV_GOLDEN * (b - a))
        f_new = f(x_new)
        c = np.where(left, x_new, keep)
        fc = np.where(left, f_new, fkeep)
        d = np.where(left, keep, x_new)
        fd = np.where(left, fkeep, f_new)
    x = 0.5 * (a + b)
    fx = f(x)
    if scalar:
        return float(x), float(fx)
    return x, fx


def bisect(r, lo, hi, tol=None, r_lo=None, r_hi=None):
    """Find a root of ``r`` in ``[lo, hi]`` by bisection.

    Vectorised like :func:`golden_max`. The default tolerance is
    ``1e-12 * (hi - lo)``; the returned midpoint lies within ``tol / 2`` of a
    sign change. Raises :class:`BracketError` if ``r(lo) * r(hi) > 0``
    anywhere.
    """
    scalar = np.ndim(lo) == 0 and np.ndim(hi) == 0
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    width = b - a
    if tol is None:
        tol = 1e-12 * width
    ra = r(a) if r_lo is None else np.asarray(r_lo, dtype=float)
    rb = r(b) if r_hi is None else np.asarray(r_hi, dtype=float)
    bad = ra * rb > 0
    if np.any(bad):
        i = np.flatnonzero(np.atleast_1d(bad))[0]
        pick = lambda v: float(np.atleast_1d(v)[i]) if np.ndim(v) else float(v)
        raise BracketError(
            f"no sign change on [{pick(a)}, {pick(b)}]: "
            f"r(lo)={pick(ra)}, r(hi)={pick(rb)}",
            lo=pick(a), hi=pick(b), r_lo=pick(ra), r_hi=pick(rb),
        )
    n_iter = bisect_iterations(float(np.max(np.maximum(width, 0) / tol)), 1.0)
    sign_lo = np.sign(ra)
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        same = np.sign(r(mid)) == sign_lo
        a = np.where(same, mid, a)
        b = np.where(same, b, mid)
    root = 0.5 * (a + b)
    return float(root) if scalar else root
