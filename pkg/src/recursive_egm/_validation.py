"""Input checks shared by the estimator classes."""

import numpy as np
from sklearn.utils.validation import check_array


def check_points(X, n_states):
    """Validate query rows ``[m, state]``; returns float ``m`` and int ``state``."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"X must have two columns [m, state], got {X.shape[1]}")
    m, state = X[:, 0], X[:, 1]
    if np.any(m <= 0):
        raise ValueError("cash-on-hand m must be positive")
    if np.any(state != np.round(state)) or np.any(state < 0) or np.any(state >= n_states):
        raise ValueError(f"state must be an integer in [0, {n_states - 1}]")
    return m, state.astype(np.int64)


def check_choice(name, value, allowed):
    if value not in allowed:
        raise ValueError(f"{name} must be one of {tuple(allowed)}, got {value!r}")


def check_positive_int(name, value, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
