"""Endogenous grid method for Epstein-Zin consumption-savings problems,
with value- and time-iteration baselines and a benchmark harness."""

from .baselines import compute_mu_v, solve_ti, solve_vfi, ti_residual, vfi_objective
from .egm import compute_mu, compute_xi, egm_step, invert_euler, solve_egm
from .estimators import EZEGMSolver, TimeIterationSolver, ValueIterationSolver
from .evaluation import (
    EulerErrorReport,
    SimPanel,
    ergodic_errors,
    euler_error_at,
    grid_errors,
    simulate,
    welfare_cost,
)
from .exceptions import (
    BracketError,
    ConstrainedPointError,
    DomainError,
    ExistenceWarning,
    MaxItersError,
    NonMonotoneGridError,
)
from .kernels import InterpTable, bisect, golden_max, interp, power_mean
from .model import (
    DerivedPrefs,
    Grids,
    IncomeProcess,
    Model,
    ModelParams,
    Solution,
    build_grids,
    derive_prefs,
    make_model,
    tauchen,
    v_to_w,
    w_to_v,
)

__version__ = "0.1.0"

__all__ = [
    "bisect",
    "BracketError",
    "build_grids",
    "compute_mu",
    "compute_mu_v",
    "compute_xi",
    "ConstrainedPointError",
    "derive_prefs",
    "DerivedPrefs",
    "DomainError",
    "egm_step",
    "ergodic_errors",
    "euler_error_at",
    "EulerErrorReport",
    "ExistenceWarning",
    "EZEGMSolver",
    "golden_max",
    "grid_errors",
    "Grids",
    "IncomeProcess",
    "interp",
    "InterpTable",
    "invert_euler",
    "make_model",
    "MaxItersError",
    "Model",
    "ModelParams",
    "NonMonotoneGridError",
    "power_mean",
    "SimPanel",
    "simulate",
    "Solution",
    "solve_egm",
    "solve_ti",
    "solve_vfi",
    "tauchen",
    "ti_residual",
    "TimeIterationSolver",
    "v_to_w",
    "ValueIterationSolver",
    "vfi_objective",
    "w_to_v",
    "welfare_cost",
]
