import warnings

import numpy as np
import pytest
from hypothesis import settings

from recursive_egm.baselines import solve_ti, solve_vfi
from recursive_egm.egm import solve_egm
from recursive_egm.exceptions import ExistenceWarning
from recursive_egm.model import make_model


@pytest.fixture(scope="session")
def paper_model():
    return make_model()


@pytest.fixture(scope="session")
def small_model():
    return make_model(n_m=30, n_states=3, persistence=0.9, innovation_sd=0.15)


@pytest.fixture(scope="session")
def egm_sol(paper_model):
    return solve_egm(paper_model)


@pytest.fixture(scope="session")
def egm_tight(paper_model):
    """Converged in both policy and value far past the checked tolerances."""
    return solve_egm(paper_model.with_params(conv_tol=1e-10), value_tol=1e-12)


@pytest.fixture(scope="session")
def ti_fast_sol(paper_model):
    return solve_ti(paper_model, "fast")


@pytest.fixture(scope="session")
def ti_acc_sol(paper_model):
    return solve_ti(paper_model, "accurate")


@pytest.fixture(scope="session")
def vfi_fast_sol(paper_model):
    return solve_vfi(paper_model, "fast")


def random_admissible(rng):
    """Draw a calibration satisfying beta * R**theta < 1, rho on both sides of 1."""
    while True:
        beta = rng.uniform(0.85, 0.97)
        R = rng.uniform(1.0, 1.04)
        gamma = rng.uniform(1.5, 15.0)
        rho = rng.uniform(0.3, 0.9) if rng.random() < 0.5 else rng.uniform(1.2, 3.0)
        theta = (1 - gamma) / (1 - rho)
        if beta * R**theta < 1:
            break
    return dict(beta=beta, R=R, gamma=gamma, rho=float(rho),
                persistence=rng.uniform(0.0, 0.97), innovation_sd=rng.uniform(0.05, 0.2))


def quiet_model(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExistenceWarning)
        return make_model(**kw)


def unconstrained(solution, slack=1e-8):
    return np.asarray(solution.m_grid)[:, None] - np.asarray(solution.c) > slack


settings.register_profile("repo", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repo")
