"""Shared helpers for building benchmark-style random instances."""

import warnings

import numpy as np
import pytest

from netalloc import SimilarityKernel, ThetaParams, make_instance
from netalloc.experiments import simulation_instance
from netalloc.network import erdos_renyi


def protocol_instance(n, density=0.3, set_id=1, seed=0, a_n=None):
    """Random network + fair-coin binary covariates + L1 similarity."""
    theta = ThetaParams.from_set(set_id, a_n=(1.0 / n if a_n is None else a_n))
    return simulation_instance(n, density, theta, seed=seed)


def random_theta(rng, positivity=False, a_n=1.0):
    """Moderate random parameters; positivity restricts signs for the
    monotone-welfare profile."""
    if positivity:
        vals = dict(
            theta0=rng.uniform(-2.5, 0.0),
            theta1=rng.uniform(0.1, 1.0),
            theta2=rng.uniform(0.0, 0.5),
            theta3=rng.uniform(0.0, 1.0),
            theta4=rng.uniform(0.1, 1.0),
            theta5=rng.uniform(0.0, 1.0),
            theta6=rng.uniform(0.0, 1.0),
        )
    else:
        vals = {f"theta{k}": rng.uniform(-1.0, 1.0) for k in range(7)}
    return ThetaParams(**vals, a_n=a_n)


def random_instance(rng, n, density=0.4, positivity=False, a_n=None):
    """Instance with random structure, covariates, and parameters."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        net = erdos_renyi(n, density, seed=int(rng.integers(2**31)))
    x = rng.integers(0, 2, size=(n, 1)).astype(float)
    theta = random_theta(rng, positivity=positivity, a_n=(1.0 / n if a_n is None else a_n))
    return make_instance(net, x, theta, kernel=SimilarityKernel.abs_diff())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
