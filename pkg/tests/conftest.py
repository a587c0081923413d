import os

import hypothesis
import numpy as np
import pytest

from hypoflow import grid as G
from hypoflow.potential import HamiltonianModel, PotentialSpec

hypothesis.settings.register_profile("default", max_examples=40, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=400, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=8, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def quad_model():
    return HamiltonianModel(PotentialSpec.quadratic(), 0.0)


@pytest.fixture(scope="session")
def quartic_model():
    return HamiltonianModel(PotentialSpec.monomial(4), 0.25)


@pytest.fixture(scope="session")
def quad_grid(quad_model):
    return G.build_grid(quad_model, 8.0, 8.0, 128, 128)


@pytest.fixture(scope="session")
def quad_grid64(quad_model):
    return G.build_grid(quad_model, 8.0, 8.0, 64, 64)


@pytest.fixture(scope="session")
def quartic_grid64(quartic_model):
    return G.build_grid(quartic_model, 2.6, 8.0, 64, 64)


def interior_field(grid, rng):
    """Smooth field supported well inside the box."""
    R, Ry = grid.Rx, grid.Ry
    return (G.bump(grid.X, rng.uniform(-0.2, 0.2) * R, 0.6 * R)
            * G.bump(grid.Y, rng.uniform(-0.2, 0.2) * Ry, 0.6 * Ry)
            * (1 + 0.3 * np.cos(rng.uniform(0, 2) * grid.X - rng.uniform(0, 2) * grid.Y)))
