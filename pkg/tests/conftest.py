import numpy as np
import pytest

from vkctrl import assembly, cases
from vkctrl.mesh import build_mesh

_DISC_CACHE = {}


@pytest.fixture
def disc_factory():
    """Shared, cached Discretization instances (meshes are immutable)."""

    def make(domain="unit_square", level=2, quad_forms=5, quad_errors=7):
        key = (domain, level, quad_forms, quad_errors)
        if key not in _DISC_CACHE:
            _DISC_CACHE[key] = assembly.Discretization(
                build_mesh(domain, level), quad_forms=quad_forms,
                quad_errors=quad_errors)
        return _DISC_CACHE[key]

    return make


@pytest.fixture(scope="session")
def ex1():
    return cases.make_case("ex1")


@pytest.fixture(scope="session")
def ex2():
    return cases.make_case("ex2")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
