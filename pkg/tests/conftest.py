import numpy as np
import pytest

from nullforge.cone import ConeVariety
from nullforge.domain import PlanarDomain, annulus, make_circular_domain
from nullforge import generators


@pytest.fixture
def null3():
    return ConeVariety.null3()


@pytest.fixture
def ring():
    return annulus(0.5, 2.0)


@pytest.fixture
def disc():
    return PlanarDomain(0.0, 1.0)


@pytest.fixture
def two_holes():
    return make_circular_domain((0.0, 3.0), [(-1.0, 0.3), (1.0, 0.3)])


@pytest.fixture
def catenoid(ring):
    return generators.catenoid(ring)


def two_hole_seed(domain):
    """Null map phi(g, w) with g = z, w = 1/(z^2 - 1), sampled into a Laurent map."""
    from nullforge.holo import fit_function

    def h(z):
        w = 1.0 / ((z - 1) * (z + 1))
        return np.stack([(1 - z**2) / 2 * w, 1j * (1 + z**2) / 2 * w, z * w], -1)

    return fit_function(h, domain, 64)
