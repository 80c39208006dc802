"""Named seed maps for the n = 3 null quadric."""

from __future__ import annotations

import numpy as np

from .domain import PlanarDomain
from .errors import DomainError
from .holo import LaurentMap


def catenoid(domain: PlanarDomain, hole=1) -> LaurentMap:
    """((1 - w^2)/(2w^2), i(1 + w^2)/(2w^2), 1/w) with w = z - c_hole; residue (0, 0, 1)."""
    if domain.l < hole:
        raise DomainError("the catenoid seed needs a hole to wind around")
    return LaurentMap.from_terms(domain, 3, {
        (0, 0): [-0.5, 0.5j, 0.0],
        (hole, -2): [0.5, 0.5j, 0.0],
        (hole, -1): [0.0, 0.0, 1.0],
    })


def enneper(domain: PlanarDomain, k=1) -> LaurentMap:
    """((1 - w^2k)/2, i(1 + w^2k)/2, w^k) with w = z - outer center."""
    return LaurentMap.from_terms(domain, 3, {
        (0, 0): [0.5, 0.5j, 0.0],
        (0, 2 * k): [-0.5, 0.5j, 0.0],
        (0, k): [0.0, 0.0, 1.0],
    })


def line(domain: PlanarDomain) -> LaurentMap:
    """The constant null direction (1, i, 0)."""
    return LaurentMap.constant(domain, np.array([1.0, 1j, 0.0]))


def even_selfcross(domain: PlanarDomain) -> LaurentMap:
    """(w(1 - w^4)/2, i w(1 + w^4)/2, w^3): odd, so its antiderivative is even."""
    return LaurentMap.from_terms(domain, 3, {
        (0, 1): [0.5, 0.5j, 0.0],
        (0, 5): [-0.5, 0.5j, 0.0],
        (0, 3): [0.0, 0.0, 1.0],
    })


GENERATORS = {
    "catenoid": catenoid,
    "enneper": enneper,
    "line": line,
    "even-selfcross": even_selfcross,
}


def generate(name, domain):
    try:
        return GENERATORS[name](domain)
    except KeyError:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}") from None
