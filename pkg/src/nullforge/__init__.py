"""Directed holomorphic immersions of circular planar domains.

Builds maps F: M -> C^n whose derivative takes values in a quadric cone
A minus the origin (null curves being the model case), by steering the
periods of f = dF/dz to zero with compositions of tangential flows, then
certifies the result.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CertificationError,
    ConeMembershipError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    FitError,
    ImmersionError,
    NullforgeError,
    PeriodObstructionError,
    TrustRegionError,
)
