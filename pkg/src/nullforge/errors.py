"""Exception hierarchy shared by all modules."""


class NullforgeError(Exception):
    """Base class for library errors."""


class ConeMembershipError(NullforgeError, ValueError):
    """A point or map that must lie on the cone does not."""


class DomainError(NullforgeError, ValueError):
    """Invalid domain geometry, or a point outside the domain."""


class PeriodObstructionError(NullforgeError, ValueError):
    """A 1-form with a nonzero residue cannot be integrated."""

    def __init__(self, message, hole=None, component=None):
        super().__init__(message)
        self.hole = hole
        self.component = component


class FitError(NullforgeError, ValueError):
    """Least-squares Laurent fit is underdetermined or too inaccurate."""


class DegenerateError(NullforgeError):
    """Period differential lacks the rank needed to correct periods."""

    def __init__(self, message, rank=None, required=None):
        super().__init__(message)
        self.rank = rank
        self.required = required


class ConvergenceError(NullforgeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class TrustRegionError(NullforgeError):
    """Flow parameters left the trust region."""


class CertificationError(NullforgeError):
    """A certificate could not be produced for the given inputs."""


class ImmersionError(ConeMembershipError):
    """The derivative vanishes somewhere, so the curve is not an immersion."""
