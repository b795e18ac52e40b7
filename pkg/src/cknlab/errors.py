"""Exception hierarchy shared by every module."""


class CknError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(CknError, ValueError):
    """An argument lies outside the range where the quantity is defined."""


class NonConvergent(CknError):
    """A quadrature or iteration did not reach its tolerance."""


class SingularityTooStrong(NonConvergent):
    """Observed refinement behaviour contradicts the declared singularity."""


class ZeroDenominator(CknError):
    """The weighted L^p mass of a profile vanished."""


class WindowViolation(DomainError):
    """Parameters lie outside the window where a minimizer is known to exist."""


class NotConverged(NonConvergent):
    """The extremal solver hit its iteration cap."""


class PositivityLost(CknError):
    """An iterate lost positivity and could not be repaired by projection."""


class FitFailed(CknError):
    """A least-squares fit did not reach the requested accuracy."""


class InvalidSchedule(DomainError):
    """A parameter schedule violates one of its admissibility constraints."""


class UnsupportedSupport(DomainError):
    """A profile is not supported inside the region covered by its grid."""


class ParseError(CknError, ValueError):
    """A configuration document could not be parsed or validated."""
