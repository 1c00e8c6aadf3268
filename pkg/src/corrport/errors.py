"""Exception hierarchy shared by every module of the package."""


class CorrportError(Exception):
    """Base class for all errors raised by corrport."""


class InvalidParameterError(CorrportError, ValueError):
    """A model parameter violates one of its invariants."""


class InadmissibleDeltaError(CorrportError, ValueError):
    """The correlation bound admits no strategy for the requested horizon.

    ``bound`` carries b1 / k1(N), the supremum of admissible delta values.
    """

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class DegenerateVarianceError(CorrportError, ZeroDivisionError):
    """Terminal wealth (or the index) has zero conditional variance."""


class LengthMismatchError(CorrportError, ValueError):
    """A strategy or shock sequence does not match the time grid."""


class HorizonTooLargeError(CorrportError, ValueError):
    """Exhaustive enumeration was requested for too many steps."""


class EmptyFeasibleSetError(CorrportError, ValueError):
    """No grid point satisfies the correlation constraint."""


class ConfigError(CorrportError, ValueError):
    """An experiment configuration could not be parsed or validated."""
