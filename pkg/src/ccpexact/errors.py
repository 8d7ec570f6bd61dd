"""Exception hierarchy shared by the library and the command line front end."""


class CCPError(Exception):
    """Base class for every error raised by :mod:`ccpexact`."""

    #: process exit code used by the CLI
    exit_code = 5


class ValidationError(CCPError, ValueError):
    exit_code = 3


class NonPositiveProbability(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class BadBounds(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NotUniform(ValidationError):
    pass


class EngineMismatch(ValidationError):
    pass


class TerminalState(CCPError, ValueError):
    """Successors were requested for a state that already holds k complete coupons."""


class AbsorbingAncestor(CCPError, ValueError):
    """An ancestor with complete-coupon mass 1 can never be left."""


class Overflow(CCPError):
    """The number of expanded states exceeded the configured cap."""

    exit_code = 4

    def __init__(self, message: str, states: int | None = None, cap: int | None = None):
        super().__init__(message)
        self.states = states
        self.cap = cap


class TooLarge(CCPError):
    """The raw chain is too large for the dense linear-solve oracle."""
