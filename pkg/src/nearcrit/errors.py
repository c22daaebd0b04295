"""Exception types raised across the package."""


class NearcritError(ValueError):
    """Base class for every error raised by this package."""


class DegenerateSequenceError(NearcritError):
    pass


class InvalidParameterError(NearcritError):
    pass


class InfeasibleShiftError(NearcritError):
    pass


class InfeasibleSurgeryError(NearcritError):
    pass


class DegenerateOffspringError(NearcritError):
    pass


class InsufficientDataError(NearcritError):
    pass


class ParityError(NearcritError):
    pass


class RejectionFailure(NearcritError):
    """Raised when rejection sampling of a simple graph runs out of attempts."""

    def __init__(self, attempts):
        super().__init__(f"no simple graph after {attempts} attempts")
        self.attempts = attempts


class CorruptTraceError(NearcritError):
    pass


class NumericalInstabilityError(NearcritError):
    pass


class ConfigError(NearcritError):
    pass
