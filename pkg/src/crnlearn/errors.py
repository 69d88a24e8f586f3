"""Exception types shared across the package."""


class CRNError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CRNError, ValueError):
    pass


class DomainError(CRNError, ValueError):
    """A log-likelihood or KL term was asked for at a non-positive intensity."""

    def __init__(self, message, channel=None, row=None, state=None):
        super().__init__(message)
        self.channel = channel
        self.row = row
        self.state = state


class InconsistentDataError(CRNError, ValueError):
    pass


class NoInformationError(CRNError, ValueError):
    """The data carry no information on a parameter (zero exposure)."""


class SimulationDivergedError(CRNError, RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InvalidStartError(CRNError, ValueError):
    pass


class DivergedError(CRNError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(CRNError, ValueError):
    pass
