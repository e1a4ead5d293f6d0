"""Semantic exceptions shared across the package."""


class HdsgdError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HdsgdError):
    """Bad model kind, parameter, or config file contents."""


class DomainExitError(HdsgdError):
    """An overlap matrix left the model's admissible set U.

    Carries the offending block values so callers can report where the
    dynamics stopped.
    """

    def __init__(self, message, blocks=None, t=None):
        super().__init__(message)
        self.blocks = blocks
        self.t = t


class FactorizationError(HdsgdError):
    """Matrix indefinite beyond the allowed jitter."""


class NumericError(HdsgdError):
    """Non-finite state or failed quadrature, with diagnostics in the message."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class UnsupportedModelError(HdsgdError):
    """Operation not defined for this model (e.g. alignment with ell != ell_star)."""


class InfeasibleError(HdsgdError):
    """Requested rate or exponent does not exist for these inputs."""
