"""Exception types raised by the numerical modules.

The CLI maps :class:`ConfigError` subclasses to exit status 2 and every
other :class:`PhaseCrystalError` to exit status 3.
"""


class PhaseCrystalError(Exception):
    """Base class for all package errors."""


class NumericFailure(PhaseCrystalError):
    """A computation could not meet its stated accuracy or validity."""


class NonConvergence(NumericFailure):
    pass


class CutoffTooSmall(NumericFailure):
    pass


class SecularMismatch(NumericFailure):
    pass


class GapClosure(NumericFailure):
    pass


class DomainTooSmall(NumericFailure):
    pass


class InvalidSqueeze(NumericFailure):
    pass


class StepRejected(NumericFailure):
    pass


class CollisionSingularity(NumericFailure):
    pass


class ConfigError(PhaseCrystalError):
    pass


class ParseError(ConfigError):
    """Malformed configuration text; carries line/field context in the message."""


class ValidationError(ConfigError):
    """A configuration value violates a module precondition."""
