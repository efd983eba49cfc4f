"""Exception types raised by the simulation code.

Two families: ``ValueError`` subclasses for requests outside a routine's
regime of validity, ``RuntimeError`` subclasses for numerical failures
discovered while running. The CLI maps the first to exit code 1 and the
second to exit code 2.
"""


class OutOfRegimeError(ValueError):
    """Parameters fall outside the domain where a formula is defined."""


class EmptySystemError(ValueError):
    """An observable normalised by atom number was asked of an empty system."""


class InvalidJumpError(ValueError):
    """A loss event was requested from a well that holds no atoms."""


class NumericalError(RuntimeError):
    """Base class for failures detected during integration."""


class StepSizeError(NumericalError):
    """Integration step too large: norm drift or jump probability out of bounds."""


class SingularityError(NumericalError):
    """Mean-field trajectory reached a pole of the (z, phi) chart."""
