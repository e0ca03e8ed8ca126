"""Exceptions raised by gaitswap.

All domain errors derive from `GaitSwapError`, so callers can catch one class.
The command line maps them onto exit codes (see `gaitswap.cli`).
"""


class GaitSwapError(Exception):
    """Base class of all gaitswap exceptions."""
    pass


class DataError(GaitSwapError):
    """Exception related to on-disk or in-memory gait data.

    Raised for missing frame files, inconsistent frame dimensions, frames
    without any subject pixel, and malformed manifests. The message always
    names the offending file or sequence.
    """
    pass


class SequenceGapError(DataError):
    """A sequence directory has a gap in its frame numbering."""
    pass


class KeySetError(DataError):
    """A KeySet is missing, or belongs to the wrong subject."""
    pass


class ConfigError(GaitSwapError, ValueError):
    """Invalid configuration: unknown key, bad value or schema version."""
    pass


class NumericalFailure(GaitSwapError, ArithmeticError):
    """A loss became NaN or infinite during training.

    The loss components at the failing step are kept in `components`, so
    the message can be logged without re-running the step.
    """
    def __init__(self, message, components=None):
        super().__init__(message)
        self.components = dict(components or {})


class ExtractorUnavailable(GaitSwapError, RuntimeError):
    """A pretrained backend (VGG16, ResNet) cannot be loaded."""
    pass
