"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
data/format problems exit 2, divergence and failed numeric checks exit 3.
"""


class GradPathError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(GradPathError):
    """Tensor shapes or dimensions do not satisfy an operation's contract."""


class ParameterError(GradPathError):
    """A hyperparameter or argument is outside its valid range."""


class StateError(GradPathError):
    """A backward pass was requested without a fresh matching forward pass."""


class DataError(GradPathError):
    """Dataset content is invalid (bad labels, missing files, ...)."""


class FormatError(DataError):
    """A binary input file is malformed. Carries the offending byte offset."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class DivergenceError(GradPathError):
    """Training produced a non-finite loss."""


class GradientCheckError(GradPathError):
    """A finite-difference gradient check exceeded its tolerance."""


class UsageError(GradPathError):
    """Command line arguments could not be parsed."""
