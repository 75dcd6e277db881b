"""Exception hierarchy.

Validation problems (bad shapes, non-binary input, malformed files) derive
from :class:`ValidationError`; the CLI maps them to exit code 2. Everything
else that goes wrong at run time maps to exit code 3.
"""


class RbmlabError(Exception):
    """Base class for all package errors."""


class ValidationError(RbmlabError, ValueError):
    """Input rejected before any work is done."""


class DimensionError(ValidationError):
    """Array shapes do not agree with the model or with each other."""


class DomainError(ValidationError):
    """Values outside the allowed domain (e.g. non-binary units)."""


class FormatError(ValidationError):
    """A file could not be parsed under its declared format."""


class EmptyDatasetError(ValidationError):
    """A dataset with no rows where at least one is required."""


class CapacityError(ValidationError):
    """Exact enumeration requested for a machine that is too large."""


class InsufficientDataError(ValidationError):
    """Not enough usable points to fit or estimate a quantity."""


class StateError(RbmlabError, RuntimeError):
    """Operation requires state that is missing (e.g. PCD chains)."""


class DegenerateTrajectoryError(RbmlabError, ArithmeticError):
    """Zero-variance trajectory; the autocorrelation is undefined."""


class GenerationError(RbmlabError, RuntimeError):
    """A randomized generator failed to satisfy its constraints."""


class NumericalError(RbmlabError, ArithmeticError):
    """A computation produced non-finite or otherwise unusable numbers."""
