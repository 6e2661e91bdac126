"""Exception types shared across the package."""


class CodepopError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CodepopError):
    """A distribution, code, graph or population violates a model invariant."""


class UsageError(CodepopError):
    """An operation was called with structurally incompatible arguments."""


class AbsoluteContinuityError(ValidationError):
    """KL divergence is undefined: the first argument has mass where the second has none."""


class DegenerateConditioningError(ValidationError):
    """The conditioning event has zero probability."""
