"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid sizes, caps or parameter combinations, detected before computing."""


class DomainError(ValueError):
    """An operation was called outside its mathematical domain."""


class InstabilityError(RuntimeError):
    """A time stepper left its stability region (norm blow-up or non-finite values)."""


class FilterDegeneracyError(RuntimeError):
    """Vanishing filter mass or particle-weight collapse."""
