"""Exception types shared across the package."""


class KineticMlmcError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(KineticMlmcError, ValueError):
    """A scheme or query parameter lies outside its mathematical domain."""


class StabilityError(KineticMlmcError, ValueError):
    """A step size violates the stability constraint of the chosen scheme."""


class ConfigError(KineticMlmcError, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class BudgetError(KineticMlmcError, RuntimeError):
    """An experiment would exceed, or has exhausted, its cost budget."""
