"""Exception types raised across the simulator."""


class ResilientDGDError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ResilientDGDError, ValueError):
    """Invalid run configuration or violated precondition."""


class EnumerationCapError(ResilientDGDError):
    """Subset enumeration would exceed the configured agent cap."""


class SingularAggregateError(ResilientDGDError):
    """An aggregate cost has no unique minimizer."""


class OutsideBoxError(ConfigError):
    """The target minimizer does not lie inside the feasible box."""


class StaleBudgetError(ResilientDGDError):
    """Fewer than n - r usable gradients at some iteration."""


class ArrivalError(ResilientDGDError):
    """The delay model cannot deliver n - r fresh gradients."""
