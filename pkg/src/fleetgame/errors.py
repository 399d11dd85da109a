"""Exception hierarchy shared by every stage of the pipeline."""


class FleetGameError(Exception):
    """Base class for all package errors."""


class DomainError(FleetGameError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(FleetGameError, ValueError):
    """A configuration value is missing, malformed or inconsistent."""


class DataError(FleetGameError):
    """Input data is empty, malformed or insufficient for the request."""


class InfeasiblePlanError(FleetGameError):
    """A reconfiguration target cannot be reached from the module pool."""


class UnsupportedOperationError(FleetGameError):
    """The operation does not apply to this kind of fleet."""
