"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: ConfigError -> 2, ValidityError and
DomainError -> 3, ResourceLimitError -> 4.
"""


class SimulationError(Exception):
    """Base class for all package errors."""


class ConfigError(SimulationError):
    """Malformed or unreadable run configuration."""


class ValidityError(SimulationError):
    """Parameters outside the regime the model is derived in."""


class DomainError(ValidityError):
    """Arguments outside an operation's mathematical domain."""


class SingularRatioError(ValidityError):
    """Interference-ratio denominator vanished (target's diagonal factor is zero)."""


class ResourceLimitError(SimulationError):
    """Requested problem size exceeds the configured memory budget."""
