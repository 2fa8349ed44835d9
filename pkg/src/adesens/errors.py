"""Exception types shared across the package.

The CLI maps these onto exit codes (usage/config -> 2, data/numerical -> 3,
failed verification -> 4), so library code should prefer them over bare
ValueError when the failure category matters to a caller.
"""


class AdeSensError(Exception):
    """Base class for all package-specific errors."""


class DataError(AdeSensError):
    """Malformed, inconsistent, or out-of-domain data."""


class ConfigError(AdeSensError):
    """Invalid configuration or an infeasible run setup."""


class NumericalError(AdeSensError):
    """A numerical procedure failed (e.g. singular normal equations)."""
