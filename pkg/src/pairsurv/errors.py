"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 1, data problems with 2, numeric failures with 3.
"""


class PairsurvError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PairsurvError):
    """An argument, flag, or configuration value is invalid."""


class DataError(PairsurvError):
    """Input data is malformed, inconsistent, or unusable."""


class NumericError(PairsurvError):
    """A computation produced non-finite values or broke down numerically."""
