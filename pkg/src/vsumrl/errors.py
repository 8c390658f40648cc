"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config/usage problems exit 1, data
problems exit 2, numeric failures exit 3.
"""


class VsumError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(VsumError):
    """Invalid configuration: unknown keys, bad values, weight sums."""


class DataError(VsumError):
    """Malformed or inconsistent on-disk data: parse failures, shape or
    alignment mismatches, missing files, checkpoint incompatibilities."""


class NumericError(VsumError):
    """Non-finite values produced where the contract requires finiteness."""
