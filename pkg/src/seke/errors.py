"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DivergenceError and any other runtime failure -> 4.
"""


class SekeError(Exception):
    pass


class ConfigError(SekeError):
    """Invalid configuration value or combination."""


class DataError(SekeError):
    """Malformed or inconsistent input data."""


class ShapeError(SekeError):
    """Tensor dimension mismatch; message names both shapes."""


class DegenerateRowError(SekeError):
    """Softmax row with no finite entry."""


class DivergenceError(SekeError):
    """Training produced a non-finite loss."""


class DegenerateTableError(SekeError):
    """Contingency table too small for an association statistic."""


class UnsupportedModelError(SekeError):
    """Checkpoint lacks the component an operation requires."""
