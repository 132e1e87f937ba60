"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DataError(ValueError):
    """Malformed or inconsistent input data (containers, annotations, stores)."""


class FormatError(DataError):
    """A recording container or CSV file violates its format contract."""


class NumericalError(ArithmeticError):
    """An internal computation produced an unusable result (unstable filter, non-finite values)."""
