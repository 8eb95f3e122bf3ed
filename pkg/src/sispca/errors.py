"""Exception types shared across the package."""


class SisPCAError(Exception):
    """Base class for all package errors."""


class DimensionError(SisPCAError, ValueError):
    """Array shapes are incompatible or too small."""


class ConfigError(SisPCAError, ValueError):
    """Invalid model, experiment or CLI configuration."""


class NumericalError(SisPCAError, ArithmeticError):
    """A numerical routine failed (eigensolver, diverging loss, ...)."""


class UndefinedMetricError(SisPCAError, ValueError):
    """A metric is mathematically undefined for the given input."""
