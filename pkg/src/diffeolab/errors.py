"""Exception types raised across the package."""


class DiffeoLabError(Exception):
    """Base class for all package errors."""


class ConstructionError(DiffeoLabError):
    """A map or field cannot be built from the given data."""


class PrecisionError(DiffeoLabError):
    """A numerical target could not be reached at the requested accuracy."""


class WordLengthError(DiffeoLabError):
    """A word exceeds the configured evaluation guard."""


class ScheduleRangeError(DiffeoLabError):
    """The schedule is not defined far enough for the requested blocks."""


class TrivialElementError(DiffeoLabError):
    """A lower bound was requested for a numerically trivial element."""


class ConfigError(DiffeoLabError):
    """Invalid experiment configuration."""
