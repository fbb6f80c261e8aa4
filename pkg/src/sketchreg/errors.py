"""Exception hierarchy shared by the library and the CLI."""


class SketchRegError(Exception):
    """Base class for all errors raised by sketchreg."""


class DataError(SketchRegError, ValueError):
    """Input data is malformed or unsuitable (bad CSV, n <= p, bad weights)."""


class RankDeficientError(DataError):
    """A matrix that must have full column rank does not."""

    def __init__(self, message: str, rank: int | None = None):
        super().__init__(message)
        self.rank = rank


class SketchSizeError(DataError):
    """The sketch size k is too small for the requested quantity."""

    def __init__(self, message: str, minimum: int | None = None):
        super().__init__(message)
        self.minimum = minimum


class ConfigError(SketchRegError, ValueError):
    """An experiment configuration violates its schema."""
