"""Exception types shared across the package."""


class MFFSSRError(Exception):
    """Base class for package errors."""


class ShapeError(MFFSSRError, ValueError):
    pass


class ConfigError(MFFSSRError, ValueError):
    pass


class DataError(MFFSSRError, ValueError):
    pass


class UsageError(MFFSSRError, ValueError):
    pass


class NumericError(MFFSSRError, FloatingPointError):
    """Raised when training produces a non-finite loss."""

    def __init__(self, message: str, batch_id=None):
        super().__init__(message)
        self.batch_id = batch_id
