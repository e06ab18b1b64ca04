"""Exception types shared across the package."""


class RadscanError(Exception):
    """Base class for all radscan errors."""


class InvalidInputError(RadscanError):
    """An argument violates an operation's preconditions."""


class InsufficientDataError(RadscanError):
    """Too few observations to estimate the requested quantity."""


class CalibrationMismatchError(RadscanError):
    """A calibration does not match the table/config it is used with."""


class FileFormatError(RadscanError):
    """A persisted artifact could not be parsed or failed validation."""
