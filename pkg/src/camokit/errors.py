"""Exception hierarchy shared across the toolkit."""


class CamokitError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(CamokitError, ValueError):
    """A parameter violates its documented constraints."""


class FormatError(CamokitError, IOError):
    """A file does not conform to one of the supported raster formats."""
