"""Exception types shared across the toolkit."""


class TrbfError(Exception):
    """Base class for toolkit errors."""


class EmptyInputError(TrbfError, ValueError):
    """Input too short or empty for the requested operation."""


class DegenerateTargetError(TrbfError, ValueError):
    """Target vector carries no energy or no class contrast."""


class DimensionError(TrbfError, ValueError):
    """Array shapes disagree with the configured network or model."""


class ParseError(TrbfError, ValueError):
    """Malformed text file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.line = line


class UnsupportedVersionError(ParseError):
    """File header names a format version this build cannot read."""
