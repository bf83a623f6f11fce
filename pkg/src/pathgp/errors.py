"""Exception hierarchy shared by every module."""


class PathGPError(Exception):
    """Base class for all library errors."""


class NotPsd(PathGPError, ValueError):
    """Matrix could not be factorized even at the largest jitter."""


class NotSymmetric(PathGPError, ValueError):
    pass


class DimensionMismatch(PathGPError, ValueError):
    pass


class NonFinite(PathGPError, FloatingPointError):
    """Objective or gradient became NaN or infinite during fitting."""


class InvalidDomain(PathGPError, ValueError):
    pass


class IsolatedNode(PathGPError, ValueError):
    pass


class AlphaOutOfRange(PathGPError, ValueError):
    pass


class NotOnManifold(PathGPError, ValueError):
    pass


class FramePole(PathGPError, ValueError):
    """The latitude-longitude frame is undefined at the poles."""


class ConfigError(PathGPError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field {field!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class ParseError(PathGPError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidEdge(ParseError):
    pass
