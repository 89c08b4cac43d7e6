"""Exception types raised across the package."""


class ClaimError(Exception):
    """Base class for all package errors."""


class EdgeListParseError(ClaimError, ValueError):
    def __init__(self, lineno, line, reason):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: {reason}: {line!r}")


class InvalidSeedError(ClaimError, ValueError):
    pass


class InvalidActionError(ClaimError, ValueError):
    pass


class EpisodeOverError(ClaimError, RuntimeError):
    pass


class NotTerminalError(ClaimError, RuntimeError):
    pass


class OracleTooLargeError(ClaimError, ValueError):
    pass


class DegenerateStructureError(ClaimError, ValueError):
    pass


class ConfigurationError(ClaimError, ValueError):
    pass


class RelabelError(ClaimError, ValueError):
    pass


class DimensionError(ClaimError, ValueError):
    pass
