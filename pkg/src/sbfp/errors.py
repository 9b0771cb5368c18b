"""Exception hierarchy shared by every stage of the toolkit."""


class SbfpError(Exception):
    """Base class for all domain errors raised by :mod:`sbfp`."""


# process simulation
class NoExitWithinCap(SbfpError):
    """A simulated path reached ``max_steps`` without a turning point."""


class AllTruncated(SbfpError):
    """Every Monte Carlo replication was truncated at ``max_steps``."""


# transforms
class PoleHit(SbfpError):
    """A transform was evaluated at (or within guard distance of) a pole."""


class IllConditioned(SbfpError):
    """Partial fractions are unreliable because denominator roots cluster."""


class Divergent(SbfpError):
    """Gaver-Stehfest estimates at successive orders do not stabilize."""


# turning-point moment
class DegenerateDrift(SbfpError):
    """Drift inputs make the closed-form constants undefined."""


class NoRootInBracket(SbfpError):
    """The turning-point equation has no sign change on the search interval."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoStationaryPoint(SbfpError):
    """The inverted moment curve has no stationary point on the interval."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# data / estimation
class ParseError(SbfpError):
    """Malformed CSV input; carries the 1-based line number and column."""

    def __init__(self, message, line, column=None):
        where = f"line {line}" + (f", column {column!r}" if column else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.column = column


class EmptySeries(SbfpError):
    """The input file holds a header but no observations."""


class TooShort(SbfpError):
    """Series is too short for the requested drift window."""


class ZeroSpan(SbfpError):
    """A drift window covers zero elapsed time."""
