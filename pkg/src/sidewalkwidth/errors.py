"""Exception hierarchy shared across the package.

Two error families matter to callers: data that fails validation
(wrong values, broken invariants, invalid geometry) and files that
cannot be parsed at all. The CLI maps the first family to exit code 1
and the second, together with OSError, to exit code 2.
"""


class SidewalkWidthError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SidewalkWidthError):
    """Input values or derived state violate a documented invariant."""


class GeometryError(ValidationError):
    """Geometric data is degenerate or topologically invalid."""


class ConfigError(ValidationError):
    """Pipeline configuration is incomplete or inconsistent."""


class ParseError(SidewalkWidthError):
    """A file could not be decoded; the message names the location."""
