"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from BreglabError,
so callers can catch one base class at API boundaries.
"""


class BreglabError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BreglabError):
    """Invalid configuration, selection string, or argument combination."""


class DomainError(BreglabError):
    """A point lies outside the open domain where an operation is defined."""


class RangeError(BreglabError):
    """A dual point lies outside the range of the gradient map."""


class NumericError(BreglabError):
    """A numeric routine failed to converge or produced an impossible value."""


class BudgetError(BreglabError):
    """An exact computation would exceed its declared enumeration budget."""


class UnsupportedError(BreglabError):
    """No implementation is registered for the requested combination."""
