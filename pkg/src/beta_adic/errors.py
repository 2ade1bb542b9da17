"""Exception hierarchy shared by all modules."""


class BetaAdicError(Exception):
    """Base class for library errors."""


class AmbiguousBoundary(BetaAdicError):
    """A floor computation cannot be certified at the available precision."""


class DepthExceeded(BetaAdicError):
    """A comparison ran past the truncation depth of d(1, beta) or of a word."""


class MaximalPoint(BetaAdicError):
    """The successor is undefined within the search horizon."""


class MinimalPoint(BetaAdicError):
    """The predecessor of the all-zero word is undefined."""


class EnumerationTooLarge(BetaAdicError):
    """An exhaustive enumeration would exceed the configured size limit."""


class NoConvergence(BetaAdicError):
    """An iterative solver failed to reach its tolerance."""


class DomainError(BetaAdicError, ValueError):
    """Argument outside the mathematical domain of the function."""


class FeasibilityExceeded(BetaAdicError):
    """Requested experiment size exceeds the feasibility guard."""


class UnsupportedKind(BetaAdicError):
    """Report kind has no content suitable for the requested operation."""
