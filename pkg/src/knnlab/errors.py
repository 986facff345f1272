"""Exception types raised across the package."""


class KnnlabError(Exception):
    """Base class for package errors."""


class DomainError(KnnlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfeasibleTrapError(KnnlabError, ValueError):
    """The requested trap cannot be built (too many sub-disks for ``a``)."""


class PlacementError(KnnlabError, ValueError):
    """A trap's outer disk does not fit inside the unit square."""


class CertificateError(KnnlabError, RuntimeError):
    """No sub-disk count up to ``l_max`` passes the containment certificate."""


class UnsupportedRuleError(KnnlabError, ValueError):
    """Connectivity was requested on a directed neighbor graph."""


class SearchError(KnnlabError, RuntimeError):
    """The bound search found no feasible (a, L) pair."""


class ResourceLimitError(KnnlabError, RuntimeError):
    """An experiment exceeds the configured point-sample budget."""
