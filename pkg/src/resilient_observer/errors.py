"""Exception types shared across the library."""


class ResilientObserverError(Exception):
    """Base class for all library errors."""


class NonRealSpectrum(ResilientObserverError):
    """The system matrix has eigenvalues with a non-negligible imaginary part."""


class RepeatedEigenvalue(ResilientObserverError):
    """Two eigenvalues are closer than the distinctness tolerance."""


class ModeNotDetectable(ResilientObserverError):
    """An observer gain was requested for a mode the node cannot detect."""


class DimensionMismatch(ResilientObserverError):
    """A vector or matrix does not have the expected shape."""


class EmptySet(ResilientObserverError):
    """A set argument that must be non-empty was empty."""


class TooLarge(ResilientObserverError):
    """Exhaustive enumeration was requested beyond its size guard."""


class NotRobust(ResilientObserverError):
    """Information-flow DAG construction stalled; the graph is not robust enough.

    The set of nodes that could not be assigned a level is attached as
    ``residual`` so the caller can see where the topology needs more edges.
    """

    def __init__(self, residual, message=None):
        self.residual = frozenset(residual)
        super().__init__(message or f"peeling stalled; residual nodes {sorted(self.residual)}")


class TooFewValues(ResilientObserverError):
    """Trimming needs at least 2f+1 values."""


class UnknownLink(ResilientObserverError):
    """A transmission was attempted on an edge outside the baseline graph."""


class DomainError(ResilientObserverError):
    """A numeric argument is outside its documented domain."""


class ConfigInvalid(ResilientObserverError):
    """A simulation configuration violates a required hypothesis.

    The message names the violated hypothesis.
    """
