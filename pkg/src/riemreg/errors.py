"""Exception hierarchy shared by all modules."""


class RiemregError(Exception):
    """Base class for errors raised by this package."""


class DomainError(RiemregError, ValueError):
    """A point or tangent vector does not belong to the manifold."""


class CutLocusExceeded(RiemregError, ValueError):
    """A tangent vector or a pair of points reaches the injectivity guard."""


class LeftWorkingRegion(RiemregError):
    """A numerically integrated curve left the working region of a chart."""


class ShootingDiverged(RiemregError):
    """Newton shooting for the logarithm failed to converge."""


class MissingMetadata(RiemregError, ValueError):
    """A field lacks the regularity metadata needed for localization."""


class LambdaTooLarge(RiemregError, ValueError):
    """The regularization parameter is outside the admissible range."""


class ParamConstraintViolated(RiemregError, ValueError):
    """Envelope parameters violate ``mu <= lambda / (2 q)`` or similar."""


class NoFeasibleEpsilon(RiemregError, ValueError):
    """No epsilon satisfies the admissible-radius inequalities."""
