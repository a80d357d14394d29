"""Exception hierarchy shared by all qgtlab modules."""


class QGTLabError(Exception):
    """Base class for every error raised by qgtlab."""


class SectorMismatch(QGTLabError):
    pass


class EmptySector(QGTLabError):
    pass


class CapacityExceeded(QGTLabError):
    pass


class BadParameterIndex(QGTLabError):
    pass


class DimensionMismatch(QGTLabError):
    pass


class NotHermitian(QGTLabError):
    pass


class InvalidModel(QGTLabError):
    pass


class NotConverged(QGTLabError):
    """Lanczos did not reach the residual tolerance.

    ``best_residual`` holds the smallest residual seen before giving up.
    """

    def __init__(self, message, best_residual=float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class DegenerateGroundState(QGTLabError):
    pass


class QuadratureNotConverged(QGTLabError):
    pass


class MeshTooCoarse(QGTLabError):
    pass


class LoopNotClosed(QGTLabError):
    pass


class GaplessAtFiniteSize(QGTLabError):
    pass


class UndefinedExponent(QGTLabError):
    pass


class OutOfDomain(QGTLabError):
    pass


class IllConditionedFit(QGTLabError):
    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class BadData(QGTLabError):
    pass


class SchemaError(QGTLabError):
    pass
