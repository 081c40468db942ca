"""Exception hierarchy shared by every module of the package."""


class PQDualError(Exception):
    """Base class for all errors raised by pqdual."""


class GeometryError(PQDualError, ValueError):
    pass


class NonConvexBody(GeometryError):
    pass


class DegenerateBody(GeometryError):
    pass


class ZeroVector(GeometryError):
    pass


class UnboundedWulffShape(GeometryError):
    pass


class NonPositiveCombination(GeometryError):
    pass


class SingularMatrix(GeometryError):
    pass


class QuadratureError(PQDualError):
    pass


class UnsupportedScheme(QuadratureError, ValueError):
    pass


class UnsupportedDimension(QuadratureError, ValueError):
    pass


class NonFiniteIntegrand(QuadratureError, FloatingPointError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class MeasureError(PQDualError, ValueError):
    pass


class NotEvenMeasure(MeasureError):
    pass


class ConcentratedMeasure(MeasureError):
    pass


class SolverError(PQDualError):
    pass


class NonFiniteObjective(SolverError, FloatingPointError):
    pass


class MaxItersExceeded(SolverError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(PQDualError, ValueError):
    pass
