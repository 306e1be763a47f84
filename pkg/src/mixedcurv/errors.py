"""Exception hierarchy shared by all modules."""


class GeometryError(Exception):
    """Base class for every error raised by mixedcurv."""


class DomainGuardViolated(GeometryError, ValueError):
    """An expression was evaluated outside the domain of log/sqrt/div/pow."""

    def __init__(self, guard, point=None):
        self.guard = guard
        self.point = None if point is None else tuple(float(c) for c in point)
        msg = f"domain guard violated: {guard}"
        if self.point is not None:
            msg += f" at point {self.point}"
        super().__init__(msg)


class ExprSyntaxError(GeometryError, ValueError):
    def __init__(self, message, line, column, text=None):
        self.line = line
        self.column = column
        self.text = text
        super().__init__(f"{message} (line {line}, column {column})")


class SingularMetric(GeometryError):
    pass


class DegeneratePlane(GeometryError):
    pass


class DegenerateDistribution(GeometryError):
    pass


class ConsistencyError(GeometryError):
    """Two independent evaluation routes of the same quantity disagree."""


class GateFailed(GeometryError):
    """A specialised identity was requested where its hypothesis does not hold."""

    def __init__(self, gate, value=None, threshold=None):
        self.gate = gate
        self.value = value
        self.threshold = threshold
        msg = f"gate '{gate}' failed"
        if value is not None:
            msg += f": {value:.3e} > {threshold:.1e}"
        super().__init__(msg)


class NotUmbilical(GateFailed):
    pass


class NotTotallyGeodesic(GateFailed):
    pass


class WrongRank(GateFailed):
    pass


class NotASubmersion(GeometryError):
    pass


class SingularJacobian(GeometryError):
    pass


class NonClosedChart(GeometryError):
    pass


class BallOutsideDomain(GeometryError):
    pass


class UnknownScenario(GeometryError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidConfig(GeometryError, ValueError):
    pass
