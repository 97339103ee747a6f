"""Exception hierarchy shared by all pipeline stages."""


class AreaCoverageError(Exception):
    """Base class; ``stage`` is filled in by the pipeline when it re-raises."""

    stage: str | None = None


class GeometryError(AreaCoverageError):
    pass


class InvalidRing(GeometryError):
    pass


class NotAdjacent(GeometryError):
    pass


class InvalidParameter(AreaCoverageError, ValueError):
    pass


class WindTooStrong(InvalidParameter):
    pass


class InvalidDepot(AreaCoverageError):
    pass


class DisconnectedInstance(AreaCoverageError):
    def __init__(self, vertex: int, message: str | None = None):
        self.vertex = vertex
        super().__init__(message or f"vertex {vertex} is unreachable from the depot")


class Infeasible(AreaCoverageError):
    """No capacity-feasible solution exists."""


class InfeasibleEdge(Infeasible):
    def __init__(self, edge: int, demand: float, capacity: float):
        self.edge = edge
        self.demand = demand
        self.capacity = capacity
        super().__init__(
            f"required edge {edge} needs demand {demand:.6g} on its own route, "
            f"exceeding capacity {capacity:.6g}"
        )


class TooLarge(AreaCoverageError):
    pass


class FormatError(AreaCoverageError):
    pass


class IoError(AreaCoverageError, OSError):
    pass
