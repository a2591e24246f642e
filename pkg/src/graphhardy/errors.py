"""Exception types shared across the package."""


class GraphHardyError(Exception):
    """Base class for all package errors."""


class DisconnectedGraph(GraphHardyError):
    """The edge set does not span a single connected component."""


class NegativeWeight(GraphHardyError):
    """An edge weight is negative."""


class ZeroMeasureVertex(GraphHardyError):
    """Some vertex has m(x) = 0 (no incident weight)."""


class KernelComponent(GraphHardyError):
    """Input has a component on the constants, where the requested
    operator is singular."""


class NonConvergent(GraphHardyError):
    """A truncated series could not reach the requested tolerance."""


class BadTuple(GraphHardyError):
    """Iterate tuple outside the admissible range [s, 2s]."""


class OverlappingSets(GraphHardyError):
    """Decay fit requested for sets E, F that intersect."""


class FactorizationMismatch(GraphHardyError):
    """Stored molecule does not reproduce from its pre-image."""


class SizeBoundViolated(GraphHardyError):
    """Annulus size bound fails for some ring index j."""

    def __init__(self, j, measured, bound):
        self.j = j
        self.measured = measured
        self.bound = bound
        super().__init__(
            f"annulus j={j}: ||b||_L2(C_j) = {measured:.6e} exceeds bound {bound:.6e}"
        )


class ValidationFailed(GraphHardyError):
    """Constructed molecule fails validation even after normalization."""


class NotExactForm(GraphHardyError):
    """Edge function is not the differential of any vertex function."""
