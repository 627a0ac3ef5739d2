"""Exception hierarchy shared by every module of the package."""


class LaxTowerError(Exception):
    """Base class for all package errors."""


class DegreeOverflow(LaxTowerError):
    """A result needs lambda-degrees outside the context window."""


class ModeOverflow(LaxTowerError):
    """A result needs Fourier modes beyond the context cap."""


class NotInvertible(LaxTowerError):
    """Element has no invertible dominant monomial."""


class TangencyViolation(LaxTowerError):
    """A flow that should be tangent to a Lax manifold leaves it."""


class BlowUp(LaxTowerError):
    """Spectral energy piled into the top modes; a shock is forming."""


class NonzeroMeanInNonlocalTail(LaxTowerError):
    """D^{-1} was asked to integrate a function with nonzero mean."""


class UnknownOperator(LaxTowerError):
    pass


class IllPosedReduction(LaxTowerError):
    """Dirac reduction input leaves the range of the constrained block."""


class SectorViolation(LaxTowerError):
    """Covector is outside the sector on which B_{-1} can be inverted."""
