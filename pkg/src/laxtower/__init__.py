"""Laurent-polynomial Lax algebras, r-matrix bracket towers and hydrodynamic hierarchies."""
from .errors import (
    BlowUp,
    DegreeOverflow,
    IllPosedReduction,
    LaxTowerError,
    ModeOverflow,
    NonzeroMeanInNonlocalTail,
    NotInvertible,
    SectorViolation,
    TangencyViolation,
    UnknownOperator,
)
from .laurent import AlgebraContext, FourierField, LaurentElement

__all__ = [
    "AlgebraContext",
    "BlowUp",
    "DegreeOverflow",
    "FourierField",
    "IllPosedReduction",
    "LaurentElement",
    "LaxTowerError",
    "ModeOverflow",
    "NonzeroMeanInNonlocalTail",
    "NotInvertible",
    "SectorViolation",
    "TangencyViolation",
    "UnknownOperator",
]
