"""Locally decodable codes turned into cotype lower-bound certificates for l_p tensor products."""

__version__ = "0.1.0"

from .errors import (
    BudgetExceeded,
    DimensionError,
    FamilyShortfallWarning,
    IncompleteTableError,
    InvariantError,
    LabError,
    MembershipError,
    PreconditionError,
)

__all__ = [
    "__version__",
    "BudgetExceeded",
    "DimensionError",
    "FamilyShortfallWarning",
    "IncompleteTableError",
    "InvariantError",
    "LabError",
    "MembershipError",
    "PreconditionError",
]
