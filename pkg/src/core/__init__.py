"""Core package for application configuration and shared definitions."""

from src.core.config import Settings, get_settings
from src.core.constants import (
    BACKGROUND_REGION,
    CONFIG_VERSION,
    DEFAULT_EPS_LADDER,
)
from src.core.enums import (
    BoundarySide,
    BoundaryTag,
    InclusionKind,
    InclusionSign,
    OperatorMode,
)
from src.core.exceptions import (
    MonotonicityError,
    NumericalError,
    SolverError,
    ValidationError,
)

__all__ = [
    "Settings",
    "get_settings",
    "BACKGROUND_REGION",
    "CONFIG_VERSION",
    "DEFAULT_EPS_LADDER",
    "BoundarySide",
    "BoundaryTag",
    "InclusionKind",
    "InclusionSign",
    "OperatorMode",
    "MonotonicityError",
    "NumericalError",
    "SolverError",
    "ValidationError",
]
