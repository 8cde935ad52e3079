"""Data models for the application.

This package contains the pydantic scenario schemas and the dataclass
value objects exchanged between handlers and services.
"""

from src.models.dto import (
    BackgroundFields,
    BetaBounds,
    CalibrationResult,
    DerivativeCheck,
    DiscreteSystem,
    Displacement,
    ElementFields,
    EnergyBounds,
    IndicatorMap,
    LameField,
    LinearizedBoundsReport,
    LoadBasis,
    LocalizedPotentials,
    LoewnerPair,
    LoewnerResult,
    MaterialState,
    Mesh,
    NdMatrix,
    PixelGrid,
    ReconstructionContext,
    StudyReport,
)
from src.models.schemas import (
    DiscShape,
    InclusionConfig,
    PolygonShape,
    RectShape,
    RegionSpec,
    Scenario,
)

__all__ = [
    "BackgroundFields",
    "BetaBounds",
    "CalibrationResult",
    "DiscShape",
    "DerivativeCheck",
    "DiscreteSystem",
    "Displacement",
    "ElementFields",
    "EnergyBounds",
    "InclusionConfig",
    "IndicatorMap",
    "LameField",
    "LinearizedBoundsReport",
    "LoadBasis",
    "LocalizedPotentials",
    "LoewnerPair",
    "LoewnerResult",
    "MaterialState",
    "Mesh",
    "NdMatrix",
    "PixelGrid",
    "PolygonShape",
    "RectShape",
    "ReconstructionContext",
    "RegionSpec",
    "Scenario",
    "StudyReport",
]
