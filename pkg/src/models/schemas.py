"""Pydantic schemas for scenario configuration and region geometry.

This module defines the validated, serializable inputs of the application:
geometric shapes, region specifications, and the full ``Scenario`` that
drives every CLI command. All models forbid unknown keys.
"""

from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.constants import (
    CONFIG_VERSION,
    DEFAULT_EPS_LADDER,
    DEFAULT_T_LADDER,
)
from src.core.enums import (
    BoundarySide,
    ChannelMode,
    ExtremeMode,
    InclusionKind,
    InclusionSign,
    OperatorMode,
    OuterInequality,
)

# =============================================================================
# Base Schemas
# =============================================================================


class StrictSchema(BaseModel):
    """Base schema: unknown keys rejected, instances immutable."""

    model_config = ConfigDict(extra="forbid", frozen=True)


Point = tuple[float, float]

# =============================================================================
# Shapes
# =============================================================================


class DiscShape(StrictSchema):
    """Open disc.

    Attributes:
        center: Disc center.
        radius: Disc radius.
    """

    type: Literal["disc"] = "disc"
    center: Point
    radius: float = Field(gt=0.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points (shape ``(k, 2)``)."""
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) < self.radius**2

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding box ``(xmin, ymin, xmax, ymax)``."""
        cx, cy = self.center
        r = self.radius
        return (cx - r, cy - r, cx + r, cy + r)


class RectShape(StrictSchema):
    """Open axis-aligned rectangle.

    Attributes:
        corner_lo: Lower-left corner.
        corner_hi: Upper-right corner.
    """

    type: Literal["rect"] = "rect"
    corner_lo: Point
    corner_hi: Point

    @model_validator(mode="after")
    def check_corners(self) -> "RectShape":
        if not (
            self.corner_lo[0] < self.corner_hi[0]
            and self.corner_lo[1] < self.corner_hi[1]
        ):
            raise ValueError("corner_lo must be strictly below-left of corner_hi")
        return self

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points (shape ``(k, 2)``)."""
        p = np.asarray(points, dtype=float)
        return (
            (p[:, 0] > self.corner_lo[0])
            & (p[:, 0] < self.corner_hi[0])
            & (p[:, 1] > self.corner_lo[1])
            & (p[:, 1] < self.corner_hi[1])
        )

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding box ``(xmin, ymin, xmax, ymax)``."""
        return (*self.corner_lo, *self.corner_hi)


class PolygonShape(StrictSchema):
    """Simple polygon, interior by the even-odd rule.

    Attributes:
        vertices: Vertex list; the closing edge is implicit.
    """

    type: Literal["polygon"] = "polygon"
    vertices: list[Point] = Field(min_length=3)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points (shape ``(k, 2)``) by horizontal ray crossings."""
        p = np.asarray(points, dtype=float)
        v = np.asarray(self.vertices, dtype=float)
        w = np.roll(v, -1, axis=0)
        x, y = p[:, 0:1], p[:, 1:2]
        # half-open rule on y so shared vertices count once
        straddles = (v[:, 1] > y) != (w[:, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = v[:, 0] + (y - v[:, 1]) * (w[:, 0] - v[:, 0]) / (w[:, 1] - v[:, 1])
        crossings = np.count_nonzero(straddles & (x < x_cross), axis=1)
        return crossings % 2 == 1

    def bounds(self) -> tuple[float, float, float, float]:
        """Bounding box ``(xmin, ymin, xmax, ymax)``."""
        v = np.asarray(self.vertices, dtype=float)
        return (
            float(v[:, 0].min()),
            float(v[:, 1].min()),
            float(v[:, 0].max()),
            float(v[:, 1].max()),
        )


Shape = Annotated[DiscShape | RectShape | PolygonShape, Field(discriminator="type")]

# =============================================================================
# Regions and Inclusions
# =============================================================================


class RegionSpec(StrictSchema):
    """Labeled geometric region.

    Attributes:
        id: Region identifier, unique within a scenario.
        shape: Region geometry.
        kind: Material state the region will carry; extreme regions must be
            mutually disjoint.
    """

    id: str = Field(min_length=1)
    shape: Shape
    kind: InclusionKind = InclusionKind.FINITE

    @field_validator("id")
    @classmethod
    def check_id(cls, v: str) -> str:
        if v == "background":
            raise ValueError("'background' is reserved")
        return v

    @property
    def is_extreme(self) -> bool:
        """Whether the region is a cavity or rigid inclusion."""
        return self.kind != InclusionKind.FINITE


class InclusionConfig(RegionSpec):
    """Region plus its Lame parameters.

    Attributes:
        lam: First Lame parameter (finite inclusions only).
        mu: Shear modulus (finite inclusions only).
    """

    lam: float | None = None
    mu: float | None = None

    @model_validator(mode="after")
    def check_parameters(self) -> "InclusionConfig":
        if self.kind == InclusionKind.FINITE:
            if self.lam is None or self.mu is None:
                raise ValueError(f"finite inclusion '{self.id}' needs lam and mu")
        elif self.lam is not None or self.mu is not None:
            raise ValueError(f"{self.kind.value} inclusion '{self.id}' takes no parameters")
        return self

    def region_spec(self) -> RegionSpec:
        """The geometric part of the inclusion."""
        return RegionSpec(id=self.id, shape=self.shape, kind=self.kind)


# =============================================================================
# Scenario Blocks
# =============================================================================


class MeshConfig(StrictSchema):
    """Mesh block.

    Attributes:
        n: Subdivisions per side of the inversion mesh.
        dirichlet_sides: Sides carrying zero displacement.
        data_refinement: Refinements of the mesh used to synthesize data.
        correct_bias: Replace the restricted fine background by the
            inversion-mesh background, keeping only the fine inclusion effect.
    """

    n: int = Field(default=32, ge=2)
    dirichlet_sides: list[BoundarySide] = Field(
        default_factory=lambda: [BoundarySide.BOTTOM]
    )
    data_refinement: int = Field(default=1, ge=0)
    correct_bias: bool = True


class BackgroundConfig(StrictSchema):
    """Constant background Lame parameters."""

    lam: float = Field(default=1.0, gt=0.0)
    mu: float = Field(default=1.0, gt=0.0)


class BasisConfig(StrictSchema):
    """Boundary load basis block."""

    kind: Literal["edge-indicator"] = "edge-indicator"


class ReconstructionConfig(StrictSchema):
    """Test block.

    Attributes:
        tau: Threshold, or "calibrate" to derive it from background data.
        beta: Perturbation magnitude of inner and linearized tests.
        grid: Pixels per side of the reconstruction grid.
        mode: Inner test operator variant.
        sign: Inclusion sign for inner tests; derived from the phantom if unset.
        inequalities: Consulted half of outer tests.
        extreme_mode: Exact or truncated extreme test operators.
        truncation_eps: Truncation level of the truncated mode.
        channel: Access channel family of outer test sets.
        noise: Spectral norm of the additive symmetric data perturbation.
    """

    tau: float | Literal["calibrate"] = "calibrate"
    beta: float = Field(default=0.5, gt=0.0)
    grid: int = Field(default=16, ge=1)
    mode: OperatorMode = OperatorMode.FULL
    sign: InclusionSign | None = None
    inequalities: OuterInequality = OuterInequality.AUTO
    extreme_mode: ExtremeMode = ExtremeMode.EXACT
    truncation_eps: float = Field(default=1e-6, gt=0.0, lt=1.0)
    channel: ChannelMode = ChannelMode.NEAREST
    noise: float = Field(default=0.0, ge=0.0)

    @field_validator("tau")
    @classmethod
    def check_tau(cls, v: float | str) -> float | str:
        if isinstance(v, float) and v < 0.0:
            raise ValueError("tau must be non-negative")
        return v


class StudyConfig(StrictSchema):
    """Study block.

    Attributes:
        eps_ladder: Truncation levels of the convergence study.
        t_ladder: Step sizes of the derivative check.
        sigma: Regularizer of the localization pencil (default relative rule).
        top_k: Number of localized loads reported.
        probe: Set where energy should concentrate.
        window: Set outside which energy should vanish; must meet the Neumann boundary.
    """

    eps_ladder: list[float] = Field(default_factory=lambda: list(DEFAULT_EPS_LADDER))
    t_ladder: list[float] = Field(default_factory=lambda: list(DEFAULT_T_LADDER))
    sigma: float | None = None
    top_k: int = Field(default=5, ge=1)
    probe: Shape | None = None
    window: Shape | None = None


class ForwardConfig(StrictSchema):
    """Forward block.

    Attributes:
        traction: Constant traction vector.
        sides: Sides whose Neumann edges carry it (all Neumann edges if unset).
    """

    traction: Point = (0.0, 1.0)
    sides: list[BoundarySide] | None = None


class Scenario(StrictSchema):
    """Complete experiment description.

    Attributes:
        version: Config format version.
        mesh: Mesh block.
        background: Background parameters.
        inclusions: Phantom inclusions.
        basis: Load basis block.
        test: Test block.
        study: Study block.
        forward: Forward block.
        seed: Noise seed.
        output_dir: Default output directory.
    """

    version: Literal[1] = CONFIG_VERSION
    mesh: MeshConfig = Field(default_factory=MeshConfig)
    background: BackgroundConfig = Field(default_factory=BackgroundConfig)
    inclusions: list[InclusionConfig] = Field(default_factory=list)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    test: ReconstructionConfig = Field(default_factory=ReconstructionConfig)
    study: StudyConfig = Field(default_factory=StudyConfig)
    forward: ForwardConfig = Field(default_factory=ForwardConfig)
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    output_dir: str | None = None

    @model_validator(mode="after")
    def check_unique_ids(self) -> "Scenario":
        ids = [inc.id for inc in self.inclusions]
        if len(ids) != len(set(ids)):
            raise ValueError("inclusion ids must be unique")
        return self

    @property
    def region_specs(self) -> list[RegionSpec]:
        """Geometric specs of all inclusions."""
        return [inc.region_spec() for inc in self.inclusions]

    @property
    def has_extreme(self) -> bool:
        """Whether any inclusion is a cavity or rigid."""
        return any(inc.is_extreme for inc in self.inclusions)

    def background_only(self) -> "Scenario":
        """Copy of the scenario without inclusions."""
        return self.model_copy(update={"inclusions": []})

    def canonical_json(self) -> str:
        """Deterministic JSON form used for digests."""
        return self.model_dump_json()
