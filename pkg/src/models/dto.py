"""Data Transfer Objects for internal data conversion.

This module defines the value objects passed between handlers and
services: meshes, material fields, discrete systems, displacements,
ND matrices and the result types of tests and studies. Array fields are
made read-only on construction so values can be shared across worker
threads.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np
from scipy import sparse

from src.core.constants import BACKGROUND_REGION
from src.core.enums import (
    CalibrationFamily,
    ExtremeMode,
    InclusionKind,
    OuterInequality,
    ChannelMode,
)

STATE_CODES: dict[InclusionKind, int] = {
    InclusionKind.FINITE: 0,
    InclusionKind.CAVITY: 1,
    InclusionKind.RIGID: 2,
}


def _freeze(*arrays: np.ndarray) -> None:
    for array in arrays:
        array.setflags(write=False)


# =============================================================================
# Mesh
# =============================================================================


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation of the unit square.

    Attributes:
        nodes: Node coordinates, shape ``(N, 2)``.
        elements: Counterclockwise node triples, shape ``(M, 3)``.
        boundary_edges: Boundary node pairs, shape ``(E, 2)``.
        edge_dirichlet: Per boundary edge, True for Dirichlet, False for Neumann.
        element_region: Per element, index into ``region_ids``.
        region_ids: Region identifiers; index 0 is the background.
        spacing: Grid spacing, the width of one element layer.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    edge_dirichlet: np.ndarray
    element_region: np.ndarray
    region_ids: tuple[str, ...] = (BACKGROUND_REGION,)
    spacing: float = 0.5

    def __post_init__(self) -> None:
        _freeze(
            self.nodes,
            self.elements,
            self.boundary_edges,
            self.edge_dirichlet,
            self.element_region,
        )

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def margin(self) -> float:
        """Interior margin kept free of inclusions and test sets."""
        return self.spacing

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.elements]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        _freeze(areas)
        return areas

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def barycenters(self) -> np.ndarray:
        centers = self.nodes[self.elements].mean(axis=1)
        _freeze(centers)
        return centers

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three P1 hat functions per element, shape ``(M, 3, 2)``."""
        p = self.nodes[self.elements]
        x, y = p[:, :, 0], p[:, :, 1]
        two_area = 2.0 * self.signed_areas
        grads = np.empty((self.n_elements, 3, 2))
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            grads[:, a, 0] = (y[:, b] - y[:, c]) / two_area
            grads[:, a, 1] = (x[:, c] - x[:, b]) / two_area
        _freeze(grads)
        return grads

    @cached_property
    def h(self) -> float:
        """Maximum element diameter."""
        p = self.nodes[self.elements]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return float(lengths.max())

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.boundary_edges]
        lengths = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        _freeze(lengths)
        return lengths

    @cached_property
    def neumann_edges(self) -> np.ndarray:
        """Indices of Neumann boundary edges, in boundary-edge order."""
        idx = np.flatnonzero(~self.edge_dirichlet)
        _freeze(idx)
        return idx

    @cached_property
    def dirichlet_nodes(self) -> np.ndarray:
        """Boolean node mask of nodes on a Dirichlet edge."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_edges[self.edge_dirichlet].ravel()] = True
        _freeze(mask)
        return mask

    def region_index(self, region_id: str) -> int:
        return self.region_ids.index(region_id)

    def region_mask(self, region_id: str) -> np.ndarray:
        """Boolean element mask of one region."""
        if region_id not in self.region_ids:
            return np.zeros(self.n_elements, dtype=bool)
        return self.element_region == self.region_index(region_id)


# =============================================================================
# Materials
# =============================================================================


@dataclass(frozen=True)
class MaterialState:
    """State assigned to a region.

    Attributes:
        kind: Finite, cavity or rigid.
        lam: First Lame parameter (finite only).
        mu: Shear modulus (finite only).
    """

    kind: InclusionKind
    lam: float | None = None
    mu: float | None = None

    @classmethod
    def finite(cls, lam: float, mu: float) -> "MaterialState":
        return cls(InclusionKind.FINITE, float(lam), float(mu))

    @classmethod
    def cavity(cls) -> "MaterialState":
        return cls(InclusionKind.CAVITY)

    @classmethod
    def rigid(cls) -> "MaterialState":
        return cls(InclusionKind.RIGID)


@dataclass(frozen=True, eq=False)
class LameField:
    """Per-element Lame parameters with extreme states.

    Attributes:
        mesh: Mesh the field lives on.
        state: Per element state code (see ``STATE_CODES``).
        lam: First Lame parameter; 0 on cavity, inf on rigid elements.
        mu: Shear modulus; 0 on cavity, inf on rigid elements.
        lam0: Background first Lame parameter.
        mu0: Background shear modulus.
        provenance: Human-readable origin tag.
    """

    mesh: Mesh
    state: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    lam0: np.ndarray
    mu0: np.ndarray
    provenance: str = "field"

    def __post_init__(self) -> None:
        _freeze(self.state, self.lam, self.mu, self.lam0, self.mu0)

    @property
    def finite_mask(self) -> np.ndarray:
        return self.state == STATE_CODES[InclusionKind.FINITE]

    @property
    def cavity_mask(self) -> np.ndarray:
        return self.state == STATE_CODES[InclusionKind.CAVITY]

    @property
    def rigid_mask(self) -> np.ndarray:
        return self.state == STATE_CODES[InclusionKind.RIGID]

    @property
    def has_extreme(self) -> bool:
        return bool(np.any(~self.finite_mask))

    @property
    def has_cavity(self) -> bool:
        return bool(np.any(self.cavity_mask))

    @property
    def ucp_verified(self) -> bool:
        """Whether the background is constant."""
        return bool(np.ptp(self.lam0) == 0.0 and np.ptp(self.mu0) == 0.0)

    def with_provenance(self, provenance: str) -> "LameField":
        return replace(self, provenance=provenance)


@dataclass(frozen=True)
class BetaBounds:
    """Background parameter bounds.

    Attributes:
        beta_L: Smallest background parameter.
        beta_U: Largest background parameter.
    """

    beta_L: float
    beta_U: float

    def __post_init__(self) -> None:
        if not 0.0 < self.beta_L <= self.beta_U:
            raise ValueError("bounds must satisfy 0 < beta_L <= beta_U")

    @property
    def kappa(self) -> float:
        """Strict upper bound on beta for the inner tests."""
        return self.beta_L


@dataclass(frozen=True)
class LinearizedBoundsReport:
    """Outcome of the contrast check for linearized outer tests.

    Attributes:
        beta: Contrast bound that was checked.
        sup_increase: Largest increase of either parameter over the background.
        inf_decrease: Smallest (most negative) change of either parameter.
        decrease_limit: Admissible lower limit of ``inf_decrease``.
        violations: Messages naming each violated inequality.
    """

    beta: float
    sup_increase: float
    inf_decrease: float
    decrease_limit: float
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


# =============================================================================
# Finite Elements
# =============================================================================


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Reduced stiffness system of one field.

    Attributes:
        mesh: Mesh.
        field: Lame field the system was assembled for.
        stiffness: Full stiffness matrix over all ``2N`` nodal unknowns.
        transform: Map from reduced coordinates to nodal unknowns, ``(2N, n)``.
        reduced: ``transform.T @ stiffness @ transform`` in CSC format.
        factor: Sparse LU factorization of ``reduced`` (None when unavailable).
        rigid_components: Node index arrays, one per rigid component.
        removed_nodes: Nodes without unknowns (cavity interiors).
    """

    mesh: Mesh
    field: LameField
    stiffness: sparse.csr_matrix
    transform: sparse.csr_matrix
    reduced: sparse.csc_matrix
    factor: Any
    rigid_components: tuple[np.ndarray, ...]
    removed_nodes: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.reduced.shape[0])


@dataclass(frozen=True, eq=False)
class Displacement:
    """Nodal displacement.

    Attributes:
        mesh: Mesh.
        nodal: Nodal vectors, shape ``(N, 2)``; NaN where undefined.
        defined_elements: Elements whose three nodes carry values.
        rigid_elements: Elements constrained to rigid motions.
        extended: Whether cavity interiors were filled by extension.
    """

    mesh: Mesh
    nodal: np.ndarray
    defined_elements: np.ndarray
    rigid_elements: np.ndarray
    extended: bool = False

    def __post_init__(self) -> None:
        _freeze(self.nodal, self.defined_elements, self.rigid_elements)


@dataclass(frozen=True, eq=False)
class ElementFields:
    """Per-element divergence and symmetric gradient.

    Attributes:
        divergence: Shape ``(M,)``.
        sym_grad: Symmetric gradients, shape ``(M, 2, 2)``.
    """

    divergence: np.ndarray
    sym_grad: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self.divergence, self.sym_grad)


@dataclass(frozen=True, eq=False)
class BackgroundFields:
    """Stored element fields of the background solutions of every basis load.

    Attributes:
        fingerprint: Load basis fingerprint.
        divergence: Shape ``(m, M)``.
        strain: Symmetric gradient components ``[e11, e22, sqrt(2) e12]``,
            shape ``(m, M, 3)``; the Euclidean product equals the Frobenius one.
        areas: Element areas.
    """

    fingerprint: str
    divergence: np.ndarray
    strain: np.ndarray
    areas: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self.divergence, self.strain)

    @property
    def size(self) -> int:
        return int(self.divergence.shape[0])


# =============================================================================
# ND Maps
# =============================================================================


@dataclass(frozen=True, eq=False)
class LoadBasis:
    """Orthonormal per-edge indicator loads on the Neumann boundary.

    Load ``k`` acts on Neumann edge ``k // 2`` in direction ``k % 2`` with
    magnitude ``length ** -0.5``.

    Attributes:
        edges: Boundary-edge indices of the supporting Neumann edges.
        endpoints: Edge endpoint coordinates, shape ``(K, 2, 2)``.
        lengths: Edge lengths.
        fingerprint: Content digest of the Neumann boundary and construction.
    """

    edges: np.ndarray
    endpoints: np.ndarray
    lengths: np.ndarray
    fingerprint: str

    def __post_init__(self) -> None:
        _freeze(self.edges, self.endpoints, self.lengths)

    @property
    def size(self) -> int:
        return 2 * int(self.edges.shape[0])

    def edge_values(self, k: int) -> np.ndarray:
        """Per-edge traction vectors of load ``k``, shape ``(K, 2)``."""
        values = np.zeros((self.edges.shape[0], 2))
        values[k // 2, k % 2] = 1.0 / np.sqrt(self.lengths[k // 2])
        return values

    def gram(self) -> np.ndarray:
        """L2 Gram matrix of the basis."""
        magnitudes = 1.0 / np.sqrt(self.lengths)
        return np.diag(np.repeat(self.lengths * magnitudes**2, 2))


@dataclass(frozen=True, eq=False)
class NdMatrix:
    """ND operator matrix in a load basis.

    Attributes:
        values: Symmetric matrix, shape ``(m, m)``.
        fingerprint: Load basis fingerprint.
        provenance: Field or test operator that produced it.
        asymmetry: Relative asymmetry before symmetrization.
    """

    values: np.ndarray
    fingerprint: str
    provenance: str = "nd"
    asymmetry: float = 0.0

    def __post_init__(self) -> None:
        _freeze(self.values)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    @property
    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.values, 2))

    def with_values(self, values: np.ndarray, provenance: str) -> "NdMatrix":
        return NdMatrix(values=values, fingerprint=self.fingerprint, provenance=provenance)


# =============================================================================
# Monotonicity Tests
# =============================================================================


@dataclass(frozen=True)
class LoewnerResult:
    """Outcome of one Loewner comparison.

    Attributes:
        min_eig: Smallest eigenvalue of the symmetrized difference.
        tau: Threshold used.
    """

    min_eig: float
    tau: float

    @property
    def holds(self) -> bool:
        return self.min_eig >= -self.tau


@dataclass(frozen=True)
class LoewnerPair:
    """Two-sided test outcome; an unconsulted side is None.

    Attributes:
        upper: Test operator above the measured matrix.
        lower: Measured matrix above the test operator.
    """

    upper: LoewnerResult | None
    lower: LoewnerResult | None

    @property
    def holds(self) -> bool:
        return all(r.holds for r in (self.upper, self.lower) if r is not None)

    @property
    def indicators(self) -> tuple[float, float]:
        """``(upper, lower)`` min-eigenvalues, NaN where unconsulted."""
        return tuple(  # type: ignore[return-value]
            np.nan if r is None else r.min_eig for r in (self.upper, self.lower)
        )


@dataclass(frozen=True)
class EnergyBounds:
    """Quadratic form of an ND difference between two energy integrals.

    Attributes:
        value: ``<(L_2 - L_1) g, g>``.
        lower: Lower energy bound.
        upper: Upper energy bound (inf when only a lower bound applies).
    """

    value: float
    lower: float
    upper: float = float("inf")

    def holds(self, rtol: float = 1e-9) -> bool:
        scale = max(abs(self.value), abs(self.lower), 1e-300)
        if np.isfinite(self.upper):
            scale = max(scale, abs(self.upper))
        slack = rtol * scale
        return self.lower - slack <= self.value <= self.upper + slack


@dataclass(frozen=True, eq=False)
class ReconstructionContext:
    """Immutable inputs shared by every test of one reconstruction.

    Attributes:
        mesh: Inversion mesh.
        background: Background field on the inversion mesh.
        basis: Load basis of the inversion mesh.
        tau: Threshold.
        inequalities: Consulted half of outer tests (never ``AUTO``).
        extreme_mode: Exact or truncated extreme operators.
        truncation_eps: Truncation level of the truncated mode.
        channel: Access channel family of outer test sets.
        threads: Parallel map width.
    """

    mesh: Mesh
    background: LameField
    basis: LoadBasis
    tau: float = 0.0
    inequalities: OuterInequality = OuterInequality.BOTH
    extreme_mode: ExtremeMode = ExtremeMode.EXACT
    truncation_eps: float = 1e-6
    channel: ChannelMode = ChannelMode.NEAREST
    threads: int = 1

    def with_tau(self, tau: float) -> "ReconstructionContext":
        return replace(self, tau=float(tau))


# =============================================================================
# Reconstruction
# =============================================================================


@dataclass(frozen=True, eq=False)
class PixelGrid:
    """Square pixel partition of the margin-clipped domain.

    Pixel ``k`` sits in column ``k % p`` and row ``k // p`` counted from
    the bottom-left.

    Attributes:
        p: Pixels per side.
        lo: Lower clip bound.
        hi: Upper clip bound.
        element_pixel: Pixel of every element, -1 outside the clipped domain.
    """

    p: int
    lo: float
    hi: float
    element_pixel: np.ndarray

    def __post_init__(self) -> None:
        _freeze(self.element_pixel)

    @property
    def n_pixels(self) -> int:
        return self.p * self.p

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.p

    @cached_property
    def centers(self) -> np.ndarray:
        k = np.arange(self.n_pixels)
        cx = self.lo + (k % self.p + 0.5) * self.width
        cy = self.lo + (k // self.p + 0.5) * self.width
        return np.column_stack([cx, cy])

    @property
    def clipped_mask(self) -> np.ndarray:
        return self.element_pixel >= 0

    def pixel_bounds(self, k: int) -> tuple[float, float, float, float]:
        col, row = k % self.p, k // self.p
        w = self.width
        return (
            self.lo + col * w,
            self.lo + row * w,
            self.lo + (col + 1) * w,
            self.lo + (row + 1) * w,
        )

    def elements_of(self, pixels: list[int] | np.ndarray) -> np.ndarray:
        """Boolean element mask of a set of pixels."""
        return np.isin(self.element_pixel, np.asarray(pixels, dtype=int))


@dataclass(frozen=True, eq=False)
class IndicatorMap:
    """Per-pixel test outcomes.

    Attributes:
        family: Test family that produced the map.
        grid: Pixel grid.
        indicators: Min-eigenvalues per pixel, shape ``(P, 2)`` for two-sided
            families (NaN where unconsulted) and ``(P, 1)`` for inner tests.
        tau: Threshold.
        provenance: Description of data and test settings.
    """

    family: CalibrationFamily
    grid: PixelGrid
    indicators: np.ndarray
    tau: float
    provenance: str = ""

    def __post_init__(self) -> None:
        _freeze(self.indicators)

    @property
    def verdicts(self) -> np.ndarray:
        """Per pixel, whether every consulted inequality holds."""
        ok = np.isnan(self.indicators) | (self.indicators >= -self.tau)
        return np.all(ok, axis=1)

    @property
    def mask(self) -> np.ndarray:
        """Reconstructed pixels."""
        if self.family == CalibrationFamily.INNER:
            return self.verdicts
        return ~self.verdicts

    @property
    def scores(self) -> np.ndarray:
        """Smallest consulted indicator per pixel."""
        filled = np.where(np.isnan(self.indicators), np.inf, self.indicators)
        worst = filled.min(axis=1)
        return np.where(np.isinf(worst), 0.0, worst)

    def with_tau(self, tau: float) -> "IndicatorMap":
        return replace(self, tau=float(tau))


# =============================================================================
# Experiments
# =============================================================================


@dataclass(frozen=True)
class CalibrationResult:
    """Calibrated threshold.

    Attributes:
        family: Test family calibrated.
        tau: Resulting threshold.
        worst_min_eig: Most negative min-eigenvalue over the family.
        floor: Relative floor that applied.
        noise: Added noise level.
    """

    family: CalibrationFamily
    tau: float
    worst_min_eig: float
    floor: float
    noise: float = 0.0


@dataclass(frozen=True)
class StudyReport:
    """Convergence table with fitted log-log slope.

    Attributes:
        parameters: Truncation levels.
        errors: Spectral-norm operator errors.
        strain_errors: Strain-norm displacement errors of the first load.
        slope: Fitted slope of log10 error against log10 parameter.
        intercept: Fitted intercept.
        residual: RMS least-squares residual of the fit.
        min_slope: Required slope.
        max_residual: Admissible residual.
    """

    parameters: tuple[float, ...]
    errors: tuple[float, ...]
    strain_errors: tuple[float, ...]
    slope: float
    intercept: float
    residual: float
    min_slope: float
    max_residual: float

    @property
    def passed(self) -> bool:
        return self.slope >= self.min_slope and self.residual <= self.max_residual


@dataclass(frozen=True)
class DerivativeCheck:
    """Finite-difference check of the Frechet derivative.

    Attributes:
        steps: Step sizes ``t``.
        remainders: ``r(t)`` for every step.
        halved: ``r(t / 2)`` for every step.
    """

    steps: tuple[float, ...]
    remainders: tuple[float, ...]
    halved: tuple[float, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        """``r(t) / r(t / 2)``; close to 4 for a quadratic remainder."""
        return tuple(r / h for r, h in zip(self.remainders, self.halved))


@dataclass(frozen=True, eq=False)
class LocalizedPotentials:
    """Loads concentrating energy in a probe set.

    Attributes:
        loads: Coefficient vectors in the load basis, shape ``(k, m)``, unit norm.
        ratios: Combined energy ratios, descending.
        divergence_ratios: Divergence-only energy ratios.
        sigma: Regularizer of the pencil.
        probe_gram: Gram matrix of the probe set.
        exterior_gram: Gram matrix outside the window.
    """

    loads: np.ndarray
    ratios: np.ndarray
    divergence_ratios: np.ndarray
    sigma: float
    probe_gram: np.ndarray = field(repr=False)
    exterior_gram: np.ndarray = field(repr=False)

    @property
    def best_ratio(self) -> float:
        return float(self.ratios[0])
