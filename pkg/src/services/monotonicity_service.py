"""Monotonicity service for Loewner-order tests.

This module provides the MonotonicityService class comparing measured
ND matrices against test operators built from the background field:
outer tests with extreme test sets, inner tests with perturbed probe
sets, and linearized outer tests built from stored background fields.
"""

import threading

import numpy as np
from scipy.linalg import eigh

from src.core.enums import ExtremeMode, OperatorMode, OuterInequality
from src.core.exceptions import (
    BasisMismatchError,
    MaterialError,
    ParameterRangeError,
    ValidationError,
)
from src.handlers.fem_handler import FemHandler
from src.handlers.material_handler import MaterialHandler
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import (
    BackgroundFields,
    BetaBounds,
    Displacement,
    EnergyBounds,
    LameField,
    LoewnerPair,
    LoewnerResult,
    NdMatrix,
    ReconstructionContext,
)
from src.utils.logging_utils import LoggerMixin


def loewner_min_eig(a: NdMatrix, b: NdMatrix) -> float:
    """Smallest eigenvalue of the symmetrized difference ``A - B``.

    Args:
        a: Left matrix.
        b: Right matrix.

    Returns:
        Smallest eigenvalue.

    Raises:
        BasisMismatchError: If the matrices use different bases.
        ValidationError: If the dimensions differ.
    """
    if a.fingerprint != b.fingerprint:
        raise BasisMismatchError(a.fingerprint, b.fingerprint, module="monotonicity")
    if a.values.shape != b.values.shape:
        raise ValidationError(
            f"Dimension mismatch {a.values.shape} vs {b.values.shape}",
            module="monotonicity",
        )
    diff = a.values - b.values
    diff = 0.5 * (diff + diff.T)
    return float(eigh(diff, eigvals_only=True, subset_by_index=[0, 0])[0])


class MonotonicityService(LoggerMixin):
    """Service class for monotonicity tests.

    The background ND matrix and the background element fields are
    computed once, on first use, and shared by every test.

    Attributes:
        context: Immutable reconstruction inputs.
        nd: ND map handler.
        materials: Material handler.
    """

    def __init__(
        self,
        context: ReconstructionContext,
        nd: NdMapHandler | None = None,
        materials: MaterialHandler | None = None,
    ) -> None:
        """Initialize the monotonicity service.

        Args:
            context: Reconstruction inputs.
            nd: ND map handler.
            materials: Material handler.
        """
        self.context = context
        self.nd = nd or NdMapHandler()
        self.materials = materials or MaterialHandler()
        self._lock = threading.Lock()
        self._background: tuple[NdMatrix, BackgroundFields] | None = None

    @property
    def fem(self) -> FemHandler:
        return self.nd.fem

    # -------------------------------------------------------------------------
    # Shared background data
    # -------------------------------------------------------------------------

    def _background_data(self) -> tuple[NdMatrix, BackgroundFields]:
        with self._lock:
            if self._background is None:
                ctx = self.context
                self._background = self.nd.background_fields(
                    ctx.mesh, ctx.background, ctx.basis, threads=ctx.threads
                )
            return self._background

    @property
    def background_nd(self) -> NdMatrix:
        """Background ND matrix."""
        return self._background_data()[0]

    @property
    def background_fields(self) -> BackgroundFields:
        """Stored background element fields of every basis load."""
        return self._background_data()[1]

    def gram(self, elements: np.ndarray) -> np.ndarray:
        """Energy Gram matrix ``int div div + 2 sym : sym`` over an element set."""
        return self.nd.region_gram(self.background_fields, elements)

    def interior_mask(self) -> np.ndarray:
        """Elements whose barycenter keeps the interior margin."""
        mesh = self.context.mesh
        c = mesh.barycenters
        lo, hi = mesh.margin, 1.0 - mesh.margin
        return np.all((c > lo) & (c < hi), axis=1)

    # -------------------------------------------------------------------------
    # Test operators
    # -------------------------------------------------------------------------

    def cavity_operator(self, elements: np.ndarray, threads: int | None = None) -> NdMatrix:
        """ND matrix of the background with ``elements`` as a cavity."""
        field = self.materials.from_masks(
            self.context.background, cavity=elements, provenance="test:cavity"
        )
        return self._extreme_operator(field, threads)

    def rigid_operator(self, elements: np.ndarray, threads: int | None = None) -> NdMatrix:
        """ND matrix of the background with ``elements`` rigid."""
        field = self.materials.from_masks(
            self.context.background, rigid=elements, provenance="test:rigid"
        )
        return self._extreme_operator(field, threads)

    def _extreme_operator(self, field: LameField, threads: int | None) -> NdMatrix:
        ctx = self.context
        if ctx.extreme_mode == ExtremeMode.TRUNCATED:
            field = self.materials.truncate_extreme(field, ctx.truncation_eps)
        return self.nd.assemble_nd_matrix(
            ctx.mesh, field, ctx.basis, threads=threads or ctx.threads
        )

    def compare(self, a: NdMatrix, b: NdMatrix) -> LoewnerResult:
        """Loewner comparison ``A >= B`` under the context threshold."""
        return LoewnerResult(min_eig=loewner_min_eig(a, b), tau=self.context.tau)

    # -------------------------------------------------------------------------
    # Tests
    # -------------------------------------------------------------------------

    def outer_test(
        self,
        measured: NdMatrix,
        elements: np.ndarray,
        threads: int | None = None,
    ) -> LoewnerPair:
        """Test whether a set contains every inclusion.

        Compares ``L(cavity C) >= measured`` (upper) and
        ``measured >= L(rigid C)`` (lower); only the configured sides are
        assembled.

        Args:
            measured: Measured ND matrix.
            elements: Boolean element mask of the test set.
            threads: Parallel map width of the column solves.

        Returns:
            Pair of Loewner results.
        """
        self._check_test_set(elements, "outer test set")
        upper = lower = None
        if self._consult_upper():
            upper = self.compare(self.cavity_operator(elements, threads), measured)
        if self._consult_lower():
            lower = self.compare(measured, self.rigid_operator(elements, threads))
        pair = LoewnerPair(upper=upper, lower=lower)
        self.logger.debug("Outer test", indicators=pair.indicators, holds=pair.holds)
        return pair

    def inner_test_pos(
        self,
        measured: NdMatrix,
        elements: np.ndarray,
        beta: float,
        mode: OperatorMode = OperatorMode.FULL,
        threads: int | None = None,
    ) -> LoewnerResult:
        """Test whether a probe set lies inside a rigid inclusion.

        Compares ``L(lam0 + beta, mu0 + beta on B) >= measured``, or its
        linearization ``L0 + DL(beta, B)``.

        Args:
            measured: Measured ND matrix.
            elements: Boolean element mask of the probe set.
            beta: Shift magnitude.
            mode: Full or linearized test operator.
            threads: Parallel map width of the column solves.

        Returns:
            Loewner result.

        Raises:
            ParameterRangeError: If beta leaves the admissible range of the mode.
        """
        self._check_test_set(elements, "probe set")
        self.check_beta(beta, strict_kappa=mode == OperatorMode.LINEARIZED)
        test = self._inner_operator(elements, beta, mode, threads)
        return self.compare(test, measured)

    def inner_test_neg(
        self,
        measured: NdMatrix,
        elements: np.ndarray,
        beta: float,
        mode: OperatorMode = OperatorMode.FULL,
        threads: int | None = None,
    ) -> LoewnerResult:
        """Test whether a probe set lies inside a cavity.

        Compares ``measured >= L(lam0 - beta, mu0 - beta on B)``, or its
        linearization ``L0 + DL(-beta, B)``.

        Args:
            measured: Measured ND matrix.
            elements: Boolean element mask of the probe set.
            beta: Shift magnitude, ``0 < beta < kappa``.
            mode: Full or linearized test operator.
            threads: Parallel map width of the column solves.

        Returns:
            Loewner result.
        """
        self._check_test_set(elements, "probe set")
        self.check_beta(beta, strict_kappa=True)
        test = self._inner_operator(elements, -beta, mode, threads)
        return self.compare(measured, test)

    def _inner_operator(
        self,
        elements: np.ndarray,
        shift: float,
        mode: OperatorMode,
        threads: int | None,
    ) -> NdMatrix:
        ctx = self.context
        if mode == OperatorMode.LINEARIZED:
            l0 = self.background_nd
            return l0.with_values(
                l0.values - shift * self.gram(elements),
                provenance=f"test:linearized(beta={shift:g})",
            )
        field = self.materials.perturbed(
            ctx.background, elements, shift, provenance=f"test:perturbed(beta={shift:g})"
        )
        return self.nd.assemble_nd_matrix(
            ctx.mesh, field, ctx.basis, threads=threads or ctx.threads
        )

    def linearized_outer_test(
        self,
        measured: NdMatrix,
        elements: np.ndarray,
        beta: float,
        bounds: BetaBounds,
        gram: np.ndarray | None = None,
    ) -> LoewnerPair:
        """Linearized outer test.

        Compares ``L0 + DL(-beta_U beta, C) >= measured`` (upper) and
        ``measured >= L0 + DL(beta, C)`` (lower). No forward solves beyond
        the shared background ones.

        Args:
            measured: ND matrix of a non-extreme field.
            elements: Boolean element mask of the test set.
            beta: Validated contrast bound.
            bounds: Background bounds.
            gram: Precomputed energy Gram matrix of the test set.

        Returns:
            Pair of Loewner results.
        """
        if beta <= 0.0:
            raise ParameterRangeError("beta", beta, "beta > 0", module="monotonicity")
        self._check_test_set(elements, "outer test set")
        g = self.gram(elements) if gram is None else gram
        l0 = self.background_nd
        upper = lower = None
        if self._consult_upper():
            test = l0.with_values(l0.values + bounds.beta_U * beta * g, "test:linearized-upper")
            upper = self.compare(test, measured)
        if self._consult_lower():
            test = l0.with_values(l0.values - beta * g, "test:linearized-lower")
            lower = self.compare(measured, test)
        return LoewnerPair(upper=upper, lower=lower)

    # -------------------------------------------------------------------------
    # Energy bounds
    # -------------------------------------------------------------------------

    def background_bounds(self, field_1: LameField, field_2: LameField, k: int) -> EnergyBounds:
        """Two-sided energy bounds of ``<(L(field_2) - L(field_1)) g_k, g_k>``.

        Args:
            field_1: First field.
            field_2: Second field with the same extreme part.
            k: Basis load index.

        Returns:
            Value with lower and upper bounds.

        Raises:
            MaterialError: If the extreme parts differ.
        """
        if not np.array_equal(field_1.state, field_2.state):
            raise MaterialError("Fields must share their extreme part")
        u1 = self._solve(field_1, k)
        u2 = self._solve(field_2, k)
        g = self.context.basis.edge_values(k)
        value = self.fem.boundary_work(u2, g) - self.fem.boundary_work(u1, g)

        finite = field_1.finite_mask
        fields = self.fem.element_fields(u2, finite)
        area = self.context.mesh.areas[finite]
        d = fields.divergence[finite] ** 2
        s = np.sum(fields.sym_grad[finite] ** 2, axis=(1, 2))
        lam1, lam2 = field_1.lam[finite], field_2.lam[finite]
        mu1, mu2 = field_1.mu[finite], field_2.mu[finite]
        upper = float(np.sum(area * ((lam1 - lam2) * d + 2.0 * (mu1 - mu2) * s)))
        lower = float(
            np.sum(
                area
                * ((lam2 / lam1) * (lam1 - lam2) * d + 2.0 * (mu2 / mu1) * (mu1 - mu2) * s)
            )
        )
        return EnergyBounds(value=value, lower=lower, upper=upper)

    def rigid_bounds(self, elements: np.ndarray, k: int) -> EnergyBounds:
        """Lower energy bound of ``<(L0 - L(rigid C)) g_k, g_k>``.

        Args:
            elements: Boolean element mask of the rigid set.
            k: Basis load index.

        Returns:
            Value with its lower bound.
        """
        background = self.context.background
        rigid = self.materials.from_masks(background, rigid=elements)
        g = self.context.basis.edge_values(k)
        u0 = self._solve(background, k)
        ur = self._solve(rigid, k)
        value = self.fem.boundary_work(u0, g) - self.fem.boundary_work(ur, g)
        lower = sum(self.fem.energy_on_region(u0, background, elements))
        return EnergyBounds(value=value, lower=lower)

    def cavity_bounds(self, elements: np.ndarray, k: int) -> EnergyBounds:
        """Energy bounds of ``<(L(cavity C) - L0) g_k, g_k>``.

        The upper bound integrates the extension of the cavity solution.

        Args:
            elements: Boolean element mask of the cavity.
            k: Basis load index.

        Returns:
            Value with lower and upper bounds.
        """
        background = self.context.background
        cavity = self.materials.from_masks(background, cavity=elements)
        g = self.context.basis.edge_values(k)
        u0 = self._solve(background, k)
        uc = self._solve(cavity, k)
        value = self.fem.boundary_work(uc, g) - self.fem.boundary_work(u0, g)
        lower = sum(self.fem.energy_on_region(u0, background, elements))
        extended = self.fem.extend_E(self.context.mesh, cavity, uc)
        upper = sum(self.fem.energy_on_region(extended, background, elements))
        return EnergyBounds(value=value, lower=lower, upper=upper)

    # -------------------------------------------------------------------------
    # Internals
    # -------------------------------------------------------------------------

    def _solve(self, field: LameField, k: int) -> Displacement:
        system = self.fem.assemble_system(self.context.mesh, field)
        return self.fem.solve_neumann(system, self.context.basis.edge_values(k))

    def _consult_upper(self) -> bool:
        return self.context.inequalities != OuterInequality.LOWER

    def _consult_lower(self) -> bool:
        return self.context.inequalities != OuterInequality.UPPER

    def _check_test_set(self, elements: np.ndarray, name: str) -> None:
        if not np.any(elements):
            raise ValidationError(f"The {name} is empty", module="monotonicity")
        if np.any(elements & ~self.interior_mask()):
            raise ValidationError(
                f"The {name} must keep the interior margin", module="monotonicity"
            )

    def check_beta(self, beta: float, strict_kappa: bool) -> None:
        """Reject beta outside (0, inf), or outside (0, kappa) when strict."""
        if beta <= 0.0:
            raise ParameterRangeError("beta", beta, "beta > 0", module="monotonicity")
        kappa = self.materials.beta_bounds(self.context.background).kappa
        if strict_kappa and beta >= kappa:
            raise ParameterRangeError(
                "beta",
                beta,
                f"0 < beta < kappa = min(inf lam0, inf mu0) = {kappa:g}",
                module="monotonicity",
            )
