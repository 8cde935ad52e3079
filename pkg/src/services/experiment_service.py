"""Experiment service for calibration and numerical studies.

This module provides the ExperimentService class: threshold calibration
on background-only data, the truncation convergence study, the
finite-difference check of the Frechet derivative, and the localized
potentials demonstrator.
"""

import numpy as np
from scipy.linalg import eigh

from src.core.config import Settings, get_settings
from src.core.constants import (
    CONVERGENCE_MAX_RESIDUAL,
    CONVERGENCE_MIN_SLOPE,
    MIN_LADDER_DECADES,
    MIN_LADDER_POINTS,
    SIGMA_RELATIVE,
    TAU_CALIBRATION_FACTOR,
)
from src.core.enums import CalibrationFamily
from src.core.exceptions import ParameterRangeError, ValidationError
from src.handlers.fem_handler import FemHandler
from src.handlers.material_handler import MaterialHandler
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import (
    CalibrationResult,
    DerivativeCheck,
    LoadBasis,
    LocalizedPotentials,
    Mesh,
    StudyReport,
)
from src.models.schemas import Scenario, Shape
from src.services.monotonicity_service import MonotonicityService, loewner_min_eig
from src.services.reconstruction_service import ReconstructionService, build_pixel_grid
from src.services.scenario_service import ScenarioService
from src.utils.logging_utils import LoggerMixin
from src.utils.parallel_utils import ordered_map


class ExperimentService(LoggerMixin):
    """Service class for experiments.

    Attributes:
        scenarios: Scenario service providing pipeline objects.
        settings: Process settings.
    """

    def __init__(
        self,
        scenarios: ScenarioService | None = None,
        settings: Settings | None = None,
    ) -> None:
        """Initialize the experiment service.

        Args:
            scenarios: Scenario service.
            settings: Process settings.
        """
        self.settings = settings or get_settings()
        self.scenarios = scenarios or ScenarioService(self.settings)

    @property
    def nd(self) -> NdMapHandler:
        return self.scenarios.nd

    @property
    def fem(self) -> FemHandler:
        return self.scenarios.nd.fem

    @property
    def materials(self) -> MaterialHandler:
        return self.scenarios.materials

    def monotonicity_service(
        self,
        scenario: Scenario,
        mesh: Mesh,
        basis: LoadBasis,
        tau: float = 0.0,
        threads: int | None = None,
    ) -> MonotonicityService:
        context = self.scenarios.context(scenario, mesh, basis, tau=tau, threads=threads)
        return MonotonicityService(context, nd=self.nd, materials=self.materials)

    # -------------------------------------------------------------------------
    # Calibration
    # -------------------------------------------------------------------------

    def calibrate_tau(
        self,
        scenario: Scenario,
        family: CalibrationFamily = CalibrationFamily.OUTER,
        threads: int | None = None,
    ) -> CalibrationResult:
        """Calibrate the threshold on background-only data.

        Outer families run their own tests against background data. Inner
        tests compare the background model with background data in both
        orders. The result is ``max(2 |worst|, floor) + noise``.

        Args:
            scenario: Scenario; its inclusions are ignored for the data.
            family: Test family to calibrate.
            threads: Parallel map width.

        Returns:
            Calibration result.
        """
        mesh = self.scenarios.build_mesh(scenario)
        basis = self.nd.build_load_basis(mesh)
        mono = self.monotonicity_service(scenario, mesh, basis, threads=threads)
        l0 = mono.background_nd
        data = self.scenarios.measured_data(
            scenario.background_only(), mesh, basis, threads, noise=False, background=l0
        )

        if family == CalibrationFamily.INNER:
            worst = min(loewner_min_eig(l0, data), loewner_min_eig(data, l0))
        else:
            recon = ReconstructionService(mono)
            grid = build_pixel_grid(mesh, scenario.test.grid)
            if family == CalibrationFamily.OUTER:
                result = recon.outer_reconstruction(data, grid)
            else:
                bounds = self.materials.beta_bounds(mono.context.background)
                result = recon.linearized_outer_reconstruction(
                    data, grid, scenario.test.beta, bounds
                )
            worst = float(np.nanmin(result.indicators))

        floor = self.settings.tau_floor_rel * l0.norm
        noise = scenario.test.noise
        tau = max(TAU_CALIBRATION_FACTOR * max(-worst, 0.0), floor) + noise
        self.logger.info(
            "Threshold calibrated",
            family=family.value,
            tau=tau,
            worst_min_eig=worst,
            floor=floor,
            noise=noise,
        )
        return CalibrationResult(
            family=family, tau=tau, worst_min_eig=worst, floor=floor, noise=noise
        )

    # -------------------------------------------------------------------------
    # Convergence study
    # -------------------------------------------------------------------------

    def run_convergence_study(
        self, scenario: Scenario, threads: int | None = None
    ) -> StudyReport:
        """Compare exact extreme ND matrices with truncated ones over a ladder.

        Args:
            scenario: Scenario with at least one extreme inclusion.
            threads: Parallel map width.

        Returns:
            Report with errors and the fitted log-log slope.

        Raises:
            ValidationError: Without extreme inclusions or with a short ladder.
        """
        if not scenario.has_extreme:
            raise ValidationError(
                "Convergence study needs an extreme inclusion", module="experiments"
            )
        ladder = sorted(scenario.study.eps_ladder, reverse=True)
        self._check_ladder(ladder)

        mesh = self.scenarios.build_mesh(scenario)
        basis = self.nd.build_load_basis(mesh)
        field = self.scenarios.phantom_field(scenario, mesh)
        width = threads or self.settings.threads
        exact = self.nd.assemble_nd_matrix(mesh, field, basis, threads=width)

        g0 = basis.edge_values(0)
        u = self.fem.solve_neumann(self.fem.assemble_system(mesh, field), g0)
        reference = self.fem.element_fields(self.fem.extend_E(mesh, field, u)).sym_grad

        def point(eps: float) -> tuple[float, float]:
            truncated = self.materials.truncate_extreme(field, eps)
            nd_eps = self.nd.assemble_nd_matrix(mesh, truncated, basis, threads=1)
            error = float(np.linalg.norm(exact.values - nd_eps.values, 2))
            u_eps = self.fem.solve_neumann(self.fem.assemble_system(mesh, truncated), g0)
            diff = self.fem.element_fields(u_eps).sym_grad - reference
            strain_error = float(np.sqrt(np.sum(mesh.areas * np.sum(diff**2, axis=(1, 2)))))
            return error, strain_error

        results = ordered_map(point, ladder, width)
        errors = np.array([r[0] for r in results])
        if np.any(errors <= 0.0):
            raise ValidationError(
                "Truncated and exact operators coincide", module="experiments"
            )
        x, y = np.log10(ladder), np.log10(errors)
        slope, intercept = np.polyfit(x, y, 1)
        residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
        report = StudyReport(
            parameters=tuple(float(e) for e in ladder),
            errors=tuple(float(e) for e in errors),
            strain_errors=tuple(r[1] for r in results),
            slope=float(slope),
            intercept=float(intercept),
            residual=residual,
            min_slope=CONVERGENCE_MIN_SLOPE,
            max_residual=CONVERGENCE_MAX_RESIDUAL,
        )
        self.logger.info(
            "Convergence study finished",
            slope=report.slope,
            residual=report.residual,
            passed=report.passed,
        )
        return report

    def _check_ladder(self, ladder: list[float]) -> None:
        if len(ladder) < MIN_LADDER_POINTS:
            raise ValidationError(
                f"Ladder has {len(ladder)} points, needs at least {MIN_LADDER_POINTS}",
                module="experiments",
            )
        if any(not 0.0 < e < 1.0 for e in ladder):
            raise ValidationError("Ladder values must lie in (0, 1)", module="experiments")
        decades = float(np.log10(max(ladder) / min(ladder)))
        if decades < MIN_LADDER_DECADES:
            raise ValidationError(
                f"Ladder spans {decades:.2f} decades, needs {MIN_LADDER_DECADES:g}",
                module="experiments",
            )

    # -------------------------------------------------------------------------
    # Frechet derivative check
    # -------------------------------------------------------------------------

    def run_derivative_check(
        self,
        scenario: Scenario,
        elements: np.ndarray | None = None,
        threads: int | None = None,
    ) -> DerivativeCheck:
        """Finite-difference remainders of the linearized ND map.

        ``r(t) = || L(t beta, B) - L0 - t DL(beta, B) ||_2`` for every step of
        the scenario's t ladder and for half of it.

        Args:
            scenario: Scenario; ``B`` defaults to the inclusion elements.
            elements: Boolean element mask of ``B``.
            threads: Parallel map width.

        Returns:
            Derivative check.
        """
        mesh = self.scenarios.build_mesh(scenario)
        basis = self.nd.build_load_basis(mesh)
        mono = self.monotonicity_service(scenario, mesh, basis, threads=threads)
        if elements is None:
            elements = mesh.element_region > 0
        if not np.any(elements):
            raise ValidationError("Derivative check region is empty", module="experiments")
        beta = scenario.test.beta
        l0 = mono.background_nd
        derivative = self.nd.assemble_frechet_matrix(
            mesh, mono.context.background, elements, beta, basis, mono.background_fields
        )

        def remainder(t: float) -> float:
            field = self.materials.perturbed(mono.context.background, elements, t * beta)
            nd_t = self.nd.assemble_nd_matrix(mesh, field, basis, threads=1)
            diff = nd_t.values - l0.values - t * derivative.values
            return float(np.linalg.norm(diff, 2))

        steps = [float(t) for t in scenario.study.t_ladder]
        values = ordered_map(
            remainder, steps + [t / 2.0 for t in steps], threads or self.settings.threads
        )
        check = DerivativeCheck(
            steps=tuple(steps),
            remainders=tuple(values[: len(steps)]),
            halved=tuple(values[len(steps):]),
        )
        self.logger.info("Derivative check finished", ratios=check.ratios)
        return check

    # -------------------------------------------------------------------------
    # Localized potentials
    # -------------------------------------------------------------------------

    def run_localized_potentials(
        self,
        scenario: Scenario,
        probe: Shape | None = None,
        window: Shape | None = None,
        sigma: float | None = None,
        top_k: int | None = None,
        threads: int | None = None,
    ) -> LocalizedPotentials:
        """Loads maximizing energy in ``B`` relative to energy outside ``U``.

        Solves ``G_B x = theta (G_out + sigma I) x`` on the background field,
        where ``G_V = int_V div div + sym : sym``.

        Args:
            scenario: Scenario; probe, window, sigma and top_k default to its study block.
            probe: Shape of ``B``.
            window: Shape of ``U``.
            sigma: Regularizer; defaults to a relative multiple of the trace.
            top_k: Number of returned loads.
            threads: Parallel map width.

        Returns:
            Localized loads with energy ratios, best first.

        Raises:
            ValidationError: If ``B`` is empty or not inside ``U``, or ``U``
                misses the Neumann boundary.
            ParameterRangeError: If sigma is not positive.
        """
        study = scenario.study
        probe = probe or study.probe
        window = window or study.window
        if probe is None or window is None:
            raise ValidationError(
                "Localization needs study.probe and study.window", module="experiments"
            )
        top_k = top_k or study.top_k
        sigma = study.sigma if sigma is None else sigma

        mesh = self.scenarios.build_mesh(scenario.background_only())
        b_mask = self.scenarios.meshes.shape_mask(mesh, probe)
        u_mask = self.scenarios.meshes.shape_mask(mesh, window)
        if not b_mask.any():
            raise ValidationError("Probe set contains no element", module="experiments")
        if np.any(b_mask & ~u_mask):
            raise ValidationError("Probe set must lie inside the window", module="experiments")
        edges = mesh.boundary_edges[mesh.neumann_edges]
        midpoints = mesh.nodes[edges].mean(axis=1)
        if not np.any(window.contains(midpoints)):
            raise ValidationError(
                "Window must meet the Neumann boundary", module="experiments"
            )

        basis = self.nd.build_load_basis(mesh)
        field = self.scenarios.background_field(scenario, mesh)
        _, fields = self.nd.background_fields(mesh, field, basis, threads)
        exterior = ~u_mask
        g_b = self.nd.region_gram(fields, b_mask, 1.0, 1.0)
        g_out = self.nd.region_gram(fields, exterior, 1.0, 1.0)
        m = basis.size
        if sigma is None:
            sigma = SIGMA_RELATIVE * float(np.trace(g_out)) / m
        if sigma <= 0.0:
            raise ParameterRangeError("sigma", sigma, "sigma > 0", module="experiments")

        regularized = g_out + sigma * np.eye(m)
        _, vectors = eigh(g_b, regularized)
        k = min(top_k, m)
        loads = vectors[:, ::-1][:, :k].T
        loads = loads / np.linalg.norm(loads, axis=1, keepdims=True)
        signs = np.sign(loads[np.arange(k), np.argmax(np.abs(loads), axis=1)])
        loads = loads * signs[:, None]

        d_b = self.nd.region_gram(fields, b_mask, 1.0, 0.0)
        d_out = self.nd.region_gram(fields, exterior, 1.0, 0.0)
        ratios = np.array([x @ g_b @ x / (x @ regularized @ x) for x in loads])
        div_ratios = np.array([x @ d_b @ x / (x @ d_out @ x + sigma * x @ x) for x in loads])
        self.logger.info(
            "Localized potentials computed",
            best_ratio=float(ratios[0]),
            sigma=sigma,
            basis_size=m,
        )
        return LocalizedPotentials(
            loads=loads,
            ratios=ratios,
            divergence_ratios=div_ratios,
            sigma=sigma,
            probe_gram=g_b,
            exterior_gram=g_out,
        )
