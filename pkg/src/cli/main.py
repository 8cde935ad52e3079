"""Command-line entry point.

Binds a scenario file to one of the pipelines and writes its outputs and
a manifest under ``--out``. Exit codes: 0 on success, 1 on a violated
precondition, 2 on a numerical failure.

Usage:
    python main.py nd --config configs/default.json --out out/nd
    python main.py reconstruct-outer --config configs/default.json --threads 4
    python main.py calibrate --config configs/rigid_disc.json --family inner
"""

import argparse
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from src.core.config import Settings, get_settings
from src.core.constants import EXIT_OK, EXIT_VALIDATION
from src.core.enums import CalibrationFamily, Command, InclusionSign, OperatorMode
from src.core.exceptions import MonotonicityError, ValidationError
from src.handlers.mesh_handler import boundary_edge_sides
from src.models.dto import IndicatorMap, Mesh, NdMatrix
from src.models.schemas import Scenario
from src.services.experiment_service import ExperimentService
from src.services.export_service import ExportService
from src.services.monotonicity_service import MonotonicityService
from src.services.reconstruction_service import ReconstructionService, check_linearized_phantom
from src.services.scenario_service import ScenarioService
from src.utils.logging_utils import (
    LoggerMixin,
    bind_run_context,
    get_logger,
    log_duration,
    setup_logging,
)

logger = get_logger(__name__)


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as validation errors."""

    def error(self, message: str) -> NoReturn:
        raise ValidationError(f"Invalid arguments: {message}", module="cli")


def build_parser() -> argparse.ArgumentParser:
    """Create the argument parser.

    Returns:
        Parser of the CLI arguments.
    """
    parser = _Parser(
        prog="elastic-monotonicity",
        description="Monotonicity-based inclusion detection in linear elasticity",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Pipeline to run")
    parser.add_argument("--config", required=True, help="Scenario JSON file")
    parser.add_argument("--out", default=None, help="Output directory")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a scenario value by dotted path (repeatable)",
    )
    parser.add_argument("--threads", type=int, default=None, help="Parallel map width")
    parser.add_argument("--seed", type=int, default=None, help="Noise seed")
    parser.add_argument(
        "--family",
        choices=[f.value for f in CalibrationFamily],
        default=None,
        help="Test family to calibrate (calibrate only)",
    )
    return parser


class CommandRunner(LoggerMixin):
    """Runs one CLI command on a validated scenario.

    Attributes:
        scenario: Validated scenario.
        threads: Parallel map width.
        scenarios: Scenario service.
        experiments: Experiment service.
        export: Export service writing under the output directory.
    """

    def __init__(
        self,
        scenario: Scenario,
        out_dir: Path,
        threads: int,
        settings: Settings,
        scenarios: ScenarioService,
    ) -> None:
        self.scenario = scenario
        self.threads = threads
        self.scenarios = scenarios
        self.experiments = ExperimentService(scenarios, settings)
        self.export = ExportService(out_dir, settings)

    def run(self, command: Command, family: CalibrationFamily | None = None) -> dict[str, Any]:
        """Run a command and return the values recorded in the manifest."""
        handlers: dict[Command, Callable[[], dict[str, Any]]] = {
            Command.FORWARD: self.forward,
            Command.ND: self.nd,
            Command.RECONSTRUCT_OUTER: self.reconstruct_outer,
            Command.RECONSTRUCT_INNER: self.reconstruct_inner,
            Command.RECONSTRUCT_LINEARIZED: self.reconstruct_linearized,
            Command.CONVERGENCE: self.convergence,
            Command.LOCALIZE: self.localize,
        }
        if command == Command.CALIBRATE:
            return self.calibrate(family or CalibrationFamily.OUTER)
        return handlers[command]()

    # -------------------------------------------------------------------------
    # Commands
    # -------------------------------------------------------------------------

    def forward(self) -> dict[str, Any]:
        scenario, fem = self.scenario, self.experiments.fem
        mesh = self.scenarios.build_mesh(scenario)
        field = self.scenarios.phantom_field(scenario, mesh)
        loaded = np.ones(len(mesh.neumann_edges), dtype=bool)
        if scenario.forward.sides:
            loaded = boundary_edge_sides(mesh, scenario.forward.sides)[mesh.neumann_edges]
        if not loaded.any():
            raise ValidationError("forward.sides select no Neumann edge", module="cli")
        tractions = np.where(loaded[:, None], np.asarray(scenario.forward.traction), 0.0)

        u = fem.solve_neumann(fem.assemble_system(mesh, field), tractions)
        work = fem.boundary_work(u, tractions)
        if field.has_cavity:
            u = fem.extend_E(mesh, field, u)
        self.export.export_displacement(u)
        return {"boundary_work": work, "loaded_edges": int(loaded.sum())}

    def nd(self) -> dict[str, Any]:
        mesh = self.scenarios.build_mesh(self.scenario)
        basis = self.experiments.nd.build_load_basis(mesh)
        data = self.scenarios.measured_data(self.scenario, mesh, basis, self.threads)
        self.export.export_nd_matrix(data, self.experiments.nd)
        return {"size": data.size, "norm": data.norm, "asymmetry": data.asymmetry}

    def reconstruct_outer(self) -> dict[str, Any]:
        recon, data = self._reconstruction(CalibrationFamily.OUTER)
        result = recon.outer_reconstruction(data, recon.build_grid(self.scenario.test.grid))
        return self._indicator_results(result)

    def reconstruct_inner(self) -> dict[str, Any]:
        test = self.scenario.test
        derived = self.scenarios.inclusion_sign(self.scenario)
        sign = test.sign or derived
        if sign is None:
            raise ValidationError(
                "Inner reconstruction needs test.sign or a definite phantom",
                module="reconstruct",
            )
        matches = derived is None or derived == sign
        if not matches:
            self.logger.warning(
                "Configured sign differs from the phantom",
                configured=sign.value,
                phantom=derived.value,
            )
        strict = sign == InclusionSign.NEGATIVE or test.mode == OperatorMode.LINEARIZED
        recon, data = self._reconstruction(
            CalibrationFamily.INNER,
            precheck=lambda mono: mono.check_beta(test.beta, strict_kappa=strict),
        )
        result = recon.inner_reconstruction(
            data, recon.build_grid(test.grid), test.beta, sign, test.mode
        )
        return {
            **self._indicator_results(result),
            "sign": sign.value,
            "sign_matches_phantom": matches,
        }

    def reconstruct_linearized(self) -> dict[str, Any]:
        scenario = self.scenario
        mesh = self.scenarios.build_mesh(scenario)
        materials = self.experiments.materials
        bounds = materials.beta_bounds(self.scenarios.background_field(scenario, mesh))
        phantom = self.scenarios.phantom_field(scenario, mesh)
        check_linearized_phantom(materials, phantom, scenario.test.beta, bounds)
        recon, data = self._reconstruction(CalibrationFamily.LINEARIZED_OUTER, mesh)
        result = recon.linearized_outer_reconstruction(
            data, recon.build_grid(scenario.test.grid), scenario.test.beta, bounds
        )
        return {
            **self._indicator_results(result),
            "beta_U": bounds.beta_U,
            "kappa": bounds.kappa,
        }

    def convergence(self) -> dict[str, Any]:
        report = self.experiments.run_convergence_study(self.scenario, self.threads)
        self.export.export_study(report)
        if not report.passed:
            self.logger.warning("Convergence study below thresholds", slope=report.slope)
        return {"slope": report.slope, "residual": report.residual, "passed": report.passed}

    def localize(self) -> dict[str, Any]:
        result = self.experiments.run_localized_potentials(self.scenario, threads=self.threads)
        self.export.export_localization(result)
        return {"best_ratio": result.best_ratio, "sigma": result.sigma}

    def calibrate(self, family: CalibrationFamily) -> dict[str, Any]:
        result = self.experiments.calibrate_tau(self.scenario, family, self.threads)
        self.export.export_calibration(result)
        return {"family": family.value, "tau": result.tau}

    # -------------------------------------------------------------------------
    # Helpers
    # -------------------------------------------------------------------------

    def _tau(self, family: CalibrationFamily) -> float:
        tau = self.scenario.test.tau
        if tau == "calibrate":
            return self.experiments.calibrate_tau(self.scenario, family, self.threads).tau
        return float(tau)

    def _reconstruction(
        self,
        family: CalibrationFamily,
        mesh: Mesh | None = None,
        precheck: Callable[[MonotonicityService], None] | None = None,
    ) -> tuple[ReconstructionService, NdMatrix]:
        """Reconstruction service with resolved threshold, and the measured data."""
        scenario = self.scenario
        mesh = mesh or self.scenarios.build_mesh(scenario)
        basis = self.experiments.nd.build_load_basis(mesh)
        mono = self.experiments.monotonicity_service(scenario, mesh, basis, 0.0, self.threads)
        if precheck is not None:
            precheck(mono)
        mono.context = mono.context.with_tau(self._tau(family))
        data = self.scenarios.measured_data(
            scenario, mesh, basis, self.threads, background=mono.background_nd
        )
        return ReconstructionService(mono), data

    def _indicator_results(self, result: IndicatorMap) -> dict[str, Any]:
        self.export.export_indicator_map(result)
        return {
            "tau": result.tau,
            "pixels": result.grid.n_pixels,
            "marked": int(result.mask.sum()),
            "provenance": result.provenance,
        }


@log_duration(logger, "Command timed")
def run(args: argparse.Namespace, settings: Settings) -> int:
    """Load the scenario, run the command and write the manifest.

    Args:
        args: Parsed arguments.
        settings: Process settings.

    Returns:
        Exit code.
    """
    command = Command(args.command)
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    threads = args.threads if args.threads is not None else settings.threads
    if threads < 1:
        raise ValidationError(f"--threads={threads} violates threads >= 1", module="cli")
    if args.family is not None and command != Command.CALIBRATE:
        raise ValidationError("--family applies to calibrate only", module="cli")

    scenarios = ScenarioService(settings)
    scenario = scenarios.load(args.config, overrides)
    out_dir = Path(args.out or scenario.output_dir or settings.output_dir)
    bind_run_context(command=command.value, seed=scenario.seed)
    logger.info("Command started", command=command.value, config=args.config, out=str(out_dir))

    runner = CommandRunner(scenario, out_dir, threads, settings, scenarios)
    family = CalibrationFamily(args.family) if args.family else None
    results = runner.run(command, family)
    manifest = runner.export.export_manifest(command.value, scenario, args.config, results)
    logger.info("Command finished", command=command.value, manifest=str(manifest))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """CLI entry point.

    Args:
        argv: Arguments without the program name; defaults to ``sys.argv[1:]``.

    Returns:
        Exit code.
    """
    settings = get_settings()
    setup_logging(settings.log_level, settings.log_format, settings.log_file)
    try:
        args = build_parser().parse_args(argv)
        return run(args, settings)
    except MonotonicityError as e:
        logger.error("Command failed", **e.to_dict())
        print(f"error [{e.module}]: {e.message}", file=sys.stderr)
        return e.exit_code
    except PydanticValidationError as e:
        logger.error("Command failed", errors=e.errors(include_url=False))
        print(f"error [config]: {e.error_count()} validation error(s)", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
