"""Scenario service for loading configurations and building pipelines.

This module provides the ScenarioService class that reads strict JSON
scenario files, applies command-line overrides, and turns a validated
scenario into meshes, fields, load bases, measured data and test
contexts.
"""

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from src.core.config import Settings, get_settings
from src.core.enums import InclusionKind, InclusionSign, OuterInequality
from src.core.exceptions import BasisMismatchError, ConfigError
from src.handlers.material_handler import MaterialHandler
from src.handlers.mesh_handler import MeshHandler
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import (
    LameField,
    LoadBasis,
    MaterialState,
    Mesh,
    NdMatrix,
    ReconstructionContext,
)
from src.models.schemas import Scenario
from src.utils.file_utils import FileUtils
from src.utils.logging_utils import LoggerMixin


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-standard JSON constant {name}")


class ScenarioService(LoggerMixin):
    """Service class for scenarios.

    Attributes:
        settings: Process settings.
        meshes: Mesh handler.
        materials: Material handler.
        nd: ND map handler.
    """

    def __init__(
        self,
        settings: Settings | None = None,
        nd: NdMapHandler | None = None,
    ) -> None:
        """Initialize the scenario service.

        Args:
            settings: Process settings.
            nd: ND map handler (shares its FEM handler and solve counter).
        """
        self.settings = settings or get_settings()
        self.meshes = MeshHandler()
        self.materials = MaterialHandler()
        self.nd = nd or NdMapHandler(settings=self.settings)

    # -------------------------------------------------------------------------
    # Loading
    # -------------------------------------------------------------------------

    def load(self, path: str | Path, overrides: Iterable[str] = ()) -> Scenario:
        """Read, override and validate a scenario file.

        Args:
            path: JSON file.
            overrides: ``key.path=value`` expressions.

        Returns:
            Validated scenario.

        Raises:
            ConfigError: If the file is unreadable, not strict JSON, or invalid.
        """
        try:
            text = FileUtils.read_text(path)
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}: {e.strerror}") from e
        try:
            raw = json.loads(text, parse_constant=_reject_constant)
        except ValueError as e:
            raise ConfigError(f"Config {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("Config root must be an object")
        return self.parse(raw, overrides)

    def parse(self, raw: dict[str, Any], overrides: Iterable[str] = ()) -> Scenario:
        """Apply overrides to a raw config and validate it.

        Args:
            raw: Parsed JSON object.
            overrides: ``key.path=value`` expressions.

        Returns:
            Validated scenario.
        """
        data = json.loads(json.dumps(raw))
        for expr in overrides:
            self.apply_override(data, expr)
        try:
            return Scenario.model_validate(data)
        except PydanticValidationError as e:
            errors = [
                {"loc": ".".join(str(p) for p in err["loc"]), "msg": err["msg"]}
                for err in e.errors()
            ]
            summary = "; ".join(f"{err['loc']}: {err['msg']}" for err in errors)
            raise ConfigError(f"Invalid scenario: {summary}", errors=errors) from e

    @staticmethod
    def apply_override(data: dict[str, Any], expr: str) -> None:
        """Set ``key.path`` to ``value`` in a raw config.

        The value is parsed as JSON and falls back to a plain string; numeric
        path parts index lists.

        Args:
            data: Raw config, modified in place.
            expr: ``key.path=value``.

        Raises:
            ConfigError: On a malformed expression or path.
        """
        key, sep, value = expr.partition("=")
        if not sep or not key:
            raise ConfigError(f"Override '{expr}' is not of the form key=value")
        try:
            parsed: Any = json.loads(value)
        except ValueError:
            parsed = value
        parts = key.split(".")
        node: Any = data
        try:
            for part in parts[:-1]:
                if isinstance(node, list):
                    node = node[int(part)]
                else:
                    node = node.setdefault(part, {})
            if isinstance(node, list):
                node[int(parts[-1])] = parsed
            else:
                node[parts[-1]] = parsed
        except (IndexError, ValueError, TypeError, AttributeError) as e:
            raise ConfigError(f"Override path '{key}' does not exist") from e

    # -------------------------------------------------------------------------
    # Pipeline objects
    # -------------------------------------------------------------------------

    def build_mesh(self, scenario: Scenario, refinements: int = 0) -> Mesh:
        """Labeled mesh of a scenario, optionally refined before labeling."""
        mesh = self.meshes.build_unit_square_mesh(
            scenario.mesh.n, scenario.mesh.dirichlet_sides
        )
        for _ in range(refinements):
            mesh = self.meshes.refine(mesh)
        return self.meshes.label_regions(mesh, scenario.region_specs)

    def assignments(self, scenario: Scenario) -> dict[str, MaterialState]:
        """Region id to material state of every inclusion."""
        states = {}
        for inc in scenario.inclusions:
            if inc.kind == InclusionKind.FINITE:
                states[inc.id] = MaterialState.finite(inc.lam, inc.mu)
            elif inc.kind == InclusionKind.CAVITY:
                states[inc.id] = MaterialState.cavity()
            else:
                states[inc.id] = MaterialState.rigid()
        return states

    def background_field(self, scenario: Scenario, mesh: Mesh) -> LameField:
        bg = scenario.background
        return self.materials.make_lame_field(
            mesh, (bg.lam, bg.mu), provenance="background"
        )

    def phantom_field(self, scenario: Scenario, mesh: Mesh) -> LameField:
        bg = scenario.background
        ids = ",".join(inc.id for inc in scenario.inclusions) or "none"
        return self.materials.make_lame_field(
            mesh,
            (bg.lam, bg.mu),
            self.assignments(scenario),
            provenance=f"phantom({ids})",
        )

    def inclusion_sign(self, scenario: Scenario) -> InclusionSign | None:
        """Common sign of all inclusions, None when mixed or absent."""
        bg = scenario.background
        signs = set()
        for inc in scenario.inclusions:
            if inc.kind == InclusionKind.RIGID:
                signs.add(InclusionSign.POSITIVE)
            elif inc.kind == InclusionKind.CAVITY:
                signs.add(InclusionSign.NEGATIVE)
            else:
                d_lam, d_mu = inc.lam - bg.lam, inc.mu - bg.mu
                if d_lam >= 0 and d_mu >= 0 and (d_lam > 0 or d_mu > 0):
                    signs.add(InclusionSign.POSITIVE)
                elif d_lam <= 0 and d_mu <= 0 and (d_lam < 0 or d_mu < 0):
                    signs.add(InclusionSign.NEGATIVE)
                elif d_lam != 0 or d_mu != 0:
                    return None
        return signs.pop() if len(signs) == 1 else None

    def resolve_inequalities(self, scenario: Scenario) -> OuterInequality:
        """Consulted half of outer tests, with ``auto`` resolved from the phantom."""
        configured = scenario.test.inequalities
        if configured != OuterInequality.AUTO:
            return configured
        sign = self.inclusion_sign(scenario)
        if sign == InclusionSign.POSITIVE:
            return OuterInequality.LOWER
        if sign == InclusionSign.NEGATIVE:
            return OuterInequality.UPPER
        return OuterInequality.BOTH

    def measured_data(
        self,
        scenario: Scenario,
        mesh: Mesh,
        basis: LoadBasis,
        threads: int | None = None,
        noise: bool = True,
        background: NdMatrix | None = None,
    ) -> NdMatrix:
        """Synthetic measurement of the phantom in the inversion basis.

        Data are computed on the mesh refined ``data_refinement`` times and
        relabeled from the region specs. With ``correct_bias`` the fine-mesh
        inclusion effect ``Lambda_D - Lambda_0`` is restricted to ``basis``
        and added to the inversion-mesh background matrix, which removes
        the coarse-versus-fine offset of the background. Otherwise the fine
        matrix itself is restricted.

        Args:
            scenario: Scenario.
            mesh: Inversion mesh.
            basis: Inversion basis.
            threads: Parallel map width.
            noise: Whether to add the configured noise.
            background: Inversion-mesh background matrix, computed if absent.

        Returns:
            Measured ND matrix.

        Raises:
            BasisMismatchError: If ``background`` belongs to another basis.
        """
        refinements = scenario.mesh.data_refinement
        if refinements == 0:
            data = self.nd.assemble_nd_matrix(
                mesh, self.phantom_field(scenario, mesh), basis, threads
            )
        else:
            fine = self.build_mesh(scenario, refinements)
            fine_basis = self.nd.build_load_basis(fine)
            fine_data = self.nd.assemble_nd_matrix(
                fine, self.phantom_field(scenario, fine), fine_basis, threads
            )
            data = self.nd.restrict(fine_data, fine_basis, basis)
            if scenario.mesh.correct_bias:
                if background is None:
                    background, _ = self.nd.background_fields(
                        mesh, self.background_field(scenario, mesh), basis, threads
                    )
                data = self._remove_offset(
                    scenario, data, background, fine, fine_basis, basis, threads
                )
        self.logger.info(
            "Measured data synthesized",
            refinements=refinements,
            correct_bias=scenario.mesh.correct_bias,
            size=data.size,
            asymmetry=data.asymmetry,
        )
        if noise and scenario.test.noise > 0.0:
            data = self.add_noise(data, scenario.test.noise, scenario.seed)
        return data

    def _remove_offset(
        self,
        scenario: Scenario,
        data: NdMatrix,
        background: NdMatrix,
        fine: Mesh,
        fine_basis: LoadBasis,
        basis: LoadBasis,
        threads: int | None,
    ) -> NdMatrix:
        if background.fingerprint != basis.fingerprint:
            raise BasisMismatchError(basis.fingerprint, background.fingerprint, module="scenario")
        fine_background = self.nd.assemble_nd_matrix(
            fine, self.background_field(scenario, fine), fine_basis, threads
        )
        restricted = self.nd.restrict(fine_background, fine_basis, basis)
        offset = restricted.values - background.values
        self.logger.debug(
            "Background offset removed",
            offset=float(np.linalg.norm(offset, 2)),
            relative=float(np.linalg.norm(offset, 2)) / background.norm,
        )
        return NdMatrix(
            values=background.values + (data.values - restricted.values),
            fingerprint=basis.fingerprint,
            provenance=data.provenance,
            asymmetry=max(data.asymmetry, fine_background.asymmetry),
        )

    @staticmethod
    def add_noise(matrix: NdMatrix, delta: float, seed: int) -> NdMatrix:
        """Add a symmetric Gaussian perturbation of spectral norm ``delta``."""
        if delta == 0.0:
            return matrix
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(matrix.values.shape)
        noise = 0.5 * (noise + noise.T)
        noise *= delta / np.linalg.norm(noise, 2)
        return NdMatrix(
            values=matrix.values + noise,
            fingerprint=matrix.fingerprint,
            provenance=f"{matrix.provenance}+noise({delta:g})",
            asymmetry=matrix.asymmetry,
        )

    def context(
        self,
        scenario: Scenario,
        mesh: Mesh,
        basis: LoadBasis,
        tau: float = 0.0,
        threads: int | None = None,
    ) -> ReconstructionContext:
        """Test context of a scenario on its inversion mesh."""
        test = scenario.test
        return ReconstructionContext(
            mesh=mesh,
            background=self.background_field(scenario, mesh),
            basis=basis,
            tau=tau,
            inequalities=self.resolve_inequalities(scenario),
            extreme_mode=test.extreme_mode,
            truncation_eps=test.truncation_eps,
            channel=test.channel,
            threads=threads or self.settings.threads,
        )
