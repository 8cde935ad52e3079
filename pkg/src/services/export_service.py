"""Export service for experiment outputs.

This module provides the ExportService class writing ND matrices,
indicator maps (CSV and 8-bit PGM images), study reports, localization
results, calibrated thresholds, displacements and the run manifest.
Every file is a deterministic function of its inputs.
"""

import csv
import io
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from src.core.config import Settings, get_settings
from src.core.constants import (
    DISPLACEMENT_FILE,
    INDICATOR_CSV_FILE,
    INDICATOR_PGM_FILE,
    LOCALIZE_CSV_FILE,
    LOCALIZE_TEXT_FILE,
    MANIFEST_FILE,
    MASK_PGM_FILE,
    MESH_DUMP_FILE,
    ND_MATRIX_FILE,
    PGM_MAXVAL,
    PGM_PIXEL_SCALE,
    STUDY_CSV_FILE,
    STUDY_TEXT_FILE,
    TAU_FILE,
)
from src.core.enums import CalibrationFamily
from src.handlers.mesh_handler import MeshHandler
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import (
    CalibrationResult,
    Displacement,
    IndicatorMap,
    LocalizedPotentials,
    NdMatrix,
    StudyReport,
)
from src.models.schemas import Scenario
from src.utils.file_utils import FileUtils
from src.utils.logging_utils import LoggerMixin


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


class ExportService(LoggerMixin):
    """Service class for export operations.

    Attributes:
        out_dir: Output directory.
        settings: Application settings.
        written: Files written so far, in order.
    """

    def __init__(self, out_dir: str | Path, settings: Settings | None = None) -> None:
        """Initialize the export service.

        Args:
            out_dir: Output directory, created if missing.
            settings: Application settings.
        """
        self.settings = settings or get_settings()
        self.out_dir = FileUtils.ensure_directory(out_dir)
        self.written: list[Path] = []

    def _record(self, path: Path) -> Path:
        self.written.append(path)
        self.logger.debug("Output written", path=str(path))
        return path

    # -------------------------------------------------------------------------
    # Matrices and maps
    # -------------------------------------------------------------------------

    def export_nd_matrix(self, matrix: NdMatrix, nd: NdMapHandler | None = None) -> Path:
        handler = nd or NdMapHandler(settings=self.settings)
        return self._record(handler.write(matrix, self.out_dir / ND_MATRIX_FILE))

    def export_indicator_map(self, result: IndicatorMap) -> list[Path]:
        """Write the indicator CSV, the indicator image and the mask image.

        Args:
            result: Indicator map.

        Returns:
            Written paths.
        """
        grid = result.grid
        if result.family == CalibrationFamily.INNER:
            columns = ["indicator"]
        else:
            columns = ["indicator_upper", "indicator_lower"]
        header = ["pixel", "center_x", "center_y", *columns, "verdict", "in_mask"]
        verdicts, mask = result.verdicts, result.mask
        rows = [
            [
                k,
                _fmt(grid.centers[k, 0]),
                _fmt(grid.centers[k, 1]),
                *(_fmt(v) for v in result.indicators[k]),
                int(verdicts[k]),
                int(mask[k]),
            ]
            for k in range(grid.n_pixels)
        ]
        csv_path = FileUtils.write_text(self.out_dir / INDICATOR_CSV_FILE, _csv_text(header, rows))

        scores = result.scores
        lo, hi = float(scores.min()), float(scores.max())
        if hi > lo:
            gray = np.round((scores - lo) / (hi - lo) * PGM_MAXVAL)
        else:
            gray = np.zeros_like(scores)
        pgm_path = self.write_pgm(self.out_dir / INDICATOR_PGM_FILE, gray, grid.p)
        mask_path = self.write_pgm(self.out_dir / MASK_PGM_FILE, mask * PGM_MAXVAL, grid.p)
        return [self._record(p) for p in (csv_path, pgm_path, mask_path)]

    @staticmethod
    def write_pgm(path: Path, values: np.ndarray, p: int) -> Path:
        """Write per-pixel gray levels as a binary PGM image.

        Pixel rows are counted from the bottom, image rows from the top; each
        pixel becomes a square block.

        Args:
            path: Output file.
            values: Gray levels in ``[0, 255]`` per pixel.
            p: Pixels per side.

        Returns:
            Written path.
        """
        img = np.asarray(values, dtype=float).reshape(p, p)[::-1].astype(np.uint8)
        img = np.kron(img, np.ones((PGM_PIXEL_SCALE, PGM_PIXEL_SCALE), dtype=np.uint8))
        buffer = io.BytesIO()
        Image.fromarray(img).save(buffer, format="PPM")
        return FileUtils.write_bytes(path, buffer.getvalue())

    # -------------------------------------------------------------------------
    # Studies
    # -------------------------------------------------------------------------

    def export_study(self, report: StudyReport) -> list[Path]:
        rows = [
            [_fmt(eps), _fmt(err), _fmt(strain)]
            for eps, err, strain in zip(report.parameters, report.errors, report.strain_errors)
        ]
        csv_path = FileUtils.write_text(
            self.out_dir / STUDY_CSV_FILE,
            _csv_text(["eps", "operator_error", "strain_error"], rows),
        )
        summary = "\n".join(
            [
                "Truncation convergence study",
                f"points: {len(report.parameters)}",
                f"slope: {report.slope:.6f} (required >= {report.min_slope:g})",
                f"residual: {report.residual:.6f} (allowed <= {report.max_residual:g})",
                f"result: {'PASS' if report.passed else 'FAIL'}",
            ]
        )
        text_path = FileUtils.write_text(self.out_dir / STUDY_TEXT_FILE, summary + "\n")
        return [self._record(csv_path), self._record(text_path)]

    def export_localization(self, result: LocalizedPotentials) -> list[Path]:
        m = result.loads.shape[1]
        header = ["rank", "ratio", "divergence_ratio", *(f"load_{j}" for j in range(m))]
        rows = [
            [rank, _fmt(ratio), _fmt(div), *(_fmt(v) for v in load)]
            for rank, (ratio, div, load) in enumerate(
                zip(result.ratios, result.divergence_ratios, result.loads)
            )
        ]
        csv_path = FileUtils.write_text(self.out_dir / LOCALIZE_CSV_FILE, _csv_text(header, rows))
        lines = [
            "Localized potentials",
            f"basis size: {m}",
            f"sigma: {result.sigma:.6e}",
        ]
        lines += [
            f"#{rank}: ratio {ratio:.6e}, divergence ratio {div:.6e}"
            for rank, (ratio, div) in enumerate(zip(result.ratios, result.divergence_ratios))
        ]
        text_path = FileUtils.write_text(self.out_dir / LOCALIZE_TEXT_FILE, "\n".join(lines) + "\n")
        return [self._record(csv_path), self._record(text_path)]

    def export_calibration(self, result: CalibrationResult) -> Path:
        payload = {
            "family": result.family.value,
            "tau": result.tau,
            "worst_min_eig": result.worst_min_eig,
            "floor": result.floor,
            "noise": result.noise,
        }
        return self._record(FileUtils.write_json(self.out_dir / TAU_FILE, payload))

    def export_displacement(self, u: Displacement) -> list[Path]:
        mesh = u.mesh
        rows = [
            [i, _fmt(x), _fmt(y), _fmt(ux), _fmt(uy)]
            for i, ((x, y), (ux, uy)) in enumerate(zip(mesh.nodes, u.nodal))
        ]
        csv_path = FileUtils.write_text(
            self.out_dir / DISPLACEMENT_FILE, _csv_text(["node", "x", "y", "u_x", "u_y"], rows)
        )
        dump_path = MeshHandler().dump(mesh, self.out_dir / MESH_DUMP_FILE)
        return [self._record(csv_path), self._record(dump_path)]

    # -------------------------------------------------------------------------
    # Manifest
    # -------------------------------------------------------------------------

    def export_manifest(
        self,
        command: str,
        scenario: Scenario,
        config_path: str | Path | None = None,
        extra: dict[str, Any] | None = None,
    ) -> Path:
        """Write the manifest listing inputs and the digests of written files.

        Args:
            command: CLI command.
            scenario: Validated scenario.
            config_path: Scenario file.
            extra: Additional result values.

        Returns:
            Manifest path.
        """
        payload = {
            "command": command,
            "seed": scenario.seed,
            "config": {
                "path": str(config_path) if config_path else None,
                "sha256": FileUtils.sha256_file(config_path) if config_path else None,
            },
            "scenario_sha256": FileUtils.sha256_bytes(scenario.canonical_json().encode("utf-8")),
            "settings": {
                "solver_rtol": self.settings.solver_rtol,
                "residual_tol": self.settings.residual_tol,
                "tau_floor_rel": self.settings.tau_floor_rel,
            },
            "outputs": {
                path.name: FileUtils.sha256_file(path)
                for path in sorted(self.written, key=lambda p: p.name)
            },
            "results": extra or {},
        }
        return FileUtils.write_json(self.out_dir / MANIFEST_FILE, payload)
