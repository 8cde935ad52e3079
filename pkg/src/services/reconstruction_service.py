"""Reconstruction service for pixelwise inclusion detection.

This module provides the ReconstructionService class running the outer,
inner and linearized outer tests over a pixel partition of the
margin-clipped domain and collecting the results into indicator maps.

Outer test sets are the clipped domain minus one pixel and a straight
channel of pixels from it to the side of the clipped domain, so the
excluded part always stays connected to the boundary layer.
"""

import numpy as np

from src.core.enums import CalibrationFamily, ChannelMode, Direction, InclusionSign, OperatorMode
from src.core.exceptions import MaterialError, ParameterRangeError, ValidationError
from src.handlers.material_handler import MaterialHandler
from src.models.dto import (
    BetaBounds,
    IndicatorMap,
    LameField,
    LoewnerPair,
    Mesh,
    NdMatrix,
    PixelGrid,
    ReconstructionContext,
)
from src.services.monotonicity_service import MonotonicityService
from src.utils.logging_utils import LoggerMixin
from src.utils.parallel_utils import ordered_map


def build_pixel_grid(mesh: Mesh, p: int) -> PixelGrid:
    """Partition the margin-clipped domain into ``p x p`` pixels.

    Elements are assigned by barycenter; elements outside the clipped
    domain get pixel -1.

    Args:
        mesh: Mesh.
        p: Pixels per side.

    Returns:
        Pixel grid.

    Raises:
        ValidationError: If a pixel receives no element.
    """
    lo, hi = mesh.margin, 1.0 - mesh.margin
    c = mesh.barycenters
    inside = np.all((c > lo) & (c < hi), axis=1)
    width = (hi - lo) / p
    cols = np.clip(np.floor((c[:, 0] - lo) / width).astype(int), 0, p - 1)
    rows = np.clip(np.floor((c[:, 1] - lo) / width).astype(int), 0, p - 1)
    element_pixel = np.where(inside, rows * p + cols, -1)
    counts = np.bincount(element_pixel[inside], minlength=p * p)
    if np.any(counts == 0):
        raise ValidationError(
            f"Pixel grid {p}x{p} is finer than the mesh", module="reconstruct"
        )
    return PixelGrid(p=p, lo=lo, hi=hi, element_pixel=element_pixel)


def channel(grid: PixelGrid, k: int, direction: Direction) -> list[int]:
    """Pixels strictly between pixel ``k`` and the side in ``direction``."""
    p = grid.p
    col, row = k % p, k // p
    if direction == Direction.LEFT:
        return [row * p + c for c in range(col - 1, -1, -1)]
    if direction == Direction.RIGHT:
        return [row * p + c for c in range(col + 1, p)]
    if direction == Direction.DOWN:
        return [r * p + col for r in range(row - 1, -1, -1)]
    return [r * p + col for r in range(row + 1, p)]


def nearest_direction(grid: PixelGrid, k: int) -> Direction:
    """Direction of the shortest channel of pixel ``k``."""
    return min(Direction, key=lambda d: len(channel(grid, k, d)))


def check_linearized_phantom(
    materials: MaterialHandler, phantom: LameField, beta: float, bounds: BetaBounds
) -> None:
    """Reject a phantom outside the contrast hypotheses of the linearized outer test.

    Raises:
        MaterialError: If the phantom has extreme inclusions.
        ParameterRangeError: If its contrast violates the bounds for ``beta``.
    """
    try:
        report = materials.validate_linearized_bounds(phantom, beta, bounds)
    except MaterialError as e:
        raise MaterialError(
            "Linearized outer reconstruction needs non-extreme inclusions"
        ) from e
    if not report.ok:
        raise ParameterRangeError(
            "beta", beta, "; ".join(report.violations), module="materials"
        )


class ReconstructionService(LoggerMixin):
    """Service class for pixelwise reconstructions.

    Attributes:
        monotonicity: Test service carrying the reconstruction context.
    """

    def __init__(self, monotonicity: MonotonicityService) -> None:
        """Initialize the reconstruction service.

        Args:
            monotonicity: Test service.
        """
        self.monotonicity = monotonicity

    @property
    def context(self) -> ReconstructionContext:
        return self.monotonicity.context

    def build_grid(self, p: int) -> PixelGrid:
        return build_pixel_grid(self.context.mesh, p)

    def excluded_sets(self, grid: PixelGrid, k: int) -> list[list[int]]:
        """Pixel sets removed from the clipped domain for pixel ``k``."""
        if self.context.channel == ChannelMode.ALL:
            directions = list(Direction)
        else:
            directions = [nearest_direction(grid, k)]
        return [[k, *channel(grid, k, d)] for d in directions]

    def outer_test_sets(self, grid: PixelGrid, k: int) -> list[np.ndarray]:
        """Element masks of the outer test sets of pixel ``k``."""
        clipped = grid.clipped_mask
        return [clipped & ~grid.elements_of(pixels) for pixels in self.excluded_sets(grid, k)]

    # -------------------------------------------------------------------------
    # Reconstructions
    # -------------------------------------------------------------------------

    def outer_reconstruction(self, measured: NdMatrix, grid: PixelGrid) -> IndicatorMap:
        """Mark pixels whose outer tests fail.

        Args:
            measured: Measured ND matrix.
            grid: Pixel grid.

        Returns:
            Indicator map with ``(upper, lower)`` min-eigenvalues per pixel.
        """
        def run(k: int) -> tuple[float, float]:
            pairs = [
                self.monotonicity.outer_test(measured, c, threads=1)
                for c in self.outer_test_sets(grid, k)
            ]
            return self._best(pairs)

        indicators = np.array(ordered_map(run, range(grid.n_pixels), self.context.threads))
        return self._finish(CalibrationFamily.OUTER, grid, indicators, measured, "outer")

    def inner_reconstruction(
        self,
        measured: NdMatrix,
        grid: PixelGrid,
        beta: float,
        sign: InclusionSign,
        mode: OperatorMode = OperatorMode.FULL,
    ) -> IndicatorMap:
        """Mark pixels whose inner tests hold.

        Args:
            measured: Measured ND matrix of a definite extreme phantom.
            grid: Pixel grid.
            beta: Shift magnitude.
            sign: Inclusion sign (rigid positive, cavity negative).
            mode: Full or linearized test operator.

        Returns:
            Indicator map with one min-eigenvalue per pixel.
        """
        self.monotonicity.check_beta(
            beta,
            strict_kappa=sign == InclusionSign.NEGATIVE or mode == OperatorMode.LINEARIZED,
        )
        test = (
            self.monotonicity.inner_test_pos
            if sign == InclusionSign.POSITIVE
            else self.monotonicity.inner_test_neg
        )

        def run(k: int) -> tuple[float]:
            result = test(measured, grid.elements_of([k]), beta, mode, threads=1)
            return (result.min_eig,)

        indicators = np.array(ordered_map(run, range(grid.n_pixels), self.context.threads))
        label = f"inner:{sign.value}:{mode.value}(beta={beta:g})"
        return self._finish(CalibrationFamily.INNER, grid, indicators, measured, label)

    def linearized_outer_reconstruction(
        self,
        measured: NdMatrix,
        grid: PixelGrid,
        beta: float,
        bounds: BetaBounds,
        phantom: LameField | None = None,
    ) -> IndicatorMap:
        """Mark pixels whose linearized outer tests fail.

        All forward solves happen once, for the background; every pixel is
        post-processing of the stored element fields.

        Args:
            measured: Measured ND matrix of a non-extreme field.
            grid: Pixel grid.
            beta: Contrast bound.
            bounds: Background bounds.
            phantom: Field behind the data; its contrast is validated first.

        Returns:
            Indicator map with ``(upper, lower)`` min-eigenvalues per pixel.

        Raises:
            ParameterRangeError: If the phantom violates the contrast bounds.
        """
        if phantom is not None:
            check_linearized_phantom(self.monotonicity.materials, phantom, beta, bounds)

        clipped_gram = self.monotonicity.gram(grid.clipped_mask)

        def run(k: int) -> tuple[float, float]:
            pairs = []
            for pixels in self.excluded_sets(grid, k):
                excluded = grid.elements_of(pixels)
                test_set = grid.clipped_mask & ~excluded
                gram = clipped_gram - self.monotonicity.gram(excluded)
                pairs.append(
                    self.monotonicity.linearized_outer_test(
                        measured, test_set, beta, bounds, gram=gram
                    )
                )
            return self._best(pairs)

        indicators = np.array(ordered_map(run, range(grid.n_pixels), self.context.threads))
        return self._finish(
            CalibrationFamily.LINEARIZED_OUTER,
            grid,
            indicators,
            measured,
            f"linearized_outer(beta={beta:g})",
        )

    # -------------------------------------------------------------------------
    # Internals
    # -------------------------------------------------------------------------

    @staticmethod
    def _best(pairs: list[LoewnerPair]) -> tuple[float, float]:
        """Indicators of the most favorable test set of a pixel."""
        def score(pair: LoewnerPair) -> float:
            values = [v for v in pair.indicators if not np.isnan(v)]
            return min(values) if values else np.inf

        return max(pairs, key=score).indicators

    def _finish(
        self,
        family: CalibrationFamily,
        grid: PixelGrid,
        indicators: np.ndarray,
        measured: NdMatrix,
        label: str,
    ) -> IndicatorMap:
        ctx = self.context
        result = IndicatorMap(
            family=family,
            grid=grid,
            indicators=indicators.reshape(grid.n_pixels, -1),
            tau=ctx.tau,
            provenance=(
                f"{label}; data={measured.provenance}; channel={ctx.channel.value}; "
                f"inequalities={ctx.inequalities.value}; extreme_mode={ctx.extreme_mode.value}"
            ),
        )
        self.logger.info(
            "Reconstruction finished",
            family=family.value,
            pixels=grid.n_pixels,
            marked=int(result.mask.sum()),
            tau=ctx.tau,
        )
        return result
