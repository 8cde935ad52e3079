"""Integration tests running the shipped scenarios at their working sizes."""

from pathlib import Path

import numpy as np
import pytest

from src.core.enums import CalibrationFamily, InclusionSign, OperatorMode
from src.models.dto import PixelGrid
from src.models.schemas import Scenario
from src.services.experiment_service import ExperimentService
from src.services.reconstruction_service import ReconstructionService, build_pixel_grid

pytestmark = [pytest.mark.integration, pytest.mark.slow]

CONFIG_DIR = Path(__file__).resolve().parents[3] / "configs"
SHIPPED = ["default.json", "rigid_disc.json", "cavity_rect.json", "finite_disc.json"]


@pytest.fixture
def experiments(scenarios, test_settings) -> ExperimentService:
    return ExperimentService(scenarios, test_settings)


@pytest.fixture
def load(scenarios):
    """Shipped scenario with dotted overrides."""

    def read(name: str, *overrides: str) -> Scenario:
        return scenarios.load(CONFIG_DIR / name, overrides)

    return read


@pytest.fixture
def prepare(experiments):
    """Mesh, basis, test service at a calibrated threshold, and measured data."""

    def build(scenario: Scenario, family: CalibrationFamily):
        scenarios = experiments.scenarios
        tau = experiments.calibrate_tau(scenario, family).tau
        mesh = scenarios.build_mesh(scenario)
        basis = experiments.nd.build_load_basis(mesh)
        mono = experiments.monotonicity_service(scenario, mesh, basis, tau=tau)
        data = scenarios.measured_data(scenario, mesh, basis, background=mono.background_nd)
        return mono, data, build_pixel_grid(mesh, scenario.test.grid)

    return build


def inside_pixels(grid: PixelGrid, scenario: Scenario) -> list[int]:
    """Pixels whose whole square lies in an inclusion."""
    inside = []
    for k in range(grid.n_pixels):
        x0, y0, x1, y1 = grid.pixel_bounds(k)
        corners = np.array([[x0, y0], [x1, y0], [x0, y1], [x1, y1]])
        if any(inc.shape.contains(corners).all() for inc in scenario.inclusions):
            inside.append(k)
    return inside


def top_corner_pixels(grid: PixelGrid, size: int = 3) -> list[int]:
    rows = range(grid.p - size, grid.p)
    cols = [*range(size), *range(grid.p - size, grid.p)]
    return [row * grid.p + col for row in rows for col in cols]


def ring_pixels(grid: PixelGrid) -> list[int]:
    """Pixels on the edge of the clipped domain, whose channels are empty."""
    p = grid.p
    return [k for k in range(grid.n_pixels) if k % p in (0, p - 1) or k // p in (0, p - 1)]


class TestShippedData:
    """Test cases for data of every shipped scenario."""

    @pytest.mark.parametrize("name", SHIPPED)
    def test_nd_matrices_self_adjoint(self, experiments, load, name):
        """Test the asymmetry before symmetrization of data and background."""
        scenario = load(name)
        scenarios = experiments.scenarios
        mesh = scenarios.build_mesh(scenario)
        basis = experiments.nd.build_load_basis(mesh)
        l0, _ = experiments.nd.background_fields(mesh, scenarios.background_field(scenario, mesh), basis)

        data = scenarios.measured_data(scenario, mesh, basis, background=l0)

        assert l0.asymmetry <= 1e-10
        assert data.asymmetry <= 1e-10
        np.testing.assert_array_equal(data.values, data.values.T)


class TestTruncationStudy:
    """Test cases for the truncation study on rigid and cavity inclusions."""

    def test_rate_on_rigid_and_cavity(self, experiments, load):
        """Test the fitted rate and fit quality at n = 24."""
        scenario = load("default.json", "mesh.n=24")
        scenario = scenario.model_copy(update={"inclusions": scenario.inclusions[:2]})

        report = experiments.run_convergence_study(scenario)

        assert report.slope >= 0.45
        assert report.residual <= 0.1
        assert report.passed


class TestOuterForward:
    """Test cases for outer tests of sets containing every inclusion."""

    def test_mixed_phantom(self, prepare, load):
        """Test that the clipped domain and ring complements pass at n = 32."""
        scenario = load("default.json")
        mono, data, grid = prepare(scenario, CalibrationFamily.OUTER)

        assert mono.outer_test(data, grid.clipped_mask).holds

        result = ReconstructionService(mono).outer_reconstruction(data, grid)

        assert not result.mask[ring_pixels(grid)].any()

    def test_linearized_finite_phantom(self, experiments, prepare, load, fem):
        """Test containing sets at n = 48 and the cost of the pixel loop."""
        scenario = load("finite_disc.json", "mesh.n=48")
        mono, data, grid = prepare(scenario, CalibrationFamily.LINEARIZED_OUTER)
        context = mono.context
        fresh = experiments.monotonicity_service(scenario, context.mesh, context.basis, tau=context.tau)
        beta = scenario.test.beta
        bounds = fresh.materials.beta_bounds(context.background)
        phantom = experiments.scenarios.phantom_field(scenario, context.mesh)
        fem.reset_solve_count()

        result = ReconstructionService(fresh).linearized_outer_reconstruction(
            data, grid, beta, bounds, phantom
        )

        assert fem.solve_count == context.basis.size
        assert fresh.linearized_outer_test(data, grid.clipped_mask, beta, bounds).holds
        assert not result.mask[ring_pixels(grid)].any()


class TestInnerReconstruction:
    """Test cases for inner reconstruction of rigid and cavity phantoms at n = 48."""

    CASES = [
        ("rigid_disc.json", InclusionSign.POSITIVE),
        ("cavity_rect.json", InclusionSign.NEGATIVE),
    ]

    @pytest.mark.parametrize(("name", "sign"), CASES)
    @pytest.mark.parametrize("mode", list(OperatorMode))
    def test_exact_data(self, prepare, load, name, sign, mode):
        """Test pixels inside the inclusion and far corners on inversion-mesh data."""
        scenario = load(name, "mesh.n=48", "mesh.data_refinement=0", f"test.mode={mode.value}")
        mono, data, grid = prepare(scenario, CalibrationFamily.INNER)
        inside = inside_pixels(grid, scenario)

        result = ReconstructionService(mono).inner_reconstruction(
            data, grid, scenario.test.beta, sign, mode
        )

        assert inside
        assert result.mask[inside].all()
        assert not result.mask[top_corner_pixels(grid)].any()

    @pytest.mark.parametrize(("name", "sign"), CASES)
    @pytest.mark.parametrize("mode", list(OperatorMode))
    def test_refined_data(self, prepare, load, experiments, name, sign, mode):
        """Test that refined data keep the floor threshold and spare far corners."""
        scenario = load(name, "mesh.n=48", f"test.mode={mode.value}")
        mono, data, grid = prepare(scenario, CalibrationFamily.INNER)

        result = ReconstructionService(mono).inner_reconstruction(
            data, grid, scenario.test.beta, sign, mode
        )

        floor = experiments.settings.tau_floor_rel * mono.background_nd.norm
        assert result.tau == pytest.approx(floor)
        assert not result.mask[top_corner_pixels(grid)].any()
        assert not result.mask.all()


class TestLocalizedPotentials:
    """Test cases for localized potentials of the shipped probe."""

    def test_ratio_grows_with_resolution(self, experiments, load):
        """Test that the best energy ratio increases from n = 16 to n = 32."""
        coarse = experiments.run_localized_potentials(load("default.json", "mesh.n=16"))
        fine = experiments.run_localized_potentials(load("default.json", "mesh.n=32"))

        assert fine.ratios[0] > coarse.ratios[0]
