"""Unit tests for experiment service."""

import numpy as np
import pytest

from src.core.enums import CalibrationFamily
from src.core.exceptions import ParameterRangeError, ValidationError
from src.models.schemas import DiscShape, RectShape
from src.services.experiment_service import ExperimentService

RIGID = {"id": "rigid", "kind": "rigid", "shape": {"type": "disc", "center": [0.5, 0.55], "radius": 0.15}}
STIFF = {"id": "stiff", "lam": 3.0, "mu": 3.0, "shape": {"type": "disc", "center": [0.5, 0.55], "radius": 0.15}}
PROBE = {"type": "disc", "center": [0.62, 0.62], "radius": 0.1}
WINDOW = {"type": "rect", "corner_lo": [0.45, 0.45], "corner_hi": [1.1, 1.1]}


@pytest.fixture
def experiments(scenarios, test_settings) -> ExperimentService:
    return ExperimentService(scenarios, test_settings)


class TestCalibration:
    """Test cases for threshold calibration."""

    @pytest.mark.parametrize(
        "family", [CalibrationFamily.OUTER, CalibrationFamily.LINEARIZED_OUTER]
    )
    def test_outer_families(self, experiments, make_scenario, family):
        """Test the calibration rule on background data."""
        scenario = make_scenario(inclusions=[RIGID])

        result = experiments.calibrate_tau(scenario, family)

        expected = max(2.0 * max(-result.worst_min_eig, 0.0), result.floor) + result.noise
        assert result.tau == pytest.approx(expected)
        assert result.tau >= result.floor > 0.0
        assert result.family == family

    def test_inner_family(self, experiments, make_scenario):
        """Test that identical background model and data give the floor."""
        scenario = make_scenario(inclusions=[RIGID])

        result = experiments.calibrate_tau(scenario, CalibrationFamily.INNER)

        assert result.worst_min_eig == pytest.approx(0.0, abs=1e-12)
        assert result.tau == pytest.approx(result.floor)

    @pytest.mark.parametrize("family", list(CalibrationFamily))
    def test_refined_background_data_give_floor(self, experiments, make_scenario, family):
        """Test that refined background data leave no discretization offset to calibrate."""
        scenario = make_scenario(
            mesh={"n": 8, "dirichlet_sides": ["bottom"], "data_refinement": 1},
            inclusions=[RIGID],
        )

        result = experiments.calibrate_tau(scenario, family)

        assert result.tau == pytest.approx(result.floor)
        assert result.worst_min_eig >= -0.5 * result.floor

    def test_uncorrected_refined_data_raise_inner_threshold(self, experiments, make_scenario):
        """Test that the raw restricted background sits away from the model."""
        scenario = make_scenario(
            mesh={"n": 8, "dirichlet_sides": ["bottom"], "data_refinement": 1, "correct_bias": False},
            inclusions=[RIGID],
        )

        result = experiments.calibrate_tau(scenario, CalibrationFamily.INNER)

        assert result.tau > 100.0 * result.floor

    def test_noise_added(self, experiments, make_scenario):
        """Test that the noise level is added to the threshold."""
        scenario = make_scenario(test={"tau": "calibrate", "grid": 2, "noise": 1e-3})

        result = experiments.calibrate_tau(scenario, CalibrationFamily.INNER)

        assert result.noise == 1e-3
        assert result.tau >= 1e-3


class TestConvergenceStudy:
    """Test cases for the truncation convergence study."""

    @pytest.mark.slow
    def test_rigid_truncation_converges(self, experiments, make_scenario):
        """Test the fitted slope of the rigid truncation error."""
        scenario = make_scenario(inclusions=[RIGID])

        report = experiments.run_convergence_study(scenario)

        assert len(report.errors) == 7
        assert all(a > b for a, b in zip(report.errors, report.errors[1:]))
        assert report.slope >= 0.45
        assert report.passed

    def test_needs_extreme_inclusion(self, experiments, make_scenario):
        """Test that a finite phantom has nothing to truncate."""
        with pytest.raises(ValidationError):
            experiments.run_convergence_study(make_scenario(inclusions=[STIFF]))

    @pytest.mark.parametrize(
        "ladder", [[0.1, 0.01, 0.001], [0.1, 0.05, 0.02, 0.01], [0.1, 0.01, 0.001, 1.5]]
    )
    def test_ladder_validation(self, experiments, make_scenario, ladder):
        """Test ladder length, span and range checks."""
        scenario = make_scenario(inclusions=[RIGID], study={"eps_ladder": ladder})

        with pytest.raises(ValidationError):
            experiments.run_convergence_study(scenario)


class TestDerivativeCheck:
    """Test cases for the Frechet derivative check."""

    def test_quadratic_remainder(self, experiments, make_scenario):
        """Test that halving t divides the remainder by about four."""
        scenario = make_scenario(inclusions=[STIFF])

        check = experiments.run_derivative_check(scenario)

        assert check.steps == (0.01, 0.005)
        for ratio in check.ratios:
            assert 3.5 < ratio < 4.5

    def test_empty_region(self, experiments, make_scenario):
        """Test that the perturbed set must be non-empty."""
        with pytest.raises(ValidationError):
            experiments.run_derivative_check(make_scenario())


class TestLocalizedPotentials:
    """Test cases for localized potentials."""

    def test_ratios_descending(self, experiments, make_scenario):
        """Test unit loads ordered by energy ratio."""
        scenario = make_scenario(study={"probe": PROBE, "window": WINDOW, "top_k": 3})

        result = experiments.run_localized_potentials(scenario)

        assert result.loads.shape == (3, 48)
        np.testing.assert_allclose(np.linalg.norm(result.loads, axis=1), 1.0)
        assert np.all(np.diff(result.ratios) <= 1e-12 * result.best_ratio)
        assert result.best_ratio > 0
        assert result.sigma > 0

    def test_explicit_arguments(self, experiments, make_scenario):
        """Test that arguments override the study block."""
        scenario = make_scenario()

        result = experiments.run_localized_potentials(
            scenario,
            probe=DiscShape.model_validate(PROBE),
            window=RectShape.model_validate(WINDOW),
            sigma=1e-6,
            top_k=2,
        )

        assert result.sigma == 1e-6
        assert len(result.ratios) == 2

    def test_missing_probe(self, experiments, make_scenario):
        """Test that probe and window are required."""
        with pytest.raises(ValidationError):
            experiments.run_localized_potentials(make_scenario())

    def test_probe_outside_window(self, experiments, make_scenario):
        """Test that the probe set must lie inside the window."""
        window = {"type": "rect", "corner_lo": [0.7, 0.7], "corner_hi": [1.1, 1.1]}
        scenario = make_scenario(study={"probe": PROBE, "window": window})

        with pytest.raises(ValidationError, match="inside the window"):
            experiments.run_localized_potentials(scenario)

    def test_window_misses_boundary(self, experiments, make_scenario):
        """Test that the window must meet the Neumann boundary."""
        window = {"type": "rect", "corner_lo": [0.3, 0.3], "corner_hi": [0.9, 0.9]}
        scenario = make_scenario(study={"probe": PROBE, "window": window})

        with pytest.raises(ValidationError, match="Neumann"):
            experiments.run_localized_potentials(scenario)

    def test_sigma_positive(self, experiments, make_scenario):
        """Test that sigma must be positive."""
        scenario = make_scenario(study={"probe": PROBE, "window": WINDOW})

        with pytest.raises(ParameterRangeError):
            experiments.run_localized_potentials(scenario, sigma=-1.0)
