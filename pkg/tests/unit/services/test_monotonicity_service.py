"""Unit tests for monotonicity service."""

from dataclasses import replace

import numpy as np
import pytest

from src.core.enums import ExtremeMode, OperatorMode, OuterInequality
from src.core.exceptions import BasisMismatchError, ParameterRangeError, ValidationError
from src.models.dto import BetaBounds, NdMatrix
from src.services.monotonicity_service import MonotonicityService, loewner_min_eig

TAU = 1e-9


def rigid_inclusion(center=(0.5, 0.6), radius=0.18) -> dict:
    return {"id": "rigid", "kind": "rigid", "shape": {"type": "disc", "center": list(center), "radius": radius}}


def cavity_inclusion() -> dict:
    return {
        "id": "cavity",
        "kind": "cavity",
        "shape": {"type": "rect", "corner_lo": [0.35, 0.45], "corner_hi": [0.65, 0.7]},
    }


def finite_inclusion() -> dict:
    return {
        "id": "stiff",
        "lam": 3.0,
        "mu": 3.0,
        "shape": {"type": "disc", "center": [0.5, 0.55], "radius": 0.15},
    }


@pytest.fixture
def setup(scenarios, nd, make_scenario):
    """Monotonicity service and measured data of a scenario."""

    def build(inclusions, **test):
        scenario = make_scenario(
            inclusions=inclusions, test={"tau": TAU, "grid": 2, "beta": 0.5, **test}
        )
        mesh = scenarios.build_mesh(scenario)
        basis = nd.build_load_basis(mesh)
        context = scenarios.context(scenario, mesh, basis, tau=TAU)
        mono = MonotonicityService(context, nd=nd, materials=scenarios.materials)
        measured = scenarios.measured_data(scenario, mesh, basis)
        return mono, mesh, measured

    return build


def disc_mask(mesh, center, radius) -> np.ndarray:
    return np.linalg.norm(mesh.barycenters - np.asarray(center), axis=1) < radius


class TestLoewner:
    """Test cases for Loewner comparisons."""

    def test_min_eig(self):
        """Test the smallest eigenvalue of a difference."""
        a = NdMatrix(values=np.diag([3.0, 1.0]), fingerprint="f")
        b = NdMatrix(values=np.diag([1.0, 2.0]), fingerprint="f")

        assert loewner_min_eig(a, b) == pytest.approx(-1.0)
        assert loewner_min_eig(a, a) == pytest.approx(0.0)

    def test_fingerprint_mismatch(self):
        """Test that matrices in different bases are not compared."""
        a = NdMatrix(values=np.eye(2), fingerprint="f")
        b = NdMatrix(values=np.eye(2), fingerprint="g")

        with pytest.raises(BasisMismatchError):
            loewner_min_eig(a, b)

    def test_shape_mismatch(self):
        """Test that matrices of different sizes are not compared."""
        with pytest.raises(ValidationError):
            loewner_min_eig(
                NdMatrix(values=np.eye(2), fingerprint="f"),
                NdMatrix(values=np.eye(3), fingerprint="f"),
            )


class TestOuterTest:
    """Test cases for extreme outer tests."""

    def test_sandwich_on_background(self, setup):
        """Test that background data pass the outer test on any set."""
        mono, mesh, measured = setup([])

        pair = mono.outer_test(measured, disc_mask(mesh, (0.5, 0.5), 0.2))

        assert mono.context.inequalities == OuterInequality.BOTH
        assert pair.holds
        assert pair.upper is not None and pair.lower is not None

    def test_holds_when_set_covers_inclusion(self, setup):
        """Test that a set containing the rigid inclusion passes."""
        mono, mesh, measured = setup([rigid_inclusion()])

        pair = mono.outer_test(measured, mono.interior_mask())

        assert mono.context.inequalities == OuterInequality.LOWER
        assert pair.upper is None
        assert pair.holds

    def test_fails_when_set_misses_inclusion(self, setup):
        """Test that a set away from the rigid inclusion fails."""
        mono, mesh, measured = setup([rigid_inclusion()])
        c = mesh.barycenters
        corner = np.all((c > 0.125) & (c < 0.375), axis=1)

        pair = mono.outer_test(measured, corner)

        assert not pair.holds
        assert pair.lower.min_eig < -TAU

    def test_cavity_inclusion_uses_upper(self, setup):
        """Test that cavity phantoms consult the upper inequality."""
        mono, _, measured = setup([cavity_inclusion()])

        pair = mono.outer_test(measured, mono.interior_mask())

        assert mono.context.inequalities == OuterInequality.UPPER
        assert pair.lower is None
        assert pair.holds

    def test_test_set_validation(self, setup):
        """Test rejection of empty sets and sets leaving the margin."""
        mono, mesh, measured = setup([])

        with pytest.raises(ValidationError):
            mono.outer_test(measured, np.zeros(mesh.n_elements, dtype=bool))
        with pytest.raises(ValidationError):
            mono.outer_test(measured, np.ones(mesh.n_elements, dtype=bool))

    def test_truncated_mode(self, setup):
        """Test that the truncated mode approximates exact operators."""
        mono, mesh, _ = setup([], extreme_mode="truncated", truncation_eps=1e-6)
        region = disc_mask(mesh, (0.5, 0.5), 0.2)

        truncated = mono.rigid_operator(region)
        exact_context = replace(mono.context, extreme_mode=ExtremeMode.EXACT)
        exact = MonotonicityService(exact_context, nd=mono.nd).rigid_operator(region)

        assert np.linalg.norm(truncated.values - exact.values, 2) < 1e-3 * exact.norm


class TestInnerTests:
    """Test cases for inner tests."""

    def test_positive_holds_inside_rigid(self, setup):
        """Test a probe set inside a rigid inclusion."""
        mono, mesh, measured = setup([rigid_inclusion()])
        probe = disc_mask(mesh, (0.5, 0.6), 0.08)
        assert probe.any()

        result = mono.inner_test_pos(measured, probe, 0.5)

        assert result.holds

    def test_positive_linearized_holds_inside_rigid(self, setup):
        """Test the linearized operator for beta below kappa."""
        mono, mesh, measured = setup([rigid_inclusion()])
        probe = disc_mask(mesh, (0.5, 0.6), 0.08)

        result = mono.inner_test_pos(measured, probe, 0.5, OperatorMode.LINEARIZED)

        assert result.holds

    def test_negative_holds_inside_cavity(self, setup):
        """Test a probe set inside a cavity."""
        mono, mesh, measured = setup([cavity_inclusion()])
        c = mesh.barycenters
        probe = (c[:, 0] > 0.4) & (c[:, 0] < 0.6) & (c[:, 1] > 0.5) & (c[:, 1] < 0.65)
        assert probe.any()

        result = mono.inner_test_neg(measured, probe, 0.5)

        assert result.holds

    def test_negative_needs_beta_below_kappa(self, setup):
        """Test that beta >= kappa is rejected for the negative test."""
        mono, mesh, measured = setup([cavity_inclusion()])

        with pytest.raises(ParameterRangeError, match="kappa"):
            mono.inner_test_neg(measured, disc_mask(mesh, (0.5, 0.55), 0.1), 1.0)

    def test_linearized_needs_beta_below_kappa(self, setup):
        """Test that the linearized positive test also needs beta < kappa."""
        mono, mesh, measured = setup([rigid_inclusion()])
        probe = disc_mask(mesh, (0.5, 0.6), 0.08)

        mono.inner_test_pos(measured, probe, 1.5)
        with pytest.raises(ParameterRangeError):
            mono.inner_test_pos(measured, probe, 1.5, OperatorMode.LINEARIZED)

    @pytest.mark.parametrize("beta", [0.0, -0.1])
    def test_beta_positive(self, setup, beta):
        """Test that beta must be positive."""
        mono, _, _ = setup([])

        with pytest.raises(ParameterRangeError):
            mono.check_beta(beta, strict_kappa=False)


class TestLinearizedOuterTest:
    """Test cases for linearized outer tests."""

    def test_holds_for_covering_set(self, setup):
        """Test a finite phantom inside the test set."""
        mono, _, measured = setup([finite_inclusion()], inequalities="both")
        bounds = BetaBounds(1.0, 1.0)

        pair = mono.linearized_outer_test(measured, mono.interior_mask(), 2.0, bounds)

        assert pair.holds

    def test_no_solves_beyond_background(self, setup, fem):
        """Test that repeated tests reuse the stored background fields."""
        mono, mesh, measured = setup([finite_inclusion()])
        fem.reset_solve_count()
        bounds = BetaBounds(1.0, 1.0)

        mono.linearized_outer_test(measured, mono.interior_mask(), 2.0, bounds)
        mono.linearized_outer_test(measured, disc_mask(mesh, (0.5, 0.5), 0.2), 2.0, bounds)

        assert fem.solve_count == mono.context.basis.size


class TestEnergyBounds:
    """Test cases for the energy inequalities between ND maps."""

    def test_finite_contrast(self, setup, material_handler):
        """Test the two-sided bound for a finite stiffening."""
        mono, mesh, _ = setup([])
        background = mono.context.background
        stiff = material_handler.perturbed(background, disc_mask(mesh, (0.5, 0.5), 0.2), 2.0)

        for k in (0, 7):
            bounds = mono.background_bounds(background, stiff, k)
            assert bounds.value <= 0.0
            assert bounds.holds()

    def test_rigid_lower_bound(self, setup):
        """Test the lower bound of a rigid set."""
        mono, mesh, _ = setup([])

        bounds = mono.rigid_bounds(disc_mask(mesh, (0.5, 0.5), 0.2), 3)

        assert bounds.lower > 0.0
        assert bounds.holds()

    def test_cavity_bounds(self, setup):
        """Test the two-sided bound of a cavity with its extension."""
        mono, mesh, _ = setup([])

        bounds = mono.cavity_bounds(disc_mask(mesh, (0.5, 0.5), 0.2), 3)

        assert bounds.upper >= bounds.lower > 0.0
        assert bounds.holds()
