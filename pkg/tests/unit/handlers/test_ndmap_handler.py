"""Unit tests for ND map handler."""

import numpy as np
import pytest
from structlog.testing import capture_logs

from src.core.config import Settings
from src.core.exceptions import BasisMismatchError, ValidationError
from src.handlers.ndmap_handler import NdMapHandler
from src.models.dto import MaterialState, NdMatrix
from src.services.monotonicity_service import loewner_min_eig


class TestLoadBasis:
    """Test cases for the edge indicator basis."""

    def test_size(self, nd, make_mesh):
        """Test two loads per Neumann edge."""
        basis = nd.build_load_basis(make_mesh(4))

        assert basis.size == 24
        np.testing.assert_allclose(basis.gram(), np.eye(24))

    def test_edge_values(self, nd, make_mesh):
        """Test that load k acts on edge k // 2 in direction k % 2."""
        basis = nd.build_load_basis(make_mesh(4))

        values = basis.edge_values(5)

        assert values[2, 1] == pytest.approx(2.0)
        assert np.count_nonzero(values) == 1

    def test_fingerprint_depends_on_boundary(self, nd, make_mesh):
        """Test that different Neumann parts give different fingerprints."""
        bottom = nd.build_load_basis(make_mesh(4))
        left = nd.build_load_basis(make_mesh(4, dirichlet=("left",)))

        assert bottom.fingerprint != left.fingerprint
        assert bottom.fingerprint == nd.build_load_basis(make_mesh(4)).fingerprint


class TestNdMatrix:
    """Test cases for ND matrix assembly."""

    def test_symmetric_positive_definite(self, nd, make_mesh, make_field):
        """Test symmetry and definiteness."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)

        matrix = nd.assemble_nd_matrix(mesh, make_field(mesh), basis)

        np.testing.assert_array_equal(matrix.values, matrix.values.T)
        assert np.linalg.eigvalsh(matrix.values).min() > 0
        assert matrix.asymmetry < 1e-10
        assert matrix.fingerprint == basis.fingerprint

    def test_one_solve_per_load(self, nd, fem, make_mesh, make_field):
        """Test the number of forward solves."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)

        nd.assemble_nd_matrix(mesh, make_field(mesh), basis)

        assert fem.solve_count == basis.size

    def test_thread_count_invariance(self, nd, make_mesh, make_field, rigid_spec):
        """Test bit-identical matrices for one and four threads."""
        mesh = make_mesh(8, [rigid_spec])
        field = make_field(mesh, {"rigid": MaterialState.rigid()})
        basis = nd.build_load_basis(mesh)

        single = nd.assemble_nd_matrix(mesh, field, basis, threads=1)
        parallel = nd.assemble_nd_matrix(mesh, field, basis, threads=4)

        np.testing.assert_array_equal(single.values, parallel.values)

    def test_monotone_in_stiffness(self, nd, make_mesh, make_field, material_handler, rigid_spec):
        """Test that softer fields have larger ND matrices."""
        mesh = make_mesh(8, [rigid_spec])
        basis = nd.build_load_basis(mesh)
        background = make_field(mesh)
        region = mesh.region_mask("rigid")
        soft = nd.assemble_nd_matrix(mesh, material_handler.perturbed(background, region, -0.5), basis)
        stiff = nd.assemble_nd_matrix(mesh, material_handler.perturbed(background, region, 1.0), basis)

        tol = 1e-10 * soft.norm
        assert loewner_min_eig(soft, stiff) >= -tol
        assert loewner_min_eig(stiff, soft) < -tol

    def test_extreme_ordering(self, nd, make_mesh, make_field, material_handler, cavity_spec):
        """Test cavity above background above rigid on the same set."""
        mesh = make_mesh(8, [cavity_spec])
        basis = nd.build_load_basis(mesh)
        background = make_field(mesh)
        region = mesh.region_mask("cavity")
        l0 = nd.assemble_nd_matrix(mesh, background, basis)
        cavity = nd.assemble_nd_matrix(mesh, material_handler.from_masks(background, cavity=region), basis)
        rigid = nd.assemble_nd_matrix(mesh, material_handler.from_masks(background, rigid=region), basis)

        tol = 1e-10 * l0.norm
        assert loewner_min_eig(cavity, l0) >= -tol
        assert loewner_min_eig(l0, rigid) >= -tol

    def test_basis_mismatch(self, nd, make_mesh, make_field):
        """Test that a basis from another boundary is rejected."""
        mesh = make_mesh(4)
        other = nd.build_load_basis(make_mesh(4, dirichlet=("left",)))

        with pytest.raises(BasisMismatchError):
            nd.assemble_nd_matrix(mesh, make_field(mesh), other)


class TestFrechet:
    """Test cases for the Frechet derivative."""

    def test_gram_representation(self, nd, make_mesh, make_field, rigid_spec):
        """Test that the derivative is -beta times the energy Gram matrix."""
        mesh = make_mesh(8, [rigid_spec])
        basis = nd.build_load_basis(mesh)
        background = make_field(mesh)
        region = mesh.region_mask("rigid")
        _, fields = nd.background_fields(mesh, background, basis)

        derivative = nd.assemble_frechet_matrix(mesh, background, region, 0.5, basis, fields)

        gram = nd.region_gram(fields, region)
        np.testing.assert_allclose(derivative.values, -0.5 * gram)
        assert np.linalg.eigvalsh(gram).min() > -1e-12 * np.abs(gram).max()

    def test_background_fields_match_nd_matrix(self, nd, make_mesh, make_field):
        """Test that stored fields come with the same background matrix."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)
        background = make_field(mesh)

        l0, fields = nd.background_fields(mesh, background, basis)

        np.testing.assert_allclose(l0.values, nd.assemble_nd_matrix(mesh, background, basis).values)
        assert fields.size == basis.size
        assert fields.strain.shape == (basis.size, mesh.n_elements, 3)

    def test_background_asymmetry_measured(self, fem, make_mesh, make_field):
        """Test that the background matrix records and logs its asymmetry."""
        handler = NdMapHandler(fem, Settings(log_level="WARNING", threads=1, symmetry_tol=1e-300))
        mesh = make_mesh(4)
        basis = handler.build_load_basis(mesh)
        background = make_field(mesh)

        with capture_logs() as logs:
            l0, _ = handler.background_fields(mesh, background, basis)

        direct = handler.assemble_nd_matrix(mesh, background, basis)
        assert l0.asymmetry <= 1e-10
        assert l0.asymmetry == pytest.approx(direct.asymmetry, abs=1e-14)
        warned = [e for e in logs if e["event"] == "ND matrix asymmetric before symmetrization"]
        assert bool(warned) == (l0.asymmetry > 0.0)

    def test_full_domain_gram_is_background_matrix(self, nd, make_mesh, make_field):
        """Test that the unit-weight energy over the domain reproduces the ND matrix."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)
        l0, fields = nd.background_fields(mesh, make_field(mesh), basis)

        gram = nd.region_gram(fields, np.ones(mesh.n_elements, dtype=bool))

        np.testing.assert_allclose(gram, l0.values, rtol=1e-8, atol=1e-12)

    def test_empty_region(self, nd, make_mesh, make_field):
        """Test that the perturbed set must be non-empty."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)

        with pytest.raises(ValidationError):
            nd.assemble_frechet_matrix(
                mesh, make_field(mesh), np.zeros(mesh.n_elements, dtype=bool), 0.5, basis
            )


class TestRestriction:
    """Test cases for fine-to-coarse basis transfer."""

    def setup_method(self):
        """Set up test fixtures."""
        self.coarse_n = 8

    def test_orthonormal_rows(self, nd, mesh_handler, make_mesh):
        """Test R R^T = I."""
        coarse = make_mesh(self.coarse_n)
        fine = mesh_handler.refine(coarse)

        r = nd.restriction_matrix(nd.build_load_basis(fine), nd.build_load_basis(coarse))

        np.testing.assert_allclose(r @ r.T, np.eye(r.shape[0]), atol=1e-14)

    def test_refined_data_dominate(self, nd, mesh_handler, make_mesh, material_handler):
        """Test that restricted fine-mesh data lie above coarse-mesh data."""
        coarse = make_mesh(self.coarse_n)
        fine = mesh_handler.refine(coarse)
        coarse_basis = nd.build_load_basis(coarse)
        fine_basis = nd.build_load_basis(fine)
        coarse_nd = nd.assemble_nd_matrix(
            coarse, material_handler.make_lame_field(coarse, (1.0, 1.0)), coarse_basis
        )
        fine_nd = nd.assemble_nd_matrix(
            fine, material_handler.make_lame_field(fine, (1.0, 1.0)), fine_basis
        )

        restricted = nd.restrict(fine_nd, fine_basis, coarse_basis)

        assert restricted.fingerprint == coarse_basis.fingerprint
        assert loewner_min_eig(restricted, coarse_nd) >= -1e-10 * coarse_nd.norm

    def test_restrict_wrong_basis(self, nd, make_mesh, make_field):
        """Test that only matrices in the fine basis are restricted."""
        mesh = make_mesh(4)
        basis = nd.build_load_basis(mesh)
        matrix = nd.assemble_nd_matrix(mesh, make_field(mesh), basis)
        other = nd.build_load_basis(make_mesh(4, dirichlet=("left",)))

        with pytest.raises(BasisMismatchError):
            nd.restrict(matrix, other, basis)


class TestSerialization:
    """Test cases for the ND matrix text format."""

    def test_write_read(self, nd, tmp_path):
        """Test that written matrices are read back exactly."""
        values = np.array([[1.0 / 3.0, -2e-17], [-2e-17, np.pi]])
        matrix = NdMatrix(values=values, fingerprint="abc", provenance="phantom(x)")

        path = nd.write(matrix, tmp_path / "nd.txt")
        parsed = nd.read(path)

        np.testing.assert_array_equal(parsed.values, values)
        assert parsed.provenance == "phantom(x)"
        assert path.read_text().splitlines()[0] == "# ndmatrix/1"

    @pytest.mark.parametrize(
        "text",
        [
            "",
            "# ndmatrix/1\nfingerprint a\nprovenance p\ndimension 2\n1 2\n",
            "# ndmatrix/1\nfingerprint a\nprovenance p\ndimension x\n",
        ],
    )
    def test_malformed(self, nd, text):
        """Test rejection of malformed files."""
        with pytest.raises(ValidationError):
            nd.parse(text)
