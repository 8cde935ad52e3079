"""Unit tests for mesh handler."""

import numpy as np
import pytest

from src.core.exceptions import MeshError, RegionError
from src.handlers.mesh_handler import MeshHandler, boundary_edge_sides, is_edge_connected
from src.models.schemas import RegionSpec


def region(region_id: str, kind: str, shape: dict) -> RegionSpec:
    return RegionSpec.model_validate({"id": region_id, "kind": kind, "shape": shape})


class TestBuildMesh:
    """Test cases for structured mesh construction."""

    def setup_method(self):
        """Set up test fixtures."""
        self.handler = MeshHandler()

    def test_counts_and_areas(self):
        """Test node, element and boundary edge counts."""
        mesh = self.handler.build_unit_square_mesh(4, ["bottom"])

        assert mesh.n_nodes == 25
        assert mesh.n_elements == 32
        assert mesh.boundary_edges.shape == (16, 2)
        assert np.all(mesh.signed_areas > 0)
        assert mesh.signed_areas.sum() == pytest.approx(1.0)
        assert mesh.spacing == pytest.approx(0.25)

    def test_boundary_order(self):
        """Test that boundary edges run bottom, right, top, left."""
        mesh = self.handler.build_unit_square_mesh(4, ["bottom"])

        assert mesh.edge_dirichlet[:4].all()
        assert not mesh.edge_dirichlet[4:].any()
        assert len(mesh.neumann_edges) == 12
        np.testing.assert_array_equal(mesh.boundary_edges[0], [0, 1])
        assert mesh.dirichlet_nodes.sum() == 5

    def test_node_numbering(self):
        """Test that node k = j (n + 1) + i sits at (i / n, j / n)."""
        mesh = self.handler.build_unit_square_mesh(4, ["left"])

        np.testing.assert_allclose(mesh.nodes[7], [0.5, 0.25])

    @pytest.mark.parametrize("n", [0, 1])
    def test_too_coarse(self, n):
        """Test rejection of n < 2."""
        with pytest.raises(MeshError):
            self.handler.build_unit_square_mesh(n, ["bottom"])

    def test_boundary_parts_must_be_non_empty(self):
        """Test rejection of empty Dirichlet or Neumann parts."""
        with pytest.raises(MeshError):
            self.handler.build_unit_square_mesh(4, [])
        with pytest.raises(MeshError):
            self.handler.build_unit_square_mesh(4, ["bottom", "top", "left", "right"])

    def test_boundary_edge_sides(self):
        """Test side masks of boundary edges."""
        mesh = self.handler.build_unit_square_mesh(4, ["bottom"])

        top = boundary_edge_sides(mesh, ["top"])
        np.testing.assert_array_equal(np.flatnonzero(top), [8, 9, 10, 11])
        assert boundary_edge_sides(mesh, ["left", "right"]).sum() == 8


class TestRefine:
    """Test cases for uniform refinement."""

    def setup_method(self):
        """Set up test fixtures."""
        self.handler = MeshHandler()
        self.mesh = self.handler.build_unit_square_mesh(4, ["bottom"])

    def test_parent_nodes_kept(self):
        """Test that parent nodes keep their indices."""
        fine = self.handler.refine(self.mesh)

        np.testing.assert_array_equal(fine.nodes[: self.mesh.n_nodes], self.mesh.nodes)
        assert fine.n_nodes == 81
        assert fine.n_elements == 4 * self.mesh.n_elements
        assert fine.spacing == pytest.approx(self.mesh.spacing / 2)

    def test_tags_inherited(self):
        """Test that boundary tags and region labels are inherited."""
        spec = region("incl", "finite", {"type": "rect", "corner_lo": [0.3, 0.3], "corner_hi": [0.7, 0.7]})
        labeled = self.handler.label_regions(self.mesh, [spec])
        fine = self.handler.refine(labeled)

        np.testing.assert_array_equal(fine.edge_dirichlet, np.repeat(labeled.edge_dirichlet, 2))
        np.testing.assert_array_equal(fine.element_region, np.repeat(labeled.element_region, 4))
        assert fine.region_ids == labeled.region_ids
        assert fine.signed_areas.sum() == pytest.approx(1.0)


class TestLabelRegions:
    """Test cases for region labeling."""

    def setup_method(self):
        """Set up test fixtures."""
        self.handler = MeshHandler()
        self.mesh = self.handler.build_unit_square_mesh(16, ["bottom"])

    def test_label_by_barycenter(self, rigid_spec):
        """Test that elements are labeled by their barycenter."""
        labeled = self.handler.label_regions(self.mesh, [rigid_spec])

        inside = rigid_spec.shape.contains(labeled.barycenters)
        np.testing.assert_array_equal(labeled.region_mask("rigid"), inside)
        assert labeled.region_ids == ("background", "rigid")

    def test_relabel_idempotent(self, rigid_spec):
        """Test that labeling twice gives the same labels."""
        once = self.handler.label_regions(self.mesh, [rigid_spec])
        twice = self.handler.label_regions(once, [rigid_spec])

        np.testing.assert_array_equal(once.element_region, twice.element_region)

    def test_overlapping_extreme_regions(self, rigid_spec, cavity_spec):
        """Test that overlapping extreme regions are rejected."""
        with pytest.raises(RegionError) as exc_info:
            self.handler.label_regions(self.mesh, [rigid_spec, cavity_spec])
        assert set(exc_info.value.region_ids) == {"rigid", "cavity"}

    def test_finite_over_extreme(self, rigid_spec):
        """Test that a finite region may not cover an extreme one."""
        finite = region("soft", "finite", {"type": "disc", "center": [0.5, 0.6], "radius": 0.1})

        with pytest.raises(RegionError):
            self.handler.label_regions(self.mesh, [rigid_spec, finite])

    def test_finite_overlap_later_wins(self):
        """Test that overlapping finite regions resolve to the later one."""
        first = region("a", "finite", {"type": "rect", "corner_lo": [0.2, 0.2], "corner_hi": [0.6, 0.6]})
        second = region("b", "finite", {"type": "rect", "corner_lo": [0.4, 0.4], "corner_hi": [0.8, 0.8]})

        labeled = self.handler.label_regions(self.mesh, [first, second])

        center = np.argmin(np.linalg.norm(labeled.barycenters - [0.5, 0.5], axis=1))
        assert labeled.region_ids[labeled.element_region[center]] == "b"

    def test_margin_violation(self):
        """Test that shapes must keep one element layer from the boundary."""
        spec = region("edge", "rigid", {"type": "disc", "center": [0.05, 0.5], "radius": 0.1})

        with pytest.raises(RegionError):
            self.handler.label_regions(self.mesh, [spec])

    def test_duplicate_ids(self, rigid_spec):
        """Test that region ids must be distinct."""
        with pytest.raises(RegionError):
            self.handler.label_regions(self.mesh, [rigid_spec, rigid_spec])

    def test_disconnecting_cavity(self):
        """Test that a ring-shaped cavity enclosing background is rejected."""
        ring = region(
            "ring",
            "cavity",
            {
                "type": "polygon",
                "vertices": [
                    [0.2, 0.2], [0.8, 0.2], [0.8, 0.8], [0.2, 0.8], [0.2, 0.2],
                    [0.4, 0.4], [0.4, 0.6], [0.6, 0.6], [0.6, 0.4], [0.4, 0.4],
                ],
            },
        )

        with pytest.raises(RegionError, match="disconnect"):
            self.handler.label_regions(self.mesh, [ring])

    def test_edge_connectivity(self):
        """Test edge connectivity of element sets."""
        assert is_edge_connected(self.mesh, np.ones(self.mesh.n_elements, dtype=bool))
        mask = np.zeros(self.mesh.n_elements, dtype=bool)
        mask[[0, self.mesh.n_elements - 1]] = True
        assert not is_edge_connected(self.mesh, mask)

    def test_dump(self, tmp_path):
        """Test the plain-text mesh listing."""
        mesh = self.handler.build_unit_square_mesh(2, ["bottom"])

        path = self.handler.dump(mesh, tmp_path / "mesh.txt")

        lines = path.read_text().splitlines()
        assert len(lines) == 9 + 8 + 8
        assert lines[0].startswith("node 0 ")
        assert lines[-1].endswith("neumann")
