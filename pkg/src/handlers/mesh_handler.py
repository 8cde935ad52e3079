"""Mesh handler for structured triangulations.

This module provides functionality for building triangulations of the
unit square, refining them, tagging boundary pieces, and labeling
elements by geometric region specifications.
"""

from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from src.core.constants import AREA_TOLERANCE, BACKGROUND_REGION, MIN_SUBDIVISIONS
from src.core.enums import BoundarySide, InclusionKind
from src.core.exceptions import MeshError, RegionError
from src.models.dto import Mesh
from src.models.schemas import RegionSpec, Shape
from src.utils.file_utils import FileUtils
from src.utils.logging_utils import LoggerMixin

SIDE_ORDER: tuple[BoundarySide, ...] = (
    BoundarySide.BOTTOM,
    BoundarySide.RIGHT,
    BoundarySide.TOP,
    BoundarySide.LEFT,
)


def element_adjacency(mesh: Mesh) -> sparse.csr_matrix:
    """Element graph in which two elements are adjacent iff they share an edge.

    Args:
        mesh: Mesh.

    Returns:
        Symmetric ``(M, M)`` boolean adjacency matrix.
    """
    m = mesh.n_elements
    local = mesh.elements[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    keys = local[:, 0].astype(np.int64) * mesh.n_nodes + local[:, 1]
    owners = np.repeat(np.arange(m), 3)
    order = np.argsort(keys, kind="stable")
    keys, owners = keys[order], owners[order]
    shared = np.flatnonzero(keys[1:] == keys[:-1])
    rows, cols = owners[shared], owners[shared + 1]
    data = np.ones(2 * len(shared), dtype=bool)
    return sparse.csr_matrix(
        (data, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
        shape=(m, m),
    )


def is_edge_connected(mesh: Mesh, elements: np.ndarray) -> bool:
    """Whether a set of elements is connected through shared edges.

    Args:
        mesh: Mesh.
        elements: Boolean element mask.

    Returns:
        True for a connected (or empty) set.
    """
    idx = np.flatnonzero(elements)
    if idx.size <= 1:
        return True
    sub = element_adjacency(mesh)[idx][:, idx]
    n_components, _ = connected_components(sub, directed=False)
    return n_components == 1


def boundary_edge_sides(mesh: Mesh, sides: Iterable[BoundarySide | str]) -> np.ndarray:
    """Boolean mask over boundary edges lying on any of ``sides``."""
    mid = mesh.nodes[mesh.boundary_edges].mean(axis=1)
    tol = 0.25 * mesh.spacing
    on_side = {
        BoundarySide.BOTTOM: mid[:, 1] < tol,
        BoundarySide.RIGHT: mid[:, 0] > 1.0 - tol,
        BoundarySide.TOP: mid[:, 1] > 1.0 - tol,
        BoundarySide.LEFT: mid[:, 0] < tol,
    }
    mask = np.zeros(len(mid), dtype=bool)
    for side in sides:
        mask |= on_side[BoundarySide(side)]
    return mask


class MeshHandler(LoggerMixin):
    """Handler for mesh operations.

    This class provides methods for building, refining and labeling
    triangulations of the unit square. Meshes are immutable; every
    operation returns a new mesh.
    """

    def build_unit_square_mesh(
        self,
        n: int,
        dirichlet_sides: Iterable[BoundarySide | str],
    ) -> Mesh:
        """Build a structured triangulation of the unit square.

        Squares are split along alternating diagonals.

        Args:
            n: Subdivisions per side.
            dirichlet_sides: Sides carrying zero displacement.

        Returns:
            Mesh with ``2 n^2`` elements and ``(n + 1)^2`` nodes.

        Raises:
            MeshError: If n < 2, or if the Dirichlet or Neumann part would be empty.
        """
        if n < MIN_SUBDIVISIONS:
            raise MeshError(
                f"n={n} violates n >= {MIN_SUBDIVISIONS}", details={"n": n}
            )
        sides = {BoundarySide(s) for s in dirichlet_sides}
        if not sides:
            raise MeshError("Dirichlet boundary must be non-empty")
        if len(sides) == len(SIDE_ORDER):
            raise MeshError("Neumann boundary must be non-empty")

        ticks = np.arange(n + 1) / n
        xs, ys = np.meshgrid(ticks, ticks)
        nodes = np.column_stack([xs.ravel(), ys.ravel()])

        def node(i: np.ndarray, j: np.ndarray) -> np.ndarray:
            return j * (n + 1) + i

        ii, jj = np.meshgrid(np.arange(n), np.arange(n))
        ii, jj = ii.ravel(), jj.ravel()
        a, b = node(ii, jj), node(ii + 1, jj)
        c, d = node(ii + 1, jj + 1), node(ii, jj + 1)
        even = ((ii + jj) % 2 == 0)[:, None]
        first = np.where(even, np.column_stack([a, b, c]), np.column_stack([a, b, d]))
        second = np.where(even, np.column_stack([a, c, d]), np.column_stack([b, c, d]))
        elements = np.stack([first, second], axis=1).reshape(-1, 3)

        k = np.arange(n)
        side_edges = {
            BoundarySide.BOTTOM: np.column_stack([node(k, 0), node(k + 1, 0)]),
            BoundarySide.RIGHT: np.column_stack([node(n, k), node(n, k + 1)]),
            BoundarySide.TOP: np.column_stack([node(n - k, n), node(n - k - 1, n)]),
            BoundarySide.LEFT: np.column_stack([node(0, n - k), node(0, n - k - 1)]),
        }
        boundary_edges = np.concatenate([side_edges[s] for s in SIDE_ORDER])
        edge_dirichlet = np.concatenate(
            [np.full(n, s in sides) for s in SIDE_ORDER]
        )

        mesh = Mesh(
            nodes=nodes,
            elements=elements.astype(np.int64),
            boundary_edges=boundary_edges.astype(np.int64),
            edge_dirichlet=edge_dirichlet,
            element_region=np.zeros(len(elements), dtype=np.int64),
            spacing=1.0 / n,
        )
        self._check_areas(mesh)
        self.logger.debug(
            "Mesh built",
            n=n,
            elements=mesh.n_elements,
            dirichlet_sides=sorted(s.value for s in sides),
        )
        return mesh

    def refine(self, mesh: Mesh) -> Mesh:
        """Split every triangle into four congruent children.

        Parent nodes keep their indices; edge midpoints are appended. Region
        labels and boundary tags are inherited, never re-derived.

        Args:
            mesh: Mesh to refine.

        Returns:
            Refined mesh.
        """
        n_nodes = mesh.n_nodes
        elements = mesh.elements
        local = np.sort(elements[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        keys = local[:, 0].astype(np.int64) * n_nodes + local[:, 1]
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        endpoints = np.column_stack([unique_keys // n_nodes, unique_keys % n_nodes])
        midpoints = 0.5 * (mesh.nodes[endpoints[:, 0]] + mesh.nodes[endpoints[:, 1]])
        nodes = np.vstack([mesh.nodes, midpoints])

        mid = (inverse.reshape(-1, 3) + n_nodes).astype(np.int64)
        m01, m12, m20 = mid[:, 0], mid[:, 1], mid[:, 2]
        v0, v1, v2 = elements[:, 0], elements[:, 1], elements[:, 2]
        children = np.stack(
            [
                np.column_stack([v0, m01, m20]),
                np.column_stack([m01, v1, m12]),
                np.column_stack([m20, m12, v2]),
                np.column_stack([m01, m12, m20]),
            ],
            axis=1,
        ).reshape(-1, 3)

        be = mesh.boundary_edges
        be_keys = np.sort(be, axis=1)
        be_keys = be_keys[:, 0].astype(np.int64) * n_nodes + be_keys[:, 1]
        be_mid = np.searchsorted(unique_keys, be_keys) + n_nodes
        boundary_edges = np.stack(
            [np.column_stack([be[:, 0], be_mid]), np.column_stack([be_mid, be[:, 1]])],
            axis=1,
        ).reshape(-1, 2)

        refined = Mesh(
            nodes=nodes,
            elements=children,
            boundary_edges=boundary_edges.astype(np.int64),
            edge_dirichlet=np.repeat(mesh.edge_dirichlet, 2),
            element_region=np.repeat(mesh.element_region, 4),
            region_ids=mesh.region_ids,
            spacing=mesh.spacing / 2.0,
        )
        self._check_areas(refined)
        self.logger.debug("Mesh refined", elements=refined.n_elements)
        return refined

    def shape_mask(self, mesh: Mesh, shape: Shape) -> np.ndarray:
        """Elements whose barycenter lies in a shape.

        Args:
            mesh: Mesh.
            shape: Geometric shape.

        Returns:
            Boolean element mask.
        """
        return shape.contains(mesh.barycenters)

    def label_regions(self, mesh: Mesh, specs: Sequence[RegionSpec]) -> Mesh:
        """Label elements by region specifications.

        An element belongs to a region iff its barycenter lies in the
        region's shape. Labels are derived from scratch, so relabeling with
        the same specs is idempotent. Overlapping finite regions resolve to
        the later spec.

        Args:
            mesh: Mesh to label.
            specs: Region specifications.

        Returns:
            Labeled mesh.

        Raises:
            RegionError: On duplicate ids, shapes leaving the interior
                margin, overlapping extreme regions, or cavities that
                disconnect the remaining domain.
        """
        ids = [spec.id for spec in specs]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise RegionError("Region ids must be distinct", region_ids=duplicates)

        for spec in specs:
            self.check_margin(mesh, spec)

        element_region = np.zeros(mesh.n_elements, dtype=np.int64)
        extreme_owner = np.full(mesh.n_elements, -1, dtype=np.int64)
        for index, spec in enumerate(specs, start=1):
            members = self.shape_mask(mesh, spec.shape)
            if not members.any():
                self.logger.warning("Region labels no elements", region=spec.id)
            if spec.is_extreme:
                clash = np.unique(extreme_owner[members & (extreme_owner >= 0)])
                if clash.size:
                    raise RegionError(
                        "Extreme regions must be disjoint",
                        region_ids=[specs[int(c) - 1].id for c in clash] + [spec.id],
                    )
                extreme_owner[members] = index
            overwritten = members & (element_region > 0)
            if overwritten.any():
                if np.any(extreme_owner[overwritten] > 0) and not spec.is_extreme:
                    raise RegionError(
                        "Finite region overlaps an extreme region",
                        region_ids=[spec.id],
                    )
                self.logger.warning(
                    "Regions overlap, later region wins",
                    region=spec.id,
                    elements=int(overwritten.sum()),
                )
            element_region[members] = index

        labeled = Mesh(
            nodes=mesh.nodes,
            elements=mesh.elements,
            boundary_edges=mesh.boundary_edges,
            edge_dirichlet=mesh.edge_dirichlet,
            element_region=element_region,
            region_ids=(BACKGROUND_REGION, *ids),
            spacing=mesh.spacing,
        )

        cavity_ids = [spec.id for spec in specs if spec.kind == InclusionKind.CAVITY]
        if cavity_ids:
            cavity = np.isin(
                element_region, [labeled.region_index(i) for i in cavity_ids]
            )
            if not is_edge_connected(labeled, ~cavity):
                raise RegionError(
                    "Cavity regions disconnect the domain", region_ids=cavity_ids
                )
        return labeled

    def check_margin(self, mesh: Mesh, spec: RegionSpec) -> None:
        """Reject shapes closer to the boundary than one element layer.

        Args:
            mesh: Mesh providing the margin.
            spec: Region specification.

        Raises:
            RegionError: If the bounding box leaves the clipped domain.
        """
        xmin, ymin, xmax, ymax = spec.shape.bounds()
        lo, hi = mesh.margin - AREA_TOLERANCE, 1.0 - mesh.margin + AREA_TOLERANCE
        if min(xmin, ymin) < lo or max(xmax, ymax) > hi:
            raise RegionError(
                f"Region '{spec.id}' must keep a margin of {mesh.margin:g} from the boundary",
                region_ids=[spec.id],
            )

    def dump(self, mesh: Mesh, path: str | Path) -> Path:
        """Write a plain-text listing of nodes, elements and boundary edges.

        Args:
            mesh: Mesh.
            path: Output file.

        Returns:
            Written path.
        """
        lines = [
            f"node {i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.nodes)
        ]
        lines += [
            f"element {e} {a} {b} {c} {mesh.region_ids[r]}"
            for e, ((a, b, c), r) in enumerate(zip(mesh.elements, mesh.element_region))
        ]
        lines += [
            f"edge {i} {a} {b} {'dirichlet' if d else 'neumann'}"
            for i, ((a, b), d) in enumerate(zip(mesh.boundary_edges, mesh.edge_dirichlet))
        ]
        return FileUtils.write_text(path, "\n".join(lines) + "\n")

    def _check_areas(self, mesh: Mesh) -> None:
        if np.any(mesh.signed_areas <= 0.0):
            raise MeshError("Mesh has non-positive element areas")
        total = float(mesh.signed_areas.sum())
        if abs(total - 1.0) > AREA_TOLERANCE:
            raise MeshError(f"Element areas sum to {total!r}, expected 1")
