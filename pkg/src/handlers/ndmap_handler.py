"""ND map handler for boundary load bases and operator matrices.

This module provides functionality for building orthonormal per-edge
load bases on the Neumann boundary, assembling Neumann-to-Dirichlet
matrices and their Frechet derivatives, restricting fine-mesh matrices
to coarse bases, and reading and writing the matrix text format.
"""

from pathlib import Path

import numpy as np
from scipy import sparse

from src.core.config import Settings, get_settings
from src.core.constants import LOAD_BASIS_KIND, NDMATRIX_FORMAT
from src.core.exceptions import BasisMismatchError, MaterialError, ValidationError
from src.handlers.fem_handler import FemHandler
from src.models.dto import BackgroundFields, LameField, LoadBasis, Mesh, NdMatrix
from src.utils.file_utils import FileUtils
from src.utils.logging_utils import LoggerMixin
from src.utils.parallel_utils import ordered_map


def basis_fingerprint(mesh: Mesh) -> str:
    """Digest of the Neumann boundary geometry and the basis construction.

    Args:
        mesh: Mesh.

    Returns:
        SHA-256 hex digest.
    """
    edges = mesh.boundary_edges[mesh.neumann_edges]
    coords = mesh.nodes[edges].reshape(-1, 4)
    text = LOAD_BASIS_KIND + "\n" + "\n".join(
        " ".join(f"{v:.17g}" for v in row) for row in coords
    )
    return FileUtils.sha256_bytes(text.encode("utf-8"))


class NdMapHandler(LoggerMixin):
    """Handler for ND operator matrices.

    Column solves run through an ordered parallel map, so the assembled
    matrix does not depend on the thread count.
    """

    def __init__(
        self,
        fem: FemHandler | None = None,
        settings: Settings | None = None,
    ) -> None:
        """Initialize the ND map handler.

        Args:
            fem: FEM handler used for forward solves.
            settings: Process settings.
        """
        self.settings = settings or get_settings()
        self.fem = fem or FemHandler(self.settings)

    # -------------------------------------------------------------------------
    # Load basis
    # -------------------------------------------------------------------------

    def build_load_basis(self, mesh: Mesh) -> LoadBasis:
        """Build the per-edge indicator basis of the Neumann boundary.

        Args:
            mesh: Mesh.

        Returns:
            Orthonormal basis of size ``2 * (#Neumann edges)``.

        Raises:
            ValidationError: If the mesh has no Neumann edges.
        """
        edges = mesh.neumann_edges
        if edges.size == 0:
            raise ValidationError("Mesh has no Neumann edges", module="ndmap")
        return LoadBasis(
            edges=edges.copy(),
            endpoints=mesh.nodes[mesh.boundary_edges[edges]],
            lengths=mesh.edge_lengths[edges].copy(),
            fingerprint=basis_fingerprint(mesh),
        )

    def load_matrix(self, mesh: Mesh, basis: LoadBasis) -> sparse.csr_matrix:
        """Nodal loads of every basis element as columns, ``(2N, m)``.

        Args:
            mesh: Mesh.
            basis: Load basis of the mesh.

        Returns:
            Sparse load matrix.
        """
        pairs = mesh.boundary_edges[basis.edges]
        weight = 0.5 * np.sqrt(basis.lengths)
        rows, cols, vals = [], [], []
        for d in range(2):
            k = 2 * np.arange(len(pairs)) + d
            for end in range(2):
                rows.append(2 * pairs[:, end] + d)
                cols.append(k)
                vals.append(weight)
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * mesh.n_nodes, basis.size),
        )

    # -------------------------------------------------------------------------
    # ND matrices
    # -------------------------------------------------------------------------

    def assemble_nd_matrix(
        self,
        mesh: Mesh,
        field: LameField,
        basis: LoadBasis,
        threads: int | None = None,
    ) -> NdMatrix:
        """Assemble the ND matrix ``M_jk = int u_k . g_j`` of a field.

        Args:
            mesh: Mesh.
            field: Lame field on the mesh.
            basis: Load basis of the mesh.
            threads: Parallel map width.

        Returns:
            Symmetrized ND matrix.

        Raises:
            BasisMismatchError: If the basis was built on another boundary.
        """
        self._check_basis(mesh, basis)
        system = self.fem.assemble_system(mesh, field)
        width = threads or self.settings.threads

        def column(k: int) -> np.ndarray:
            u = self.fem.solve_neumann(system, basis.edge_values(k))
            return np.nan_to_num(u.nodal).ravel()

        solutions = np.column_stack(ordered_map(column, range(basis.size), width))
        raw = np.asarray(self.load_matrix(mesh, basis).T @ solutions)
        return self._symmetrized(raw, basis, field.provenance)

    def background_fields(
        self,
        mesh: Mesh,
        background: LameField,
        basis: LoadBasis,
        threads: int | None = None,
    ) -> tuple[NdMatrix, BackgroundFields]:
        """Background ND matrix together with the element fields of every load.

        Args:
            mesh: Mesh.
            background: All-finite background field.
            basis: Load basis of the mesh.
            threads: Parallel map width.

        Returns:
            ``(Lambda_0, stored fields)``.
        """
        self._check_basis(mesh, basis)
        if background.has_extreme:
            raise MaterialError("Background field must be all-finite")
        system = self.fem.assemble_system(mesh, background)
        width = threads or self.settings.threads

        def column(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            u = self.fem.solve_neumann(system, basis.edge_values(k))
            div, strain = self.fem.strain_components(u)
            return u.nodal.ravel(), div, strain

        results = ordered_map(column, range(basis.size), width)
        solutions = np.column_stack([r[0] for r in results])
        raw = np.asarray(self.load_matrix(mesh, basis).T @ solutions)
        nd = self._symmetrized(raw, basis, background.provenance)
        fields = BackgroundFields(
            fingerprint=basis.fingerprint,
            divergence=np.stack([r[1] for r in results]),
            strain=np.stack([r[2] for r in results]),
            areas=mesh.areas,
        )
        return nd, fields

    def _symmetrized(self, raw: np.ndarray, basis: LoadBasis, provenance: str) -> NdMatrix:
        norm = float(np.linalg.norm(raw, 2))
        asymmetry = float(np.linalg.norm(raw - raw.T, 2)) / norm if norm > 0 else 0.0
        if asymmetry > self.settings.symmetry_tol:
            self.logger.warning(
                "ND matrix asymmetric before symmetrization",
                asymmetry=asymmetry,
                provenance=provenance,
            )
        else:
            self.logger.debug("ND matrix assembled", asymmetry=asymmetry, size=basis.size)
        return NdMatrix(
            values=0.5 * (raw + raw.T),
            fingerprint=basis.fingerprint,
            provenance=provenance,
            asymmetry=asymmetry,
        )

    def region_gram(
        self,
        fields: BackgroundFields,
        elements: np.ndarray,
        div_weight: float = 1.0,
        strain_weight: float = 2.0,
    ) -> np.ndarray:
        """Energy Gram matrix of stored fields over an element set.

        ``G_jk = sum_e A_e (w_div div_j div_k + w_strain sym_j : sym_k)``.

        Args:
            fields: Stored background fields.
            elements: Boolean element mask.
            div_weight: Weight of the divergence term.
            strain_weight: Weight of the strain term.

        Returns:
            Symmetric positive semidefinite ``(m, m)`` matrix.
        """
        area = fields.areas[elements]
        div = fields.divergence[:, elements]
        strain = fields.strain[:, elements, :].reshape(fields.size, -1)
        gram = div_weight * (div * area) @ div.T
        gram += strain_weight * (strain * np.repeat(area, 3)) @ strain.T
        return 0.5 * (gram + gram.T)

    def assemble_frechet_matrix(
        self,
        mesh: Mesh,
        background: LameField,
        region: np.ndarray,
        beta: float,
        basis: LoadBasis,
        fields: BackgroundFields | None = None,
    ) -> NdMatrix:
        """Frechet derivative of the ND map for a shift ``beta`` on a region.

        ``(DL)_jk = -beta int_B div u_j div u_k + 2 sym u_j : sym u_k``.

        Args:
            mesh: Mesh.
            background: All-finite background field.
            region: Boolean element mask of the perturbed set.
            beta: Signed shift magnitude.
            basis: Load basis.
            fields: Stored background fields; computed when omitted.

        Returns:
            Derivative matrix.

        Raises:
            ValidationError: If the region is empty.
        """
        if not np.any(region):
            raise ValidationError("Frechet region is empty", module="ndmap")
        if fields is None:
            _, fields = self.background_fields(mesh, background, basis)
        if fields.fingerprint != basis.fingerprint:
            raise BasisMismatchError(basis.fingerprint, fields.fingerprint)
        return NdMatrix(
            values=-beta * self.region_gram(fields, region),
            fingerprint=basis.fingerprint,
            provenance=f"frechet(beta={beta:g})",
        )

    # -------------------------------------------------------------------------
    # Basis transfer
    # -------------------------------------------------------------------------

    def restriction_matrix(self, fine: LoadBasis, coarse: LoadBasis) -> np.ndarray:
        """Coarse loads expressed in a fine basis, ``(m_coarse, m_fine)``.

        A fine edge belongs to the coarse edge containing its midpoint and
        enters with weight ``sqrt(L_fine / L_coarse)``.

        Args:
            fine: Basis of a refined mesh.
            coarse: Basis of the coarse mesh.

        Returns:
            Restriction matrix.

        Raises:
            BasisMismatchError: If a fine edge lies on no coarse edge.
        """
        mids = fine.endpoints.mean(axis=1)
        a = coarse.endpoints[:, 0]
        d = coarse.endpoints[:, 1] - a
        rel = mids[:, None, :] - a[None, :, :]
        cross = rel[:, :, 0] * d[None, :, 1] - rel[:, :, 1] * d[None, :, 0]
        along = np.einsum("fck,ck->fc", rel, d) / coarse.lengths**2
        tol = 1e-9
        on = (np.abs(cross) <= tol * coarse.lengths) & (along > -tol) & (along < 1 + tol)
        if not np.all(on.sum(axis=1) == 1):
            raise BasisMismatchError(coarse.fingerprint, fine.fingerprint, module="reconstruct")
        owner = on.argmax(axis=1)
        weights = np.sqrt(fine.lengths / coarse.lengths[owner])
        r = np.zeros((coarse.size, fine.size))
        f = np.arange(len(owner))
        for comp in range(2):
            r[2 * owner + comp, 2 * f + comp] = weights
        return r

    def restrict(self, matrix: NdMatrix, fine: LoadBasis, coarse: LoadBasis) -> NdMatrix:
        """Express a fine-basis ND matrix in a coarse basis.

        Args:
            matrix: Matrix in the fine basis.
            fine: Fine basis.
            coarse: Coarse basis.

        Returns:
            Matrix in the coarse basis.
        """
        if matrix.fingerprint != fine.fingerprint:
            raise BasisMismatchError(fine.fingerprint, matrix.fingerprint)
        r = self.restriction_matrix(fine, coarse)
        values = r @ matrix.values @ r.T
        return NdMatrix(
            values=0.5 * (values + values.T),
            fingerprint=coarse.fingerprint,
            provenance=f"restricted({matrix.provenance})",
            asymmetry=matrix.asymmetry,
        )

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def serialize(self, matrix: NdMatrix) -> str:
        """Text form: header lines then rows with 17 significant digits."""
        header = [
            f"# {NDMATRIX_FORMAT}",
            f"fingerprint {matrix.fingerprint}",
            f"provenance {matrix.provenance}",
            f"dimension {matrix.size}",
        ]
        rows = [" ".join(f"{v:.16e}" for v in row) for row in matrix.values]
        return "\n".join(header + rows) + "\n"

    def parse(self, text: str) -> NdMatrix:
        """Inverse of :meth:`serialize`.

        Raises:
            ValidationError: On a malformed header or row count.
        """
        lines = text.splitlines()
        if len(lines) < 4 or lines[0] != f"# {NDMATRIX_FORMAT}":
            raise ValidationError("Not an ND matrix file", module="ndmap")
        try:
            fingerprint = lines[1].split(" ", 1)[1]
            provenance = lines[2].split(" ", 1)[1]
            size = int(lines[3].split(" ", 1)[1])
            values = np.array([[float(v) for v in line.split()] for line in lines[4:]])
        except (IndexError, ValueError) as e:
            raise ValidationError(f"Malformed ND matrix file: {e}", module="ndmap") from e
        if values.shape != (size, size):
            raise ValidationError(
                f"ND matrix file has shape {values.shape}, header says {size}",
                module="ndmap",
            )
        return NdMatrix(values=values, fingerprint=fingerprint, provenance=provenance)

    def write(self, matrix: NdMatrix, path: str | Path) -> Path:
        return FileUtils.write_text(path, self.serialize(matrix))

    def read(self, path: str | Path) -> NdMatrix:
        return self.parse(FileUtils.read_text(path))

    def _check_basis(self, mesh: Mesh, basis: LoadBasis) -> None:
        expected = basis_fingerprint(mesh)
        if basis.fingerprint != expected:
            raise BasisMismatchError(expected, basis.fingerprint)
