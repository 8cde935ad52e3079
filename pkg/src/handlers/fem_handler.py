"""FEM handler for the discrete elasticity problem.

This module provides functionality for assembling P1 vector-valued
stiffness systems with cavity removal and rigid-body condensation,
solving Neumann problems, extending solutions into cavities, and
evaluating per-element fields and energies.

Nodal unknowns are interleaved: node ``i`` owns columns ``2i`` (x) and
``2i + 1`` (y).
"""

import threading
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg, splu

from src.core.config import Settings, get_settings
from src.core.exceptions import MaterialError, SingularSystemError, SolverError, ValidationError
from src.models.dto import (
    DiscreteSystem,
    Displacement,
    ElementFields,
    LameField,
    Mesh,
)
from src.models.schemas import RegionSpec
from src.utils.logging_utils import LoggerMixin

SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=16)
def element_operators(mesh: Mesh) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Sparse maps from nodal unknowns to per-element divergence and strain.

    The strain operator returns ``[e11, e22, sqrt(2) e12]`` per element, so
    its Euclidean product equals the Frobenius product of symmetric
    gradients.

    Args:
        mesh: Mesh.

    Returns:
        ``(div, sym)`` of shapes ``(M, 2N)`` and ``(3M, 2N)``.
    """
    m, n = mesh.n_elements, mesh.n_nodes
    g = mesh.basis_gradients
    ux = 2 * mesh.elements
    uy = ux + 1
    gx, gy = g[:, :, 0], g[:, :, 1]

    rows = np.repeat(np.arange(m), 6)
    cols = np.column_stack([ux, uy]).ravel()
    div = sparse.csr_matrix(
        (np.column_stack([gx, gy]).ravel(), (rows, cols)), shape=(m, 2 * n)
    )

    e = np.arange(m)
    sym_rows = np.concatenate(
        [
            np.repeat(3 * e, 3),
            np.repeat(3 * e + 1, 3),
            np.repeat(3 * e + 2, 3),
            np.repeat(3 * e + 2, 3),
        ]
    )
    sym_cols = np.concatenate([ux.ravel(), uy.ravel(), ux.ravel(), uy.ravel()])
    sym_vals = np.concatenate(
        [gx.ravel(), gy.ravel(), gy.ravel() / SQRT2, gx.ravel() / SQRT2]
    )
    sym = sparse.csr_matrix((sym_vals, (sym_rows, sym_cols)), shape=(3 * m, 2 * n))
    return div, sym


class FemHandler(LoggerMixin):
    """Handler for stiffness assembly and solves.

    Systems are immutable after assembly, so concurrent solves against the
    same system are safe. The handler counts Neumann solves.
    """

    def __init__(self, settings: Settings | None = None) -> None:
        """Initialize the FEM handler.

        Args:
            settings: Solver tolerances; defaults to the process settings.
        """
        self.settings = settings or get_settings()
        self._solve_count = 0
        self._lock = threading.Lock()

    @property
    def solve_count(self) -> int:
        """Number of Neumann solves performed so far."""
        return self._solve_count

    def reset_solve_count(self) -> None:
        with self._lock:
            self._solve_count = 0

    # -------------------------------------------------------------------------
    # Assembly
    # -------------------------------------------------------------------------

    def stiffness_matrix(
        self,
        field: LameField,
        elements: np.ndarray | None = None,
        use_background: bool = False,
    ) -> sparse.csr_matrix:
        """Unreduced stiffness matrix over all ``2N`` nodal unknowns.

        Extreme elements contribute nothing.

        Args:
            field: Lame field.
            elements: Optional element mask restricting the sum.
            use_background: Weight with the background parameters instead.

        Returns:
            Symmetric ``(2N, 2N)`` matrix.
        """
        mesh = field.mesh
        div, sym = element_operators(mesh)
        if use_background:
            lam, mu = field.lam0, field.mu0
            active = np.ones(mesh.n_elements, dtype=bool)
        else:
            active = field.finite_mask
            lam = np.where(active, field.lam, 0.0)
            mu = np.where(active, field.mu, 0.0)
        if elements is not None:
            active = active & elements
        area = np.where(active, mesh.areas, 0.0)
        k_div = div.T @ sparse.diags(area * lam) @ div
        k_sym = sym.T @ sparse.diags(np.repeat(2.0 * area * mu, 3)) @ sym
        return (k_div + k_sym).tocsr()

    def assemble_system(self, mesh: Mesh, field: LameField) -> DiscreteSystem:
        """Assemble and factor the reduced system of a field.

        Dirichlet nodes and cavity-interior nodes are eliminated; every
        rigid component is condensed to three rigid-motion coordinates
        about its node centroid.

        Args:
            mesh: Mesh the field lives on.
            field: Lame field.

        Returns:
            Discrete system.

        Raises:
            ValidationError: If the field lives on another mesh.
            MaterialError: If a rigid component touches the Dirichlet boundary.
        """
        if field.mesh is not mesh:
            raise ValidationError("Field belongs to another mesh", module="fem")

        stiffness = self.stiffness_matrix(field)
        removed = self._removed_nodes(field)
        components = self._rigid_components(field)
        transform = self._transform(mesh, removed, components)
        reduced = (transform.T @ stiffness @ transform).tocsc()

        asym = abs(reduced - reduced.T).max() if reduced.nnz else 0.0
        scale = abs(reduced).max() if reduced.nnz else 1.0
        if asym > 1e-12 * scale:
            self.logger.warning("Reduced stiffness asymmetric", asymmetry=float(asym / scale))

        if reduced.shape[0] == 0:
            raise SingularSystemError("Reduced system has no unknowns")
        try:
            factor = splu(reduced)
        except RuntimeError as e:
            self.logger.warning("Factorization failed, using iterative solver", error=str(e))
            factor = None

        self.logger.debug(
            "System assembled",
            dofs=int(reduced.shape[0]),
            rigid_components=len(components),
            removed_nodes=int(removed.sum()),
            provenance=field.provenance,
        )
        return DiscreteSystem(
            mesh=mesh,
            field=field,
            stiffness=stiffness,
            transform=transform,
            reduced=reduced,
            factor=factor,
            rigid_components=tuple(components),
            removed_nodes=removed,
        )

    def load_vector(self, mesh: Mesh, tractions: np.ndarray) -> np.ndarray:
        """Consistent nodal load of per-edge constant tractions.

        Args:
            mesh: Mesh.
            tractions: Traction vectors per Neumann edge, shape ``(K, 2)``.

        Returns:
            Nodal load, length ``2N``.
        """
        edges = mesh.boundary_edges[mesh.neumann_edges]
        half = 0.5 * mesh.edge_lengths[mesh.neumann_edges][:, None] * tractions
        load = np.zeros((mesh.n_nodes, 2))
        np.add.at(load, edges[:, 0], half)
        np.add.at(load, edges[:, 1], half)
        return load.ravel()

    # -------------------------------------------------------------------------
    # Solves
    # -------------------------------------------------------------------------

    def solve_neumann(self, system: DiscreteSystem, tractions: np.ndarray) -> Displacement:
        """Solve for the displacement of per-edge constant Neumann tractions.

        Args:
            system: Assembled system.
            tractions: Traction vectors per Neumann edge, shape ``(K, 2)``.

        Returns:
            Displacement, NaN on removed nodes.

        Raises:
            SolverError: If the relative residual exceeds the tolerance.
        """
        with self._lock:
            self._solve_count += 1
        mesh = system.mesh
        rhs = system.transform.T @ self.load_vector(mesh, np.asarray(tractions, dtype=float))
        x = self._solve(system.reduced, system.factor, rhs)
        nodal = (system.transform @ x).reshape(-1, 2)
        nodal[system.removed_nodes] = np.nan
        field = system.field
        return Displacement(
            mesh=mesh,
            nodal=nodal,
            defined_elements=~field.cavity_mask,
            rigid_elements=field.rigid_mask.copy(),
        )

    def extend_E(self, mesh: Mesh, field: LameField, u: Displacement) -> Displacement:
        """Extend a displacement into cavities.

        Cavity-interior nodes receive the solution of the background
        Dirichlet problem on the cavity elements with the outside trace as
        boundary data. Values outside cavities are kept exactly.

        Args:
            mesh: Mesh of the field and the displacement.
            field: Field with cavities.
            u: Displacement solved for that field.

        Returns:
            Displacement defined on every element.

        Raises:
            ValidationError: If the field or the displacement lives on another mesh.
        """
        if field.mesh is not mesh or u.mesh is not mesh:
            raise ValidationError("Extension needs field and displacement on the given mesh", module="fem")
        cavity = field.cavity_mask
        if not cavity.any():
            return u
        inner = self._removed_nodes(field)
        nodal = u.nodal.copy()
        if inner.any():
            k = self.stiffness_matrix(field, elements=cavity, use_background=True)
            inner_dofs = np.flatnonzero(np.repeat(inner, 2))
            outer_dofs = np.flatnonzero(np.repeat(~inner, 2))
            k_ii = k[inner_dofs][:, inner_dofs].tocsc()
            k_ib = k[inner_dofs][:, outer_dofs]
            known = nodal.ravel()[outer_dofs]
            rhs = -(k_ib @ known)
            try:
                factor = splu(k_ii)
            except RuntimeError:
                factor = None
            x = self._solve(k_ii, factor, rhs)
            flat = nodal.ravel()
            flat[inner_dofs] = x
            nodal = flat.reshape(-1, 2)
        return Displacement(
            mesh=mesh,
            nodal=nodal,
            defined_elements=np.ones(mesh.n_elements, dtype=bool),
            rigid_elements=u.rigid_elements.copy(),
            extended=True,
        )

    # -------------------------------------------------------------------------
    # Element fields and energies
    # -------------------------------------------------------------------------

    def element_fields(
        self, u: Displacement, elements: np.ndarray | None = None
    ) -> ElementFields:
        """Per-element divergence and symmetric gradient.

        Rigid elements report exact zeros.

        Args:
            u: Displacement.
            elements: Queried element mask; all elements by default.

        Returns:
            Fields over all elements, NaN outside the query.

        Raises:
            ValidationError: If a queried element is undefined (cavity
                before extension).
        """
        mesh = u.mesh
        query = np.ones(mesh.n_elements, dtype=bool) if elements is None else elements
        if np.any(query & ~u.defined_elements):
            raise ValidationError(
                "Cavity elements queried before extension", module="fem"
            )
        values = u.nodal[mesh.elements]
        jac = np.einsum("eai,eaj->eij", values, mesh.basis_gradients)
        sym = 0.5 * (jac + np.transpose(jac, (0, 2, 1)))
        div = np.trace(jac, axis1=1, axis2=2)
        sym[u.rigid_elements] = 0.0
        div[u.rigid_elements] = 0.0
        sym[~query] = np.nan
        div[~query] = np.nan
        return ElementFields(divergence=div, sym_grad=sym)

    def strain_components(self, u: Displacement) -> tuple[np.ndarray, np.ndarray]:
        """Divergence and ``[e11, e22, sqrt(2) e12]`` per element.

        Args:
            u: Displacement defined on every element.

        Returns:
            ``(divergence (M,), strain (M, 3))``.
        """
        fields = self.element_fields(u)
        s = fields.sym_grad
        strain = np.column_stack([s[:, 0, 0], s[:, 1, 1], SQRT2 * s[:, 0, 1]])
        return fields.divergence, strain

    def energy_on_region(
        self,
        u: Displacement,
        field: LameField,
        region: RegionSpec | np.ndarray,
    ) -> tuple[float, float]:
        """Divergence and shear energies over a region.

        Args:
            u: Displacement defined on the region.
            field: Weighting field; extreme elements weigh zero.
            region: Region spec or boolean element mask.

        Returns:
            ``(int lam |div u|^2, int 2 mu |sym grad u|_F^2)``.
        """
        mesh = u.mesh
        if isinstance(region, RegionSpec):
            mask = region.shape.contains(mesh.barycenters)
        else:
            mask = np.asarray(region, dtype=bool)
        weight = mask & field.finite_mask
        if not weight.any():
            return 0.0, 0.0
        fields = self.element_fields(u, weight)
        area = mesh.areas[weight]
        div = fields.divergence[weight]
        sym = fields.sym_grad[weight]
        e_div = float(np.sum(area * field.lam[weight] * div**2))
        e_sym = float(np.sum(area * 2.0 * field.mu[weight] * np.sum(sym**2, axis=(1, 2))))
        return e_div, e_sym

    def boundary_work(self, u: Displacement, tractions: np.ndarray) -> float:
        """Work ``int_{Gamma_N} g . u`` of per-edge constant tractions.

        Args:
            u: Displacement.
            tractions: Traction vectors per Neumann edge.

        Returns:
            Boundary work.
        """
        load = self.load_vector(u.mesh, np.asarray(tractions, dtype=float))
        return float(load @ np.nan_to_num(u.nodal).ravel())

    # -------------------------------------------------------------------------
    # Internals
    # -------------------------------------------------------------------------

    def _solve(self, matrix: sparse.csc_matrix, factor, rhs: np.ndarray) -> np.ndarray:
        norm = float(np.linalg.norm(rhs))
        if norm == 0.0:
            return np.zeros_like(rhs)
        if factor is not None:
            x = factor.solve(rhs)
            for _ in range(self.settings.refinement_steps):
                x += factor.solve(rhs - matrix @ x)
        else:
            x, info = cg(matrix, rhs, rtol=self.settings.solver_rtol, maxiter=20 * matrix.shape[0])
            if info < 0:
                raise SingularSystemError("Iterative solver breakdown")
        residual = float(np.linalg.norm(matrix @ x - rhs)) / norm
        if not np.isfinite(residual) or residual > self.settings.residual_tol:
            raise SolverError(residual)
        return x

    def _removed_nodes(self, field: LameField) -> np.ndarray:
        mesh = field.mesh
        kept = np.zeros(mesh.n_nodes, dtype=bool)
        kept[mesh.elements[~field.cavity_mask].ravel()] = True
        return ~kept

    def _rigid_components(self, field: LameField) -> list[np.ndarray]:
        mesh = field.mesh
        rigid = field.rigid_mask
        if not rigid.any():
            return []
        tri = mesh.elements[rigid]
        pairs = tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        graph = sparse.coo_matrix(
            (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
            shape=(mesh.n_nodes, mesh.n_nodes),
        )
        _, labels = connected_components(graph, directed=False)
        rigid_nodes = np.zeros(mesh.n_nodes, dtype=bool)
        rigid_nodes[tri.ravel()] = True
        components = [
            np.flatnonzero(rigid_nodes & (labels == label))
            for label in np.unique(labels[rigid_nodes])
        ]
        for nodes in components:
            if mesh.dirichlet_nodes[nodes].any():
                raise MaterialError("Rigid component touches the Dirichlet boundary")
        return components

    def _transform(
        self,
        mesh: Mesh,
        removed: np.ndarray,
        components: list[np.ndarray],
    ) -> sparse.csr_matrix:
        n = mesh.n_nodes
        rigid = np.zeros(n, dtype=bool)
        for nodes in components:
            rigid[nodes] = True
        free = np.flatnonzero(~(removed | mesh.dirichlet_nodes | rigid))

        rows = [2 * free, 2 * free + 1]
        cols = [2 * np.arange(len(free)), 2 * np.arange(len(free)) + 1]
        vals = [np.ones(len(free)), np.ones(len(free))]
        offset = 2 * len(free)
        for nodes in components:
            rel = mesh.nodes[nodes] - mesh.nodes[nodes].mean(axis=0)
            ones = np.ones(len(nodes))
            # u = a + b * (-(y - cy), x - cx)
            rows += [2 * nodes, 2 * nodes + 1, 2 * nodes, 2 * nodes + 1]
            cols += [
                np.full(len(nodes), offset),
                np.full(len(nodes), offset + 1),
                np.full(len(nodes), offset + 2),
                np.full(len(nodes), offset + 2),
            ]
            vals += [ones, ones, -rel[:, 1], rel[:, 0]]
            offset += 3
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(2 * n, offset),
        )
