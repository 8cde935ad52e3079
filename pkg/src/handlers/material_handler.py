"""Material handler for Lame parameter fields.

This module provides functionality for building per-element Lame fields
with finite, cavity and rigid states, truncating extreme states to finite
ones, and checking the contrast hypotheses of linearized tests.
"""

from collections.abc import Mapping

import numpy as np

from src.core.enums import InclusionKind
from src.core.exceptions import MaterialError, ParameterRangeError
from src.handlers.mesh_handler import is_edge_connected
from src.models.dto import (
    STATE_CODES,
    BetaBounds,
    LameField,
    LinearizedBoundsReport,
    MaterialState,
    Mesh,
)
from src.utils.logging_utils import LoggerMixin


class MaterialHandler(LoggerMixin):
    """Handler for Lame parameter fields.

    Fields are immutable; every operation returns a new field.
    """

    def make_lame_field(
        self,
        mesh: Mesh,
        background: tuple[float, float] | tuple[np.ndarray, np.ndarray],
        assignments: Mapping[str, MaterialState] | None = None,
        provenance: str = "field",
    ) -> LameField:
        """Build a field from a background and per-region states.

        Args:
            mesh: Labeled mesh.
            background: Background ``(lam0, mu0)``, constants or per-element arrays.
            assignments: Region id to state; unassigned elements stay background.
            provenance: Origin tag.

        Returns:
            Lame field.

        Raises:
            MaterialError: On non-positive parameters, unknown region ids, or
                cavities disconnecting the domain.
        """
        m = mesh.n_elements
        lam0 = np.broadcast_to(np.asarray(background[0], dtype=float), (m,)).copy()
        mu0 = np.broadcast_to(np.asarray(background[1], dtype=float), (m,)).copy()
        if np.any(lam0 <= 0.0) or np.any(mu0 <= 0.0):
            raise MaterialError("Background parameters must be positive")

        state = np.zeros(m, dtype=np.int8)
        lam, mu = lam0.copy(), mu0.copy()
        for region_id, material in (assignments or {}).items():
            if region_id not in mesh.region_ids:
                raise MaterialError(
                    f"Unknown region '{region_id}'", details={"region_id": region_id}
                )
            members = mesh.region_mask(region_id)
            self._assign(state, lam, mu, members, material, region_id)

        return self._finish(mesh, state, lam, mu, lam0, mu0, provenance)

    def from_masks(
        self,
        background: LameField,
        cavity: np.ndarray | None = None,
        rigid: np.ndarray | None = None,
        provenance: str = "field",
    ) -> LameField:
        """Background field with element masks turned extreme.

        Args:
            background: All-finite field.
            cavity: Elements to make cavities.
            rigid: Elements to make rigid.
            provenance: Origin tag.

        Returns:
            Lame field.
        """
        state = background.state.copy()
        lam, mu = background.lam.copy(), background.mu.copy()
        if cavity is not None:
            self._assign(state, lam, mu, cavity, MaterialState.cavity(), "cavity")
        if rigid is not None:
            self._assign(state, lam, mu, rigid, MaterialState.rigid(), "rigid")
        return self._finish(
            background.mesh, state, lam, mu, background.lam0, background.mu0, provenance
        )

    def perturbed(
        self,
        background: LameField,
        elements: np.ndarray,
        beta: float,
        provenance: str = "perturbed",
    ) -> LameField:
        """Background field with both parameters shifted by ``beta`` on a set.

        Args:
            background: All-finite field.
            elements: Boolean element mask.
            beta: Signed shift.
            provenance: Origin tag.

        Returns:
            Lame field.

        Raises:
            MaterialError: If a shifted parameter becomes non-positive.
        """
        lam = background.lam0 + beta * elements
        mu = background.mu0 + beta * elements
        if np.any(lam <= 0.0) or np.any(mu <= 0.0):
            raise MaterialError(
                f"Shift beta={beta:g} makes parameters non-positive",
                details={"beta": beta},
            )
        return LameField(
            mesh=background.mesh,
            state=np.zeros(background.mesh.n_elements, dtype=np.int8),
            lam=lam,
            mu=mu,
            lam0=background.lam0.copy(),
            mu0=background.mu0.copy(),
            provenance=provenance,
        )

    def truncate_extreme(self, field: LameField, eps: float) -> LameField:
        """Replace extreme states by finite approximations.

        Cavities become ``eps`` times the background and rigid elements the
        background divided by ``eps``; finite elements are unchanged.

        Args:
            field: Field, possibly with extreme states.
            eps: Truncation level in (0, 1).

        Returns:
            All-finite field.

        Raises:
            ParameterRangeError: If eps is not in (0, 1).
        """
        if not 0.0 < eps < 1.0:
            raise ParameterRangeError("eps", eps, "0 < eps < 1", module="materials")
        cavity, rigid = field.cavity_mask, field.rigid_mask
        lam = np.where(cavity, eps * field.lam0, np.where(rigid, field.lam0 / eps, field.lam))
        mu = np.where(cavity, eps * field.mu0, np.where(rigid, field.mu0 / eps, field.mu))
        return LameField(
            mesh=field.mesh,
            state=np.zeros_like(field.state),
            lam=lam,
            mu=mu,
            lam0=field.lam0.copy(),
            mu0=field.mu0.copy(),
            provenance=f"{field.provenance}|eps={eps:g}",
        )

    def beta_bounds(self, field: LameField) -> BetaBounds:
        """Bounds of the background parameters.

        Args:
            field: Any field; only its background is read.

        Returns:
            Beta bounds.
        """
        return BetaBounds(
            beta_L=float(min(field.lam0.min(), field.mu0.min())),
            beta_U=float(max(field.lam0.max(), field.mu0.max())),
        )

    def validate_linearized_bounds(
        self,
        field: LameField,
        beta: float,
        bounds: BetaBounds,
    ) -> LinearizedBoundsReport:
        """Check the contrast hypotheses of the linearized outer test.

        Increases over the background must not exceed ``beta`` and
        decreases must stay above ``-beta / (1 + beta) * beta_L``.

        Args:
            field: All-finite field.
            beta: Contrast bound.
            bounds: Background bounds.

        Returns:
            Report; ``ok`` iff both inequalities hold.

        Raises:
            MaterialError: If the field has extreme states.
        """
        if field.has_extreme:
            raise MaterialError("Linearized bounds require an all-finite field")
        d_lam = field.lam - field.lam0
        d_mu = field.mu - field.mu0
        sup_increase = float(max(d_lam.max(), d_mu.max(), 0.0))
        inf_decrease = float(min(d_lam.min(), d_mu.min(), 0.0))
        decrease_limit = -beta / (1.0 + beta) * bounds.beta_L

        violations = []
        if sup_increase > beta:
            violations.append(
                f"max parameter increase {sup_increase:g} exceeds beta={beta:g}"
            )
        if inf_decrease < decrease_limit:
            violations.append(
                f"min parameter change {inf_decrease:g} is below "
                f"-beta/(1+beta)*beta_L={decrease_limit:g}"
            )
        return LinearizedBoundsReport(
            beta=beta,
            sup_increase=sup_increase,
            inf_decrease=inf_decrease,
            decrease_limit=decrease_limit,
            violations=tuple(violations),
        )

    def _assign(
        self,
        state: np.ndarray,
        lam: np.ndarray,
        mu: np.ndarray,
        members: np.ndarray,
        material: MaterialState,
        label: str,
    ) -> None:
        state[members] = STATE_CODES[material.kind]
        if material.kind == InclusionKind.FINITE:
            if material.lam is None or material.mu is None or material.lam <= 0.0 or material.mu <= 0.0:
                raise MaterialError(
                    f"Finite parameters of '{label}' must be positive",
                    details={"region_id": label, "lam": material.lam, "mu": material.mu},
                )
            lam[members], mu[members] = material.lam, material.mu
        elif material.kind == InclusionKind.CAVITY:
            lam[members], mu[members] = 0.0, 0.0
        else:
            lam[members], mu[members] = np.inf, np.inf

    def _finish(
        self,
        mesh: Mesh,
        state: np.ndarray,
        lam: np.ndarray,
        mu: np.ndarray,
        lam0: np.ndarray,
        mu0: np.ndarray,
        provenance: str,
    ) -> LameField:
        cavity = state == STATE_CODES[InclusionKind.CAVITY]
        if cavity.any() and not is_edge_connected(mesh, ~cavity):
            raise MaterialError("Cavity elements disconnect the domain")
        field = LameField(
            mesh=mesh,
            state=state,
            lam=lam,
            mu=mu,
            lam0=np.array(lam0, dtype=float),
            mu0=np.array(mu0, dtype=float),
            provenance=provenance,
        )
        if not field.ucp_verified:
            self.logger.warning("Spatially varying background, UCP unverified")
        return field
