"""Free-abelian cover of the torus: winding map, scalings, compact windows.

The cover of the flat cell [0,1)^n is R^n with deck group Z^n. A basis of
closed one-forms omega_i = c_i . dx + d phi_i (constant covector plus the
differential of a periodic potential) defines the winding map

    G_i(x) = c_i . (x - x0) + phi_i(x mod 1) - phi_i(x0 mod 1),

whose rescaling eps * G carries cover points to homology coordinates. All
maps here are pure functions over immutable form data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateForms


@dataclass(frozen=True)
class ClosedOneForm:
    """constant . dx + d(potential); potential periodic on the cell or None."""

    constant: np.ndarray
    potential: Optional[object] = None  # Expression-like: callable with .gradient

    def __post_init__(self):
        object.__setattr__(self, "constant", np.asarray(self.constant, dtype=float))
        if self.potential is not None and hasattr(self.potential, "is_cell_periodic"):
            if not self.potential.is_cell_periodic():
                raise ValueError("form potential must have period one on every axis")

    @property
    def dim(self):
        return self.constant.shape[0]

    def covector(self, x):
        """The form's value c + grad(phi) at cell points x, shape (..., n)."""
        x = np.asarray(x, dtype=float)
        out = np.broadcast_to(self.constant, x.shape).copy()
        if self.potential is not None:
            out = out + self.potential.gradient(np.mod(x, 1.0))
        return out

    def sup_norm(self, res=512):
        """Max Euclidean norm of the form over a dense cell grid."""
        from .hamiltonian import cell_grid

        xg = cell_grid(self.dim, res if self.dim == 1 else min(res, 64))
        return float(np.max(np.linalg.norm(self.covector(xg), axis=-1)))

    def potential_bound(self, res=512):
        """Max |phi| over a dense cell grid (zero for the trivial form)."""
        if self.potential is None:
            return 0.0
        from .hamiltonian import cell_grid

        xg = cell_grid(self.dim, res if self.dim == 1 else min(res, 64))
        return float(np.max(np.abs(self.potential(xg))))


def coordinate_forms(dim):
    """The default basis omega_i = dx_i."""
    return [ClosedOneForm(constant=np.eye(dim)[i]) for i in range(dim)]


def constant_matrix(forms):
    """Rows are the constant parts c_i of the basis forms."""
    return np.stack([f.constant for f in forms], axis=0)


def period_map(forms, x, x0=None):
    """Winding coordinates of cover points x relative to base point x0.

    Component i is the line integral of form i from x0 to x; with closed
    forms this reduces to c_i . (x - x0) + phi_i(x mod 1) - phi_i(x0 mod 1).
    Total function: no preconditions beyond matching dimensions.
    """
    x = np.asarray(x, dtype=float)
    n = forms[0].dim
    if x0 is None:
        x0 = np.zeros(n)
    x0 = np.asarray(x0, dtype=float)
    A = constant_matrix(forms)
    out = (x - x0) @ A.T
    for i, f in enumerate(forms):
        if f.potential is not None:
            out[..., i] = out[..., i] + f.potential(np.mod(x, 1.0)) - f.potential(np.mod(x0, 1.0))
    return out


def f_eps(eps, g_value):
    """Rescaled winding coordinates eps * G(x)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps * np.asarray(g_value, dtype=float)


def lipschitz_bound_G(forms, res=512):
    """max_i sup_x |omega_i(x)|, a Lipschitz constant for the winding map."""
    return max(f.sup_norm(res) for f in forms)


@dataclass(frozen=True)
class CoverWindow:
    """Box of lattice cells [-R, R]^n with cell_res grid points per cell.

    Grid nodes span cover coordinates [-R, R+1] per axis at spacing
    1/cell_res. `margin` is the valid radius remaining in scaled units; time
    evolution shrinks it.
    """

    box_radius: int
    cell_res: int
    margin: float

    def __post_init__(self):
        if self.box_radius < 0 or self.cell_res <= 0:
            raise ValueError("box_radius must be >= 0 and cell_res positive")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")

    @property
    def points_per_axis(self):
        return (2 * self.box_radius + 1) * self.cell_res + 1

    def axis_nodes(self):
        """Cover coordinates of the grid nodes along one axis."""
        return -self.box_radius + np.arange(self.points_per_axis) / self.cell_res

    @property
    def spacing(self):
        return 1.0 / self.cell_res


def preimage_window(eps, center, r, forms, cell_res, extra_cells=0):
    """Cell box guaranteed to contain the F_eps-preimage of the closed r-ball.

    Conservative inverse-Lipschitz estimate in the l1 norm on winding
    coordinates: radius (|center|_1 + r)/(eps lambda_min) plus the winding
    inflation ceil(2 max|phi| k / (eps lambda_min)), where lambda_min is the
    smallest singular value of the constant-part matrix. Finite because the
    map is proper; DegenerateForms when the constant parts are dependent.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    A = constant_matrix(forms)
    smin = float(np.linalg.svd(A, compute_uv=False)[-1])
    if smin < 1e-12:
        raise DegenerateForms("constant parts of the basis forms are linearly dependent")
    base = (float(np.sum(np.abs(center))) + r) / (eps * smin)
    osc = sum(f.potential_bound() for f in forms)
    inflation = math.ceil(2.0 * osc / (eps * smin)) if osc > 0 else 0
    radius = math.ceil(base) + inflation + extra_cells
    margin = eps * (radius + 0.5)  # scaled half-width of the covered box
    return CoverWindow(box_radius=radius, cell_res=cell_res, margin=margin)
