"""Batched per-element quadrature data shared by the flow, transport and error code."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fe import eval_basis, physical_hessians, quadrature_rule
from .mesh import DofMap, Mesh

DEFAULT_QUAD_DEGREE = 6


@dataclass(frozen=True, eq=False)
class ElementQuadrature:
    """Basis data at every quadrature point of every triangle.

    Shapes use e = element, q = quadrature point, n = local basis function.
    """

    weights: np.ndarray  # (e, q) reference weight times |det J|
    points: np.ndarray  # (e, q, 2)
    p2_vals: np.ndarray  # (q, 6)
    p2_grads: np.ndarray  # (e, q, 6, 2)
    p2_hess: np.ndarray  # (e, q, 6, 2, 2)
    p1_vals: np.ndarray  # (q, 3)
    p1_grads: np.ndarray  # (e, 3, 2)

    @property
    def p2_lap(self) -> np.ndarray:
        return self.p2_hess[..., 0, 0] + self.p2_hess[..., 1, 1]


@lru_cache(maxsize=4)
def element_quadrature(mesh: Mesh, degree: int = DEFAULT_QUAD_DEGREE) -> ElementQuadrature:
    rule = quadrature_rule(degree)
    geom = mesh.geometry
    n2, g2, h2 = eval_basis(2, rule.points)
    n1, g1, _ = eval_basis(1, rule.points)
    return ElementQuadrature(
        weights=geom.det[:, None] * rule.weights[None, :],
        points=geom.map_points(rule.points),
        p2_vals=n2,
        p2_grads=np.einsum("eij,qnj->eqni", geom.inv_t, g2),
        p2_hess=physical_hessians(geom, h2),
        p1_vals=n1,
        p1_grads=np.einsum("eij,nj->eni", geom.inv_t, g1[0]),
    )


def evaluate(eq: ElementQuadrature, dofmap: DofMap, coeffs: np.ndarray
             ) -> tuple[np.ndarray, np.ndarray]:
    """Values (e, q) and gradients (e, q, 2) of a discrete field at quadrature points."""
    local = coeffs[dofmap.cell_to_dofs]
    if dofmap.degree == 2:
        vals = local @ eq.p2_vals.T
        grads = np.einsum("en,eqni->eqi", local, eq.p2_grads)
    else:
        vals = local @ eq.p1_vals.T
        grads = np.broadcast_to(np.einsum("en,eni->ei", local, eq.p1_grads)[:, None, :],
                                vals.shape + (2,))
    return vals, grads
