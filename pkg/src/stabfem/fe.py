"""Reference-triangle P1/P2 Lagrange bases, quadrature and affine geometry.

The reference triangle has vertices (0,0), (1,0), (0,1) with barycentric
coordinates l0 = 1 - xi - eta, l1 = xi, l2 = eta.  Local P2 numbering is
vertices 0,1,2 followed by the midpoints of edges (0,1), (1,2), (2,0).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# Local P2 edge node k+3 sits on the edge joining these local vertices.
P2_EDGES = np.array([[0, 1], [1, 2], [2, 0]])

# Barycentric gradients (constant on the reference triangle).
_DL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])

REFERENCE_NODES = {
    1: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    2: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                 [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Symmetric rule on the reference triangle; weights sum to 1/2."""

    degree: int
    points: np.ndarray  # (nq, 2) reference coordinates
    weights: np.ndarray  # (nq,)

    @property
    def n_points(self) -> int:
        return len(self.weights)


def _orbit3(a: float) -> list[tuple[float, float, float]]:
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a: float, b: float) -> list[tuple[float, float, float]]:
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


# (barycentric orbit generator args, weight) per degree; weights already
# scaled to the reference area 1/2.  Values are Dunavant's rules refined by
# Newton iteration on the moment equations.
_RULES = {
    2: [(_orbit3, (1.0 / 6.0,), 1.0 / 6.0)],
    4: [
        (_orbit3, (0.44594849091596488632,), 0.11169079483900573285),
        (_orbit3, (0.09157621350977074346,), 0.054975871827660933819),
    ],
    6: [
        (_orbit3, (0.24928674517091042129,), 0.058393137863189683013),
        (_orbit3, (0.06308901449150222834,), 0.02542245318510340846),
        (_orbit6, (0.053145049844816947353, 0.31035245103378440542),
         0.041425537809186787597),
    ],
}


@lru_cache(maxsize=None)
def quadrature_rule(degree: int) -> QuadratureRule:
    """Return the 3-, 6- or 12-point Gauss rule exact to ``degree`` (2, 4 or 6)."""
    if degree not in _RULES:
        raise ValueError(f"unsupported quadrature degree {degree}; choose 2, 4 or 6")
    pts, wts = [], []
    for orbit, args, w in _RULES[degree]:
        for lam in orbit(*args):
            pts.append((lam[1], lam[2]))
            wts.append(w)
    points = np.array(pts)
    weights = np.array(wts)
    points.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(degree, points, weights)


def eval_basis(degree: int, ref_points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, reference gradients and reference Hessians of the P1/P2 basis.

    ``ref_points`` is a single point (2,) or an array (npts, 2).  Returns
    arrays shaped (npts, nb), (npts, nb, 2), (npts, nb, 2, 2); a single point
    drops the leading axis.
    """
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    pts = np.asarray(ref_points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    npts = pts.shape[0]
    lam = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)

    if degree == 1:
        vals = lam
        grads = np.broadcast_to(_DL, (npts, 3, 2)).copy()
        hess = np.zeros((npts, 3, 2, 2))
    else:
        vals = np.empty((npts, 6))
        grads = np.empty((npts, 6, 2))
        hess = np.empty((npts, 6, 2, 2))
        for i in range(3):
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _DL[i]
            hess[:, i] = 4.0 * np.outer(_DL[i], _DL[i])
        for k, (a, b) in enumerate(P2_EDGES):
            vals[:, 3 + k] = 4.0 * lam[:, a] * lam[:, b]
            grads[:, 3 + k] = 4.0 * (lam[:, a, None] * _DL[b] + lam[:, b, None] * _DL[a])
            hess[:, 3 + k] = 4.0 * (np.outer(_DL[a], _DL[b]) + np.outer(_DL[b], _DL[a]))

    if single:
        return vals[0], grads[0], hess[0]
    return vals, grads, hess


@dataclass(frozen=True)
class ElementGeometry:
    """Affine map x = v0 + J xi for one or many triangles (leading axis = element)."""

    vertices: np.ndarray  # (ne, 3, 2)
    jac: np.ndarray  # (ne, 2, 2)
    inv_t: np.ndarray  # (ne, 2, 2) inverse-transpose of jac
    det: np.ndarray  # (ne,) |det J|

    def map_points(self, ref_points) -> np.ndarray:
        """Physical coordinates (ne, npts, 2) of reference points."""
        ref = np.atleast_2d(np.asarray(ref_points, dtype=float))
        return self.vertices[:, None, 0, :] + np.einsum("eij,qj->eqi", self.jac, ref)


def element_geometry(vertices) -> ElementGeometry:
    """Build the affine geometry of triangles given as (3, 2) or (ne, 3, 2)."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 2:
        v = v[None]
    jac = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        bad = int(np.flatnonzero(det <= 0.0)[0])
        raise ValueError(f"degenerate or clockwise triangle at index {bad} (det J = {det[bad]:g})")
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    return ElementGeometry(v, jac, np.transpose(inv, (0, 2, 1)), det)


def physical_hessians(geom: ElementGeometry, ref_hess: np.ndarray) -> np.ndarray:
    """Map reference Hessians (nq, nb, 2, 2) to physical ones (ne, nq, nb, 2, 2)."""
    return np.einsum("eia,qnab,ejb->eqnij", geom.inv_t, ref_hess, geom.inv_t)


def physical_gradients_and_laplacians(
    geom: ElementGeometry, ref_grads: np.ndarray, ref_hess: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Chain rule for gradients and Laplacians under the affine map.

    Inputs are reference derivatives at quadrature points, shaped
    (nq, nb, 2) and (nq, nb, 2, 2).  Outputs are (ne, nq, nb, 2) and
    (ne, nq, nb).
    """
    grads = np.einsum("eij,qnj->eqni", geom.inv_t, ref_grads)
    lap = np.einsum("eqnii->eqn", physical_hessians(geom, ref_hess))
    return grads, lap
