"""Structured triangulations of the unit square and P1/P2 DOF numbering."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .fe import P2_EDGES, ElementGeometry, element_geometry


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform right-triangle mesh of (0,1)^2 with n cells per side.

    Each grid square is split along its bottom-left to top-right diagonal.
    ``edge_of_cell[k, e]`` is the global edge joining local vertices
    ``P2_EDGES[e]`` of triangle k; ``edge_midpoint`` is the P2 node number of
    each edge midpoint.
    """

    n: int
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), counterclockwise
    edges: np.ndarray  # (ne, 2) sorted vertex pairs
    edge_of_cell: np.ndarray  # (nt, 3)
    edge_midpoint: np.ndarray  # (ne,)
    boundary_vertex_flags: np.ndarray
    boundary_edge_flags: np.ndarray
    h: float

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def geometry(self) -> ElementGeometry:
        return element_geometry(self.vertices[self.triangles])

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        sides = v[:, [1, 2, 0]] - v
        return np.sqrt((sides**2).sum(axis=2)).max(axis=1)

    def areas(self) -> np.ndarray:
        """Signed areas by the shoelace formula."""
        v = self.vertices[self.triangles]
        x, y = v[..., 0], v[..., 1]
        return 0.5 * (x[:, 0] * (y[:, 1] - y[:, 2])
                      + x[:, 1] * (y[:, 2] - y[:, 0])
                      + x[:, 2] * (y[:, 0] - y[:, 1]))


def build_structured_mesh(n: int) -> Mesh:
    if int(n) != n or n < 1:
        raise ValueError(f"number of subdivisions must be a positive integer, got {n!r}")
    n = int(n)
    ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
    vertices = np.column_stack([ii.ravel() / n, jj.ravel() / n])

    ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (ci + cj * (n + 1)).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    local = triangles[:, P2_EDGES]  # (nt, 3, 2)
    pairs = np.sort(local.reshape(-1, 2), axis=1)
    edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
    edge_of_cell = inverse.reshape(-1, 3)

    on_bdry = (ii.ravel() == 0) | (ii.ravel() == n) | (jj.ravel() == 0) | (jj.ravel() == n)
    nv = vertices.shape[0]
    return Mesh(
        n=n,
        vertices=vertices,
        triangles=triangles,
        edges=edges,
        edge_of_cell=edge_of_cell,
        edge_midpoint=nv + np.arange(len(edges)),
        boundary_vertex_flags=on_bdry,
        boundary_edge_flags=counts == 1,
        h=float(np.sqrt(2.0) / n),
    )


@dataclass(frozen=True, eq=False)
class DofMap:
    """Global numbering for continuous P1 or P2 Lagrange functions.

    P2 numbers vertices first, then edge midpoints in edge order.
    """

    degree: int
    cell_to_dofs: np.ndarray  # (nt, 3) or (nt, 6)
    n_dofs: int
    dirichlet_dofs: np.ndarray
    coords: np.ndarray  # (n_dofs, 2) node positions

    @cached_property
    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(x, y)``."""
        return np.asarray(func(self.coords[:, 0], self.coords[:, 1]), dtype=float) * np.ones(self.n_dofs)


def build_dof_map(mesh: Mesh, degree: int) -> DofMap:
    if degree == 1:
        cell_to_dofs = mesh.triangles.copy()
        coords = mesh.vertices
        bdry = np.flatnonzero(mesh.boundary_vertex_flags)
    elif degree == 2:
        cell_to_dofs = np.hstack([mesh.triangles, mesh.edge_midpoint[mesh.edge_of_cell]])
        mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        coords = np.vstack([mesh.vertices, mids])
        bdry = np.concatenate([np.flatnonzero(mesh.boundary_vertex_flags),
                               mesh.edge_midpoint[mesh.boundary_edge_flags]])
    else:
        raise ValueError(f"degree must be 1 or 2, got {degree!r}")
    return DofMap(
        degree=degree,
        cell_to_dofs=cell_to_dofs,
        n_dofs=len(coords),
        dirichlet_dofs=np.sort(bdry),
        coords=coords,
    )
