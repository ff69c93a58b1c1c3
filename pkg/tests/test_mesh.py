import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stabfem.mesh import build_dof_map, build_structured_mesh


def test_smallest_mesh():
    m = build_structured_mesh(1)
    assert m.n_vertices == 4 and m.n_triangles == 2
    assert m.boundary_vertex_flags.all()


def test_n2_counts():
    m = build_structured_mesh(2)
    assert m.n_vertices == 9 and m.n_triangles == 8
    assert m.boundary_vertex_flags.sum() == 8
    assert m.h == pytest.approx(math.sqrt(2) / 2, abs=1e-15)


def test_n10_area_by_shoelace():
    m = build_structured_mesh(10)
    assert m.n_vertices == 121 and m.n_triangles == 200
    tri = m.vertices[m.triangles]
    x, y = tri[..., 0], tri[..., 1]
    shoelace = 0.5 * np.abs(np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1))
    assert abs(shoelace.sum() - 1.0) <= 1e-12


@pytest.mark.parametrize("n", [0, -3])
def test_rejects_nonpositive(n):
    with pytest.raises(ValueError):
        build_structured_mesh(n)


def test_dof_counts():
    assert build_dof_map(build_structured_mesh(1), 1).n_dofs == 4
    d = build_dof_map(build_structured_mesh(2), 2)
    assert d.n_dofs == 25 and len(d.dirichlet_dofs) == 16
    assert build_dof_map(build_structured_mesh(10), 2).n_dofs == 441


@pytest.mark.parametrize("degree", [0, 3])
def test_dof_map_rejects_degree(degree):
    with pytest.raises(ValueError):
        build_dof_map(build_structured_mesh(2), degree)


def test_diagonal_orientation():
    # every cell is split along its bottom-left to top-right diagonal
    m = build_structured_mesh(3)
    tri = m.vertices[m.triangles]
    hyp = [max(range(3), key=lambda k: np.linalg.norm(t[k] - t[(k + 1) % 3])) for t in tri]
    for t, k in zip(tri, hyp):
        a, b = t[k], t[(k + 1) % 3]
        d = b - a
        assert d[0] * d[1] > 0  # both components have the same sign


@given(st.integers(1, 24))
def test_mesh_invariants(n):
    m = build_structured_mesh(n)
    assert m.n_vertices == (n + 1) ** 2 and m.n_triangles == 2 * n * n
    assert np.all(m.areas() > 0)
    assert m.geometry.det.min() > 0
    assert abs(m.areas().sum() - 1.0) <= 1e-12
    assert m.h == pytest.approx(math.sqrt(2) / n, rel=1e-15)
    assert m.cell_diameters.max() == pytest.approx(m.h, rel=1e-14)
    v = m.vertices[m.boundary_vertex_flags]
    assert np.all(np.min(np.column_stack([v, 1 - v]), axis=1) == 0.0)
    inner = m.vertices[~m.boundary_vertex_flags]
    assert np.all(np.min(np.column_stack([inner, 1 - inner]), axis=1) > 0.0)


@given(st.integers(1, 16), st.sampled_from([1, 2]))
def test_dof_map_invariants(n, degree):
    m = build_structured_mesh(n)
    d = build_dof_map(m, degree)
    assert d.n_dofs == ((n + 1) ** 2 if degree == 1 else (2 * n + 1) ** 2)
    assert d.cell_to_dofs.max() < d.n_dofs and d.cell_to_dofs.min() >= 0
    assert np.all(np.diff(d.dirichlet_dofs) > 0)
    on_bdry = np.min(np.column_stack([d.coords, 1 - d.coords]), axis=1) == 0.0
    assert set(np.flatnonzero(on_bdry)) == set(d.dirichlet_dofs)
    # node coordinates are unique, i.e. each geometric node has one DOF
    assert len(np.unique(np.round(d.coords * 4 * n).astype(int), axis=0)) == d.n_dofs


@given(st.integers(1, 12))
def test_conformity_on_shared_edges(n):
    m = build_structured_mesh(n)
    d = build_dof_map(m, 2)
    local_edges = [(0, 1, 3), (1, 2, 4), (2, 0, 5)]
    seen = {}
    for cell, dofs in zip(m.triangles, d.cell_to_dofs):
        for a, b, mid in local_edges:
            key = frozenset((cell[a], cell[b]))
            ends = {dofs[a], dofs[b]}
            if key in seen:
                assert seen[key] == (ends, dofs[mid])
            else:
                seen[key] = (ends, dofs[mid])
    # midpoint DOF sits at the geometric midpoint of its edge
    for key, (_, mid) in seen.items():
        a, b = tuple(key)
        assert np.allclose(d.coords[mid], 0.5 * (m.vertices[a] + m.vertices[b]))
