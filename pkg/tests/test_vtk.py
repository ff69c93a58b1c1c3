import numpy as np
import pytest

from stabfem.mesh import build_dof_map, build_structured_mesh
from stabfem.vtk import write_vtk


def parse(path):
    lines = path.read_text().splitlines()
    return lines, {l.split()[0]: i for i, l in enumerate(lines) if l and l.split()[0].isupper()}


def test_layout(tmp_path):
    mesh = build_structured_mesh(3)
    dm = build_dof_map(mesh, 2)
    c = dm.interpolate(lambda x, y: x + 2 * y)
    path = write_vtk(tmp_path / "m.vtk", mesh, {"c": c, "p": np.arange(mesh.n_vertices, dtype=float)})
    lines, idx = parse(path)
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[idx["POINTS"]] == "POINTS 16 double"
    pts = np.array([[float(v) for v in l.split()] for l in lines[idx["POINTS"] + 1: idx["CELLS"]]])
    assert np.array_equal(pts[:, :2], mesh.vertices) and not pts[:, 2].any()
    assert lines[idx["CELLS"]] == "CELLS 18 72"
    cells = np.array([[int(v) for v in l.split()] for l in lines[idx["CELLS"] + 1: idx["CELL_TYPES"]]])
    assert np.all(cells[:, 0] == 3) and np.array_equal(cells[:, 1:], mesh.triangles)
    types = lines[idx["CELL_TYPES"] + 1: idx["POINT_DATA"]]
    assert types == ["5"] * 18
    assert lines[idx["POINT_DATA"]] == "POINT_DATA 16"
    start = lines.index("SCALARS c double 1")
    assert lines[start + 1] == "LOOKUP_TABLE default"
    vals = np.array([float(v) for v in lines[start + 2: start + 18]])
    assert np.array_equal(vals, mesh.vertices[:, 0] + 2 * mesh.vertices[:, 1])


def test_geometry_only(tmp_path):
    lines, idx = parse(write_vtk(tmp_path / "g.vtk", build_structured_mesh(1)))
    assert "POINT_DATA" not in idx and lines[-1] == "5"


def test_rejects_short_field_and_bad_name(tmp_path):
    mesh = build_structured_mesh(2)
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh, {"c": np.zeros(3)})
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh, {"two words": np.zeros(9)})
