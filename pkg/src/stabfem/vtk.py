"""Legacy ASCII VTK (version 3.0) unstructured-grid export.

Fields are written as POINT_DATA on the mesh vertices; P2 vectors are
sampled at the vertex DOFs, which come first in the P2 numbering.
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np

from .mesh import Mesh

VTK_TRIANGLE = 5


def vertex_values(mesh: Mesh, coeffs: np.ndarray) -> np.ndarray:
    """Restrict a P1 or P2 DOF vector to the mesh vertices."""
    nv = len(mesh.vertices)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] < nv:
        raise ValueError(f"field has {coeffs.shape[0]} values, mesh has {nv} vertices")
    return coeffs[:nv]


def write_vtk(path, mesh: Mesh, fields: Mapping[str, np.ndarray] | None = None,
              title: str = "stabfem") -> Path:
    path = Path(path)
    nv, nt = len(mesh.vertices), len(mesh.triangles)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    if fields:
        lines.append(f"POINT_DATA {nv}")
        for name, values in fields.items():
            if not name or any(ch.isspace() for ch in name):
                raise ValueError(f"invalid VTK field name {name!r}")
            vals = vertex_values(mesh, values)
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [f"{v:.17g}" for v in vals]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path
