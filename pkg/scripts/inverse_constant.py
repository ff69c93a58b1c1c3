"""Largest ratio ||lap v||^2 / ||grad v||^2 over P2 functions on one mesh cell.

The residual terms subtract tau * ||mu lap v||^2 (flow) and
tau3 * ||(D1 v_x)_x + (D2 v_y)_y||^2 (transport).  They stay dominated by the
viscous/diffusive term only when tau * mu * C_inv / h^2 < 1, where
C_inv = h^2 * max ratio.  This prints C_inv for both cell orientations of the
structured mesh, with h the cell diameter.
"""
import numpy as np
import scipy.linalg

from stabfem.assembly import element_quadrature
from stabfem.mesh import build_structured_mesh


def inverse_constant(mesh, cell):
    eq = element_quadrature(mesh, 6)
    w = eq.weights[cell]
    G, lap = eq.p2_grads[cell], eq.p2_lap[cell]
    K = np.einsum("q,qia,qja->ij", w, G, G)
    L = np.einsum("q,qi,qj->ij", w, lap, lap)
    # constants lie in the kernel of both forms; drop them
    Q, _ = np.linalg.qr(np.column_stack([np.ones(6), np.eye(6)[:, :5]]))
    B = Q[:, 1:]
    lam = scipy.linalg.eigh(B.T @ L @ B, B.T @ K @ B, eigvals_only=True)
    return lam.max() * mesh.cell_diameters[cell] ** 2


if __name__ == "__main__":
    for n in (1, 10, 160):
        mesh = build_structured_mesh(n)
        print(f"n={n:4d}  lower cell C_inv={inverse_constant(mesh, 0):.6f}  "
              f"upper cell C_inv={inverse_constant(mesh, 1):.6f}")
    print("flow: tau1 * mu * C_inv / h^2 < 1 requires c1 > C_inv")
    print("transport: (9/4) s^2 > C_inv for a diffusive length h/s requires s > "
          f"{np.sqrt(96 * 4 / 9):.3f}")
