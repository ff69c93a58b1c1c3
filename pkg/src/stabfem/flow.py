"""Brinkman (Stokes-Darcy) flow with P2 velocity and P1 pressure.

Unknowns are ordered [u1 | u2 | p] (plus one Lagrange multiplier for the
zero-mean pressure constraint once :func:`fix_pressure` is applied).  The
stabilized variant adds the residual coupling

    sum_K  int_K (-L1* V)^T diag(tau1, tau1, tau2) (L1 U - F)

with L1 U = (-mu lap u + sigma u + grad p, div u) and
-L1* V = (mu lap v - sigma v + grad q, div v).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import DEFAULT_QUAD_DEGREE, ElementQuadrature, element_quadrature, evaluate
from .fe import ElementGeometry, eval_basis, physical_gradients_and_laplacians
from .mesh import DofMap, Mesh, build_dof_map
from .sparse import SolverOptions, SparseSystem, TripletBuffer, solve, to_csr

log = logging.getLogger(__name__)

VectorFunction = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]

DEFAULT_C1 = 128.0
DEFAULT_C2 = 1.0


@dataclass(frozen=True)
class FlowProblem:
    mu: float
    sigma: float
    f: VectorFunction

    def __post_init__(self):
        if not (self.mu > 0 and self.sigma > 0):
            raise ValueError(f"mu and sigma must be positive (got mu={self.mu}, sigma={self.sigma})")


@dataclass(frozen=True)
class FlowStabilization:
    tau1: float
    tau2: float
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2


def compute_flow_taus(mu: float, sigma: float, h: float,
                      c1: float = DEFAULT_C1, c2: float = DEFAULT_C2) -> FlowStabilization:
    """tau1 = 1 / (c1 mu / h^2 + sigma),  tau2 = c2 mu."""
    for name, val in (("mu", mu), ("sigma", sigma), ("h", h), ("c1", c1), ("c2", c2)):
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    return FlowStabilization(tau1=1.0 / (c1 * mu / h**2 + sigma), tau2=c2 * mu, c1=c1, c2=c2)


@dataclass
class FlowSolution:
    mesh: Mesh
    velocity_dofs: DofMap
    pressure_dofs: DofMap
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray
    div_l2: float = float("nan")
    iterations: int = 0


def flow_operator(geom: ElementGeometry, ref_points, u1, u2, p, mu: float, sigma: float
                  ) -> np.ndarray:
    """L1 applied to local P2 velocity and P1 pressure coefficients on one element.

    Returns (npts, 3): momentum x, momentum y, divergence.
    """
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    N, G, H = eval_basis(2, pts)
    grads, lap = physical_gradients_and_laplacians(geom, G, H)
    _, G1, H1 = eval_basis(1, pts)
    pgrads, _ = physical_gradients_and_laplacians(geom, G1, H1)
    grads, lap, pgrads = grads[0], lap[0], pgrads[0]
    gp = np.einsum("n,qnk->qk", p, pgrads)
    out = np.empty((len(pts), 3))
    for k, u in enumerate((u1, u2)):
        out[:, k] = -mu * lap @ u + sigma * N @ u + gp[:, k]
    out[:, 2] = np.einsum("n,qn->q", u1, grads[..., 0]) + np.einsum("n,qn->q", u2, grads[..., 1])
    return out


def _check_maps(mesh: Mesh, vdm: DofMap, pdm: DofMap) -> None:
    if vdm.degree != 2 or pdm.degree != 1:
        raise ValueError("flow needs a P2 velocity map and a P1 pressure map")
    nt = mesh.n_triangles
    if len(vdm.cell_to_dofs) != nt or len(pdm.cell_to_dofs) != nt:
        raise ValueError("DOF maps do not belong to this mesh")


def _blocks(nv: int, npr: int) -> dict[str, slice]:
    return {"u1": slice(0, nv), "u2": slice(nv, 2 * nv), "p": slice(2 * nv, 2 * nv + npr)}


def _assemble(mesh: Mesh, vdm: DofMap, pdm: DofMap, prob: FlowProblem,
              stab: FlowStabilization | None, quad_degree: int) -> SparseSystem:
    _check_maps(mesh, vdm, pdm)
    eq: ElementQuadrature = element_quadrature(mesh, quad_degree)
    w = eq.weights
    N, G = eq.p2_vals, eq.p2_grads
    M, Gp = eq.p1_vals, eq.p1_grads
    nv, npr = vdm.n_dofs, pdm.n_dofs
    ne = mesh.n_triangles
    f1, f2 = prob.f(eq.points[..., 0], eq.points[..., 1])
    fs = [np.broadcast_to(f1, w.shape), np.broadcast_to(f2, w.shape)]

    # local layout: u1 -> 0:6, u2 -> 6:12, p -> 12:15
    U = [slice(0, 6), slice(6, 12)]
    P = slice(12, 15)
    K = np.zeros((ne, 15, 15))
    F = np.zeros((ne, 15))

    stiff = np.einsum("eq,eqia,eqja->eij", w, G, G)
    mass = np.einsum("eq,qi,qj->eij", w, N, N)
    A = prob.mu * stiff + prob.sigma * mass
    for k in range(2):
        # B_k[i, j] = int psi_i d_k phi_j
        Bk = np.einsum("eq,qi,eqj->eij", w, M, G[..., k])
        K[:, U[k], U[k]] = A
        K[:, U[k], P] = -np.transpose(Bk, (0, 2, 1))
        K[:, P, U[k]] = Bk
        F[:, U[k]] = np.einsum("eq,qi,eq->ei", w, N, fs[k])

    if stab is not None:
        t1, t2 = stab.tau1, stab.tau2
        S = prob.mu * eq.p2_lap - prob.sigma * N[None]  # mu lap phi - sigma phi
        SS = np.einsum("eq,eqi,eqj->eij", w, S, S)
        area = w.sum(axis=1)
        for k in range(2):
            K[:, U[k], U[k]] -= t1 * SS
            SGp = np.einsum("eq,eqi,ej->eij", w, S, Gp[..., k])
            K[:, U[k], P] += t1 * SGp
            K[:, P, U[k]] -= t1 * np.transpose(SGp, (0, 2, 1))
            for l in range(2):
                K[:, U[k], U[l]] += t2 * np.einsum("eq,eqi,eqj->eij", w, G[..., k], G[..., l])
            F[:, U[k]] += t1 * np.einsum("eq,eqi,eq->ei", w, S, fs[k])
            F[:, P] += t1 * Gp[..., k] * np.einsum("eq,eq->e", w, fs[k])[:, None]
        K[:, P, P] += t1 * area[:, None, None] * np.einsum("eik,ejk->eij", Gp, Gp)

    cell = np.hstack([vdm.cell_to_dofs, vdm.cell_to_dofs + nv, pdm.cell_to_dofs + 2 * nv])
    buf = TripletBuffer(2 * nv + npr)
    buf.add_block(cell, cell, K)
    rhs = np.zeros(2 * nv + npr)
    np.add.at(rhs, cell, F)

    return SparseSystem(to_csr(buf), rhs, _blocks(nv, npr),
                        coords=np.vstack([vdm.coords, vdm.coords, pdm.coords]),
                        priority=np.r_[np.zeros(2 * nv), np.ones(npr)])


def assemble_flow_galerkin(mesh: Mesh, vdm: DofMap, pdm: DofMap, prob: FlowProblem,
                           quad_degree: int = DEFAULT_QUAD_DEGREE) -> SparseSystem:
    return _assemble(mesh, vdm, pdm, prob, None, quad_degree)


def assemble_flow_sgs(mesh: Mesh, vdm: DofMap, pdm: DofMap, prob: FlowProblem,
                      stab: FlowStabilization, quad_degree: int = DEFAULT_QUAD_DEGREE) -> SparseSystem:
    return _assemble(mesh, vdm, pdm, prob, stab, quad_degree)


def constrain_rows(sys: SparseSystem, dofs: np.ndarray, values: np.ndarray | None = None) -> SparseSystem:
    """Replace rows and columns of ``dofs`` by identity, lifting prescribed values."""
    n = sys.size
    fixed = np.zeros(n, dtype=bool)
    fixed[dofs] = True
    g = np.zeros(n)
    if values is not None:
        g[dofs] = values
    rhs = sys.rhs - sys.matrix @ g
    rhs[fixed] = g[fixed]
    keep = sp.diags((~fixed).astype(float))
    A = (keep @ sys.matrix @ keep + sp.diags(fixed.astype(float))).tocsr()
    A.eliminate_zeros()
    A.sort_indices()
    return replace(sys, matrix=A, rhs=rhs, blocks=dict(sys.blocks))


def apply_velocity_dirichlet(sys: SparseSystem, vdm: DofMap) -> SparseSystem:
    """Homogeneous no-slip condition on both velocity components."""
    bd = vdm.dirichlet_dofs
    return constrain_rows(sys, np.concatenate([bd, bd + vdm.n_dofs]))


def pressure_mean_weights(mesh: Mesh, pdm: DofMap) -> np.ndarray:
    """Exact integrals of the P1 basis functions: int_Omega psi_j."""
    m = np.zeros(pdm.n_dofs)
    area = 0.5 * mesh.geometry.det
    np.add.at(m, pdm.cell_to_dofs, np.repeat(area[:, None] / 3.0, 3, axis=1))
    return m


def fix_pressure(sys: SparseSystem, mean_weights: np.ndarray) -> SparseSystem:
    """Border the system with a Lagrange multiplier enforcing int p = 0."""
    ps = sys.blocks["p"]
    n = sys.size
    col = np.zeros(n)
    col[ps] = mean_weights
    col = sp.csr_matrix(col[:, None])
    A = sp.bmat([[sys.matrix, col], [col.T, None]], format="csr")
    A.sort_indices()
    blocks = dict(sys.blocks)
    blocks["lambda"] = slice(n, n + 1)
    coords = None if sys.coords is None else np.vstack([sys.coords, [np.nan, np.nan]])
    priority = None if sys.priority is None else np.append(sys.priority, sys.priority.max() + 1)
    return SparseSystem(A, np.append(sys.rhs, 0.0), blocks, coords, priority)


def divergence_l2(sol: FlowSolution, quad_degree: int = DEFAULT_QUAD_DEGREE) -> float:
    eq = element_quadrature(sol.mesh, quad_degree)
    _, g1 = evaluate(eq, sol.velocity_dofs, sol.u1)
    _, g2 = evaluate(eq, sol.velocity_dofs, sol.u2)
    div = g1[..., 0] + g2[..., 1]
    return float(np.sqrt(np.sum(eq.weights * div**2)))


def build_flow_system(mesh: Mesh, prob: FlowProblem, method: str = "sgs",
                      c1: float = DEFAULT_C1, c2: float = DEFAULT_C2,
                      quad_degree: int = DEFAULT_QUAD_DEGREE
                      ) -> tuple[SparseSystem, DofMap, DofMap]:
    """Assembled, no-slip constrained and mean-pressure bordered system."""
    vdm, pdm = build_dof_map(mesh, 2), build_dof_map(mesh, 1)
    if method == "galerkin":
        sys = assemble_flow_galerkin(mesh, vdm, pdm, prob, quad_degree)
    elif method == "sgs":
        stab = compute_flow_taus(prob.mu, prob.sigma, mesh.h, c1, c2)
        sys = assemble_flow_sgs(mesh, vdm, pdm, prob, stab, quad_degree)
    else:
        raise ValueError(f"unknown method {method!r}; expected 'galerkin' or 'sgs'")
    sys = apply_velocity_dirichlet(sys, vdm)
    sys = fix_pressure(sys, pressure_mean_weights(mesh, pdm))
    return sys, vdm, pdm


def solve_flow(mesh: Mesh, prob: FlowProblem, method: str = "sgs",
               opts: SolverOptions | None = None, c1: float = DEFAULT_C1,
               c2: float = DEFAULT_C2, quad_degree: int = DEFAULT_QUAD_DEGREE) -> FlowSolution:
    sys, vdm, pdm = build_flow_system(mesh, prob, method, c1, c2, quad_degree)
    x, iters = solve(sys, opts)
    parts = sys.split(x)
    sol = FlowSolution(mesh, vdm, pdm, parts["u1"].copy(), parts["u2"].copy(), parts["p"].copy(),
                       iterations=iters)
    sol.div_l2 = divergence_l2(sol, quad_degree)
    log.debug("flow n=%d method=%s div=%.3e", mesh.n, method, sol.div_l2)
    return sol
