"""Steady advection-diffusion-reaction transport with diagonal variable diffusion.

    -(D1 c_x)_x - (D2 c_y)_y + u . grad c + alpha c = g,   c = 0 on the boundary.

The stabilized form adds, element by element,
tau3 * int_K (-L2* d)(L2 c - g) where L2 c is the strong operator above and
-L2* d = (D1 d_x)_x + (D2 d_y)_y + u . grad d - alpha d.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .assembly import DEFAULT_QUAD_DEGREE, element_quadrature
from .fe import ElementGeometry, eval_basis, physical_hessians, quadrature_rule
from .flow import FlowSolution, constrain_rows
from .mesh import DofMap, Mesh, build_dof_map
from .sparse import SolverOptions, SparseSystem, TripletBuffer, solve, to_csr

Func = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Element lengths fed to tau3 for P2, as fractions of the cell diameter h_K.
# The SGS term subtracts tau3 ||(D1 d_x)_x + (D2 d_y)_y||^2, and on these
# triangles ||lap v||^2 <= 96 / h_K^2 ||grad v||^2 for P2, so the diffusive
# length h_K / 8 (9/4 * 64 = 144 > 96) keeps the form coercive.  The advective
# length h_K / 4 follows the usual h / k^2 scaling for degree k = 2.
TAU3_DIFFUSIVE_DIVISOR = 8.0
TAU3_ADVECTIVE_DIVISOR = 4.0
TAU3_DIVISORS = (TAU3_DIFFUSIVE_DIVISOR, TAU3_ADVECTIVE_DIVISOR)


@dataclass(frozen=True)
class ScalarField:
    """Coefficient with analytic gradient; ``grad`` returns (d/dx, d/dy)."""

    value: Func
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
    upper_bound: float = float("inf")


@dataclass(frozen=True)
class TransportProblem:
    D1: ScalarField
    D2: ScalarField
    alpha: float
    g: Func

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"reaction coefficient must be nonnegative, got {self.alpha}")


@dataclass(frozen=True)
class AnalyticVelocity:
    """Prescribed advection field ``func(x, y) -> (u1, u2)``."""

    func: Callable


VelocityField = Union[FlowSolution, AnalyticVelocity]


def compute_tau3(D, U, alpha, h, h_adv=None):
    """tau3 = (9 D / (4 h^2) + 3 U / (2 h) + alpha)^-1, elementwise over arrays.

    ``h_adv`` optionally gives a separate length for the advective term.
    """
    D, U, h = np.asarray(D, dtype=float), np.asarray(U, dtype=float), np.asarray(h, dtype=float)
    h_adv = h if h_adv is None else np.asarray(h_adv, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(D < 0) or np.any(U < 0) or np.any(alpha < 0):
        raise ValueError("D, U and alpha must be nonnegative")
    if np.any(h <= 0) or np.any(h_adv <= 0):
        raise ValueError("element size must be positive")
    denom = 9.0 * D / (4.0 * h**2) + 3.0 * U / (2.0 * h_adv) + alpha
    if np.any(denom <= 0):
        raise ValueError("tau3 undefined: diffusion, speed and reaction are all zero")
    tau = 1.0 / denom
    return float(tau) if tau.ndim == 0 else tau


def _velocity_at(vel: VelocityField, mesh: Mesh, ref_points: np.ndarray,
                 phys_points: np.ndarray) -> np.ndarray:
    """Velocity (e, q, 2) at reference points of every element."""
    if isinstance(vel, AnalyticVelocity):
        u1, u2 = vel.func(phys_points[..., 0], phys_points[..., 1])
        return np.stack(np.broadcast_arrays(u1, u2), axis=-1).astype(float)
    if isinstance(vel, FlowSolution):
        if vel.mesh.n_triangles != mesh.n_triangles or vel.mesh.n != mesh.n:
            raise ValueError("flow solution lives on a different mesh")
        N, _, _ = eval_basis(2, np.atleast_2d(ref_points))
        cd = vel.velocity_dofs.cell_to_dofs
        return np.stack([vel.u1[cd] @ N.T, vel.u2[cd] @ N.T], axis=-1)
    raise TypeError(f"unsupported velocity field {type(vel).__name__}")


def transport_operator(geom: ElementGeometry, ref_points, c, prob: TransportProblem,
                       velocity: Callable) -> np.ndarray:
    """L2 applied to local P2 coefficients ``c`` on one element, at reference points."""
    pts = np.atleast_2d(np.asarray(ref_points, dtype=float))
    N, G, H = eval_basis(2, pts)
    grads = np.einsum("ij,qnj->qni", geom.inv_t[0], G)
    hess = physical_hessians(geom, H)[0]
    xy = geom.map_points(pts)[0]
    x, y = xy[:, 0], xy[:, 1]
    cx, cy = grads[..., 0] @ c, grads[..., 1] @ c
    cxx, cyy = hess[..., 0, 0] @ c, hess[..., 1, 1] @ c
    d1x, _ = prob.D1.grad(x, y)
    _, d2y = prob.D2.grad(x, y)
    u1, u2 = velocity(x, y)
    diff = prob.D1.value(x, y) * cxx + d1x * cx + prob.D2.value(x, y) * cyy + d2y * cy
    return -diff + u1 * cx + u2 * cy + prob.alpha * (N @ c)


def elementwise_DU(prob: TransportProblem, vel: VelocityField, mesh: Mesh
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Per-element (max(D1, D2), |u|) at the centroid."""
    centroid = np.array([[1.0 / 3.0, 1.0 / 3.0]])
    xc = mesh.geometry.map_points(centroid)  # (e, 1, 2)
    x, y = xc[:, 0, 0], xc[:, 0, 1]
    D = np.maximum(prob.D1.value(x, y) * np.ones_like(x), prob.D2.value(x, y) * np.ones_like(x))
    u = _velocity_at(vel, mesh, centroid, xc)[:, 0, :]
    return D, np.hypot(u[:, 0], u[:, 1])


def element_tau3(prob: TransportProblem, vel: VelocityField, mesh: Mesh,
                 divisors: tuple[float, float] = TAU3_DIVISORS) -> np.ndarray:
    """Per-element tau3; ``divisors`` scale the cell diameter for the diffusive
    and advective terms."""
    D, U = elementwise_DU(prob, vel, mesh)
    hk = mesh.cell_diameters
    return compute_tau3(D, U, prob.alpha, hk / divisors[0], hk / divisors[1])


def assemble_adr(mesh: Mesh, dofmap: DofMap, prob: TransportProblem, vel: VelocityField,
                 method: str = "sgs", tau3=None, quad_degree: int = DEFAULT_QUAD_DEGREE,
                 tau3_divisors: tuple[float, float] = TAU3_DIVISORS) -> SparseSystem:
    """Assemble the transport system (no boundary conditions applied).

    ``tau3`` overrides the per-element parameter (scalar or array) for the
    stabilized method.
    """
    if method not in ("galerkin", "sgs"):
        raise ValueError(f"unknown method {method!r}; expected 'galerkin' or 'sgs'")
    if dofmap.degree != 2 or len(dofmap.cell_to_dofs) != mesh.n_triangles:
        raise ValueError("transport needs a P2 DOF map on this mesh")
    eq = element_quadrature(mesh, quad_degree)
    w, N, G = eq.weights, eq.p2_vals, eq.p2_grads
    x, y = eq.points[..., 0], eq.points[..., 1]
    d1 = prob.D1.value(x, y) * np.ones_like(x)
    d2 = prob.D2.value(x, y) * np.ones_like(x)
    u = _velocity_at(vel, mesh, quadrature_rule(quad_degree).points, eq.points)
    gq = prob.g(x, y) * np.ones_like(x)

    adv = np.einsum("eqk,eqnk->eqn", u, G)
    K = (np.einsum("eq,eqi,eqj->eij", w * d1, G[..., 0], G[..., 0])
         + np.einsum("eq,eqi,eqj->eij", w * d2, G[..., 1], G[..., 1])
         + np.einsum("eq,qi,eqj->eij", w, N, adv)
         + prob.alpha * np.einsum("eq,qi,qj->eij", w, N, N))
    F = np.einsum("eq,qi,eq->ei", w, N, gq)

    if method == "sgs":
        tau = element_tau3(prob, vel, mesh, tau3_divisors) if tau3 is None else np.broadcast_to(
            np.asarray(tau3, dtype=float), (mesh.n_triangles,))
        d1x, _ = prob.D1.grad(x, y)
        _, d2y = prob.D2.grad(x, y)
        H = eq.p2_hess
        diff = (d1[..., None] * H[..., 0, 0] + (d1x * np.ones_like(x))[..., None] * G[..., 0]
                + d2[..., None] * H[..., 1, 1] + (d2y * np.ones_like(x))[..., None] * G[..., 1])
        strong = -diff + adv + prob.alpha * N[None]  # L2 phi_j
        adjoint = diff + adv - prob.alpha * N[None]  # -L2* phi_i
        K = K + tau[:, None, None] * np.einsum("eq,eqi,eqj->eij", w, adjoint, strong)
        F = F + tau[:, None] * np.einsum("eq,eqi,eq->ei", w, adjoint, gq)

    buf = TripletBuffer(dofmap.n_dofs)
    buf.add_block(dofmap.cell_to_dofs, dofmap.cell_to_dofs, K)
    rhs = np.zeros(dofmap.n_dofs)
    np.add.at(rhs, dofmap.cell_to_dofs, F)
    return SparseSystem(to_csr(buf), rhs, {"c": slice(0, dofmap.n_dofs)}, coords=dofmap.coords)


def apply_concentration_dirichlet(sys: SparseSystem, dofmap: DofMap) -> SparseSystem:
    return constrain_rows(sys, dofmap.dirichlet_dofs)


def solve_adr(mesh: Mesh, prob: TransportProblem, vel: VelocityField, method: str = "sgs",
              opts: SolverOptions | None = None, quad_degree: int = DEFAULT_QUAD_DEGREE,
              dofmap: DofMap | None = None, tau3_divisors: tuple[float, float] = TAU3_DIVISORS
              ) -> tuple[np.ndarray, int]:
    """Solve for the P2 concentration; returns (coefficients, iterations)."""
    dofmap = dofmap or build_dof_map(mesh, 2)
    sys = apply_concentration_dirichlet(
        assemble_adr(mesh, dofmap, prob, vel, method, quad_degree=quad_degree,
                     tau3_divisors=tau3_divisors),
        dofmap)
    c, iters = solve(sys, opts)
    c[dofmap.dirichlet_dofs] = 0.0
    return c, iters
