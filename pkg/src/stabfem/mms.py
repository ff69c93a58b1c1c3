"""Manufactured solutions, forcing terms and error norms.

All cases share the stream-function velocity u = (d psi/dy, -d psi/dx) with
psi = sin^2(pi x) sin^2(pi y), pressure p = sin(2 pi x) sin(2 pi y) and
concentration c = sin(pi x) sin(pi y).  The derivatives below are written out
by hand; the test suite checks them against sympy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .adr import ScalarField, TransportProblem
from .assembly import DEFAULT_QUAD_DEGREE, element_quadrature, evaluate
from .flow import FlowProblem
from .mesh import DofMap, Mesh

PI = np.pi

Func = Callable[[np.ndarray, np.ndarray], np.ndarray]


def velocity(x, y):
    a, b = 2 * PI * x, 2 * PI * y
    return (0.5 * PI * (1 - np.cos(a)) * np.sin(b),
            -0.5 * PI * np.sin(a) * (1 - np.cos(b)))


def velocity_grad(x, y):
    """((du1/dx, du1/dy), (du2/dx, du2/dy))."""
    a, b = 2 * PI * x, 2 * PI * y
    p2 = PI**2
    return ((p2 * np.sin(a) * np.sin(b), p2 * (1 - np.cos(a)) * np.cos(b)),
            (-p2 * np.cos(a) * (1 - np.cos(b)), -p2 * np.sin(a) * np.sin(b)))


def velocity_laplacian(x, y):
    a, b = 2 * PI * x, 2 * PI * y
    p3 = 2 * PI**3
    return (p3 * np.sin(b) * (2 * np.cos(a) - 1),
            -p3 * np.sin(a) * (2 * np.cos(b) - 1))


def pressure(x, y):
    return np.sin(2 * PI * x) * np.sin(2 * PI * y)


def pressure_grad(x, y):
    a, b = 2 * PI * x, 2 * PI * y
    return (2 * PI * np.cos(a) * np.sin(b), 2 * PI * np.sin(a) * np.cos(b))


def concentration(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def concentration_grad(x, y):
    return (PI * np.cos(PI * x) * np.sin(PI * y), PI * np.sin(PI * x) * np.cos(PI * y))


def concentration_hess_diag(x, y):
    c = -PI**2 * concentration(x, y)
    return c, c


def graded(scale: float, slope: float, axis: int) -> ScalarField:
    """scale * (1 + slope * x_axis)^2 with its gradient."""
    def value(x, y):
        s = (x, y)[axis]
        return scale * (1 + slope * s) ** 2

    def grad(x, y):
        s = (x, y)[axis]
        d = 2 * scale * slope * (1 + slope * s)
        z = np.zeros_like(np.asarray(s, dtype=float) * 1.0)
        return (d + z, z) if axis == 0 else (z, d + z)

    return ScalarField(value, grad, upper_bound=scale * (1 + abs(slope)) ** 2)


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    mu: float
    sigma: float
    D1: ScalarField
    D2: ScalarField
    alpha: float
    description: str = ""
    u: Callable = field(default=velocity, repr=False)
    p: Func = field(default=pressure, repr=False)
    c: Func = field(default=concentration, repr=False)

    def f(self, x, y):
        """Momentum forcing -mu lap u + sigma u + grad p."""
        u1, u2 = velocity(x, y)
        l1, l2 = velocity_laplacian(x, y)
        px, py = pressure_grad(x, y)
        return (-self.mu * l1 + self.sigma * u1 + px,
                -self.mu * l2 + self.sigma * u2 + py)

    def g(self, x, y):
        """Transport source -(D1 c_x)_x - (D2 c_y)_y + u.grad c + alpha c."""
        cx, cy = concentration_grad(x, y)
        cxx, cyy = concentration_hess_diag(x, y)
        d1x, _ = self.D1.grad(x, y)
        _, d2y = self.D2.grad(x, y)
        u1, u2 = velocity(x, y)
        diff = self.D1.value(x, y) * cxx + d1x * cx + self.D2.value(x, y) * cyy + d2y * cy
        return -diff + u1 * cx + u2 * cy + self.alpha * concentration(x, y)

    def flow_problem(self) -> FlowProblem:
        return FlowProblem(self.mu, self.sigma, self.f)

    def transport_problem(self) -> TransportProblem:
        return TransportProblem(self.D1, self.D2, self.alpha, self.g)


def _const(v: float) -> ScalarField:
    return graded(v, 0.0, 0)


def default_cases() -> dict[str, ManufacturedCase]:
    return {
        "smooth": ManufacturedCase(
            "smooth", mu=1.0, sigma=1.0, D1=_const(1.0), D2=_const(1.0), alpha=1.0,
            description="unit coefficients"),
        "small_diffusion": ManufacturedCase(
            "small_diffusion", mu=1.0, sigma=1.0,
            D1=graded(1e-7, 0.02, 0), D2=graded(1e-8, 0.02, 1), alpha=10.0,
            description="D1=1e-7(1+0.02x)^2, D2=1e-8(1+0.02y)^2, alpha=10"),
        "diffusion_dominated": ManufacturedCase(
            "diffusion_dominated", mu=1.0, sigma=1.0,
            D1=graded(1.0, 0.02, 0), D2=graded(0.1, 0.02, 1), alpha=0.001,
            description="D1=(1+0.02x)^2, D2=0.1(1+0.02y)^2, alpha=0.001"),
    }


def get_case(name: str) -> ManufacturedCase:
    cases = default_cases()
    aliases = {"a": "smooth", "b": "small_diffusion", "c": "diffusion_dominated"}
    key = aliases.get(name, name)
    if key not in cases:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(cases)} or a/b/c")
    return cases[key]


def l2_error(coeffs: np.ndarray, exact: Func, dofmap: DofMap, mesh: Mesh,
             quad_degree: int = DEFAULT_QUAD_DEGREE) -> float:
    if quad_degree < 6:
        raise ValueError("error norms need a quadrature degree of at least 6")
    eq = element_quadrature(mesh, quad_degree)
    vals, _ = evaluate(eq, dofmap, coeffs)
    ex = exact(eq.points[..., 0], eq.points[..., 1])
    return float(math.sqrt(np.sum(eq.weights * (vals - ex) ** 2)))


def h1_error(coeffs: np.ndarray, exact: Func, exact_grad, dofmap: DofMap, mesh: Mesh,
             quad_degree: int = DEFAULT_QUAD_DEGREE) -> float:
    """Full H1 norm of the error: sqrt(||e||^2 + ||grad e||^2)."""
    if quad_degree < 6:
        raise ValueError("error norms need a quadrature degree of at least 6")
    eq = element_quadrature(mesh, quad_degree)
    vals, grads = evaluate(eq, dofmap, coeffs)
    x, y = eq.points[..., 0], eq.points[..., 1]
    gx, gy = exact_grad(x, y)
    err = (vals - exact(x, y)) ** 2 + (grads[..., 0] - gx) ** 2 + (grads[..., 1] - gy) ** 2
    return float(math.sqrt(np.sum(eq.weights * err)))


def observed_order(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    if not (e_coarse > 0 and e_fine > 0):
        raise ValueError(f"errors must be positive, got {e_coarse}, {e_fine}")
    return math.log(e_coarse / e_fine) / math.log(ratio)


def component(fn, i):
    """Pick component ``i`` of a tuple-valued field."""
    return lambda x, y: fn(x, y)[i]
