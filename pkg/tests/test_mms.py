import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from stabfem import mms
from stabfem.adr import AnalyticVelocity, assemble_adr, apply_concentration_dirichlet
from stabfem.assembly import element_quadrature
from stabfem.flow import assemble_flow_galerkin, apply_velocity_dirichlet
from stabfem.mesh import build_dof_map, build_structured_mesh

X, Y = sp.symbols("x y")
PSI = sp.sin(sp.pi * X) ** 2 * sp.sin(sp.pi * Y) ** 2
U1, U2 = sp.diff(PSI, Y), -sp.diff(PSI, X)
P = sp.sin(2 * sp.pi * X) * sp.sin(2 * sp.pi * Y)
C = sp.sin(sp.pi * X) * sp.sin(sp.pi * Y)

SYMBOLIC_COEFFS = {
    "smooth": (1, 1, sp.Integer(1), sp.Integer(1), 1),
    "small_diffusion": (1, 1, sp.Rational(1, 10**7) * (1 + sp.Rational(2, 100) * X) ** 2,
                        sp.Rational(1, 10**8) * (1 + sp.Rational(2, 100) * Y) ** 2, 10),
    "diffusion_dominated": (1, 1, (1 + sp.Rational(2, 100) * X) ** 2,
                            sp.Rational(1, 10) * (1 + sp.Rational(2, 100) * Y) ** 2, sp.Rational(1, 1000)),
}


def lap(e):
    return sp.diff(e, X, 2) + sp.diff(e, Y, 2)


def num(expr):
    return sp.lambdify((X, Y), expr, "numpy")


def sample(rng, k=25):
    return rng.random(k), rng.random(k)


def close(a, b, tol=1e-11):
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    return np.allclose(a, b, rtol=tol, atol=tol)


def test_fields_against_sympy(rng):
    x, y = sample(rng)
    assert close(mms.velocity(x, y), (num(U1)(x, y), num(U2)(x, y)))
    grads = mms.velocity_grad(x, y)
    for i, u in enumerate((U1, U2)):
        assert close(grads[i], (num(sp.diff(u, X))(x, y), num(sp.diff(u, Y))(x, y)))
    assert close(mms.velocity_laplacian(x, y), (num(lap(U1))(x, y), num(lap(U2))(x, y)))
    assert close(mms.pressure_grad(x, y), (num(sp.diff(P, X))(x, y), num(sp.diff(P, Y))(x, y)))
    assert close(mms.concentration_grad(x, y), (num(sp.diff(C, X))(x, y), num(sp.diff(C, Y))(x, y)))
    assert close(mms.concentration_hess_diag(x, y), (num(sp.diff(C, X, 2))(x, y), num(sp.diff(C, Y, 2))(x, y)))


@pytest.mark.parametrize("name", list(SYMBOLIC_COEFFS))
def test_forcings_against_sympy(name, rng):
    mu, sigma, D1, D2, alpha = SYMBOLIC_COEFFS[name]
    case = mms.get_case(name)
    f1 = -mu * lap(U1) + sigma * U1 + sp.diff(P, X)
    f2 = -mu * lap(U2) + sigma * U2 + sp.diff(P, Y)
    g = (-sp.diff(D1 * sp.diff(C, X), X) - sp.diff(D2 * sp.diff(C, Y), Y)
         + U1 * sp.diff(C, X) + U2 * sp.diff(C, Y) + alpha * C)
    x, y = sample(rng)
    assert close(case.f(x, y), (num(f1)(x, y), num(f2)(x, y)))
    assert close(case.g(x, y), num(g)(x, y))
    # graded coefficients and their gradients
    for field, sym, axis in ((case.D1, D1, 0), (case.D2, D2, 1)):
        assert close(field.value(x, y), num(sym)(x, y), 1e-14)
        assert close(field.grad(x, y)[axis], num(sp.diff(sym, (X, Y)[axis]))(x, y), 1e-14)


def test_small_diffusion_source_at_centre():
    _, _, D1, D2, alpha = SYMBOLIC_COEFFS["small_diffusion"]
    g = (-sp.diff(D1 * sp.diff(C, X), X) - sp.diff(D2 * sp.diff(C, Y), Y)
         + U1 * sp.diff(C, X) + U2 * sp.diff(C, Y) + alpha * C)
    exact = float(g.subs({X: sp.Rational(1, 2), Y: sp.Rational(1, 2)}))
    value = mms.get_case("b").g(0.5, 0.5)
    assert np.isfinite(value) and value == pytest.approx(exact, rel=1e-14)


def test_divergence_free_and_boundary_values(rng):
    x, y = rng.random(100), rng.random(100)
    (u1x, _), (_, u2y) = mms.velocity_grad(x, y)
    assert np.max(np.abs(u1x + u2y)) <= 1e-12
    t = rng.random(100)
    side = rng.integers(0, 4, 100)
    bx = np.where(side == 0, 0.0, np.where(side == 1, 1.0, t))
    by = np.where(side == 2, 0.0, np.where(side == 3, 1.0, t))
    u1, u2 = mms.velocity(bx, by)
    assert max(np.abs(u1).max(), np.abs(u2).max(), np.abs(mms.concentration(bx, by)).max()) <= 1e-12


def test_pressure_has_zero_mean():
    mesh = build_structured_mesh(16)
    eq = element_quadrature(mesh, 6)
    assert abs(np.sum(eq.weights * mms.pressure(eq.points[..., 0], eq.points[..., 1]))) <= 1e-10


def test_default_cases():
    cases = mms.default_cases()
    assert set(cases) == {"smooth", "small_diffusion", "diffusion_dominated"}
    assert mms.get_case("a") is not None and mms.get_case("b").alpha == 10.0
    assert mms.get_case("c").alpha == 0.001
    with pytest.raises(KeyError):
        mms.get_case("d")


# ---------------------------------------------------------------- norms

def test_zero_vs_concentration_l2_is_half():
    mesh = build_structured_mesh(20)
    dm = build_dof_map(mesh, 2)
    assert mms.l2_error(np.zeros(dm.n_dofs), mms.concentration, dm, mesh) == pytest.approx(0.5, abs=1e-10)


def test_interpolated_p2_polynomial_has_zero_error():
    mesh = build_structured_mesh(5)
    dm = build_dof_map(mesh, 2)

    def poly(x, y):
        return 1 + 2 * x - y + 3 * x * y - x * x + 0.5 * y * y

    def grad(x, y):
        return 2 + 3 * y - 2 * x, -1 + 3 * x + y

    c = dm.interpolate(poly)
    assert mms.l2_error(c, poly, dm, mesh) <= 1e-12
    assert mms.h1_error(c, poly, grad, dm, mesh) <= 1e-12
    pdm = build_dof_map(mesh, 1)
    assert mms.l2_error(pdm.interpolate(lambda x, y: 1 - x + 2 * y),
                        lambda x, y: 1 - x + 2 * y, pdm, mesh) <= 1e-12


def test_norms_require_degree_six():
    mesh = build_structured_mesh(2)
    dm = build_dof_map(mesh, 2)
    with pytest.raises(ValueError):
        mms.l2_error(np.zeros(dm.n_dofs), mms.concentration, dm, mesh, quad_degree=4)
    with pytest.raises(ValueError):
        mms.h1_error(np.zeros(dm.n_dofs), mms.concentration, mms.concentration_grad, dm, mesh, quad_degree=2)


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_h1_dominates_l2(seed, n):
    mesh = build_structured_mesh(n)
    dm = build_dof_map(mesh, 2)
    c = np.random.default_rng(seed).normal(size=dm.n_dofs)
    l2 = mms.l2_error(c, mms.concentration, dm, mesh)
    assert 0 <= l2 <= mms.h1_error(c, mms.concentration, mms.concentration_grad, dm, mesh)


# --------------------------------------------------------------- orders

def test_observed_order_table_values():
    assert mms.observed_order(0.000265901, 6.36986e-5) == pytest.approx(2.06155, abs=1e-5)
    assert mms.observed_order(4e-4, 1e-4) == 2.0
    assert mms.observed_order(1.43178e-5, 4.79682e-6) == pytest.approx(1.57766, abs=1e-5)


@pytest.mark.parametrize("pair", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_observed_order_rejects_nonpositive(pair):
    with pytest.raises(ValueError):
        mms.observed_order(*pair)


pos = st.floats(1e-12, 1e3)


@given(pos, pos, st.floats(1e-6, 1e6))
def test_observed_order_scale_invariant(a, b, s):
    assert mms.observed_order(a * s, b * s) == pytest.approx(mms.observed_order(a, b), abs=1e-9)
    assert mms.observed_order(a, b) == pytest.approx(math.log2(a / b), abs=1e-12)


# ------------------------------------------------------ forcing residual

def test_galerkin_residual_of_exact_solution_decays():
    case = mms.get_case("smooth")
    vel = AnalyticVelocity(mms.velocity)
    flow_res, adr_res = [], []
    for n in (8, 16, 32):
        mesh = build_structured_mesh(n)
        vdm, pdm = build_dof_map(mesh, 2), build_dof_map(mesh, 1)
        sys = apply_velocity_dirichlet(assemble_flow_galerkin(mesh, vdm, pdm, case.flow_problem()), vdm)
        x = np.concatenate([vdm.interpolate(mms.component(mms.velocity, 0)),
                            vdm.interpolate(mms.component(mms.velocity, 1)), pdm.interpolate(mms.pressure)])
        flow_res.append(np.linalg.norm(sys.matrix @ x - sys.rhs))
        t = apply_concentration_dirichlet(assemble_adr(mesh, vdm, case.transport_problem(), vel, "galerkin"), vdm)
        adr_res.append(np.linalg.norm(t.matrix @ vdm.interpolate(mms.concentration) - t.rhs))
    for res in (flow_res, adr_res):
        assert res[0] > res[1] > res[2]
        assert res[1] / res[2] > 2.0
