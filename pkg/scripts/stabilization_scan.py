"""Sensitivity of observed orders to the flow constant c1 and to the element
lengths used in tau3 (diameter / divisor, separately for the diffusive and
advective terms).

    python scripts/stabilization_scan.py flow --c1 4,32,128 --meshes 10,20,40,80
    python scripts/stabilization_scan.py transport --case b --divisors 1:1,4:4,8:4,8:8
"""
import argparse

from stabfem.adr import AnalyticVelocity, solve_adr
from stabfem.flow import solve_flow
from stabfem.mesh import build_dof_map, build_structured_mesh
from stabfem.mms import (component, concentration, concentration_grad, get_case, h1_error, l2_error,
                         observed_order, pressure, velocity, velocity_grad)


def orders(errs):
    return " ".join(f"{observed_order(a, b):6.3f}" for a, b in zip(errs, errs[1:]))


def scan_flow(case, meshes, c1s):
    prob = case.flow_problem()
    for c1 in c1s:
        eu, ep = [], []
        for n in meshes:
            sol = solve_flow(build_structured_mesh(n), prob, "sgs", c1=c1)
            eu.append(h1_error(sol.u1, component(velocity, 0), component(velocity_grad, 0),
                               sol.velocity_dofs, sol.mesh))
            ep.append(l2_error(sol.p, pressure, sol.pressure_dofs, sol.mesh))
        print(f"c1={c1:8g}  u1-H1 orders {orders(eu)}   p-L2 orders {orders(ep)}")


def scan_transport(case, meshes, divisors):
    vel = AnalyticVelocity(velocity)
    for div in divisors:
        errs = []
        for n in meshes:
            mesh = build_structured_mesh(n)
            dm = build_dof_map(mesh, 2)
            c, _ = solve_adr(mesh, case.transport_problem(), vel, "sgs", dofmap=dm, tau3_divisors=div)
            errs.append(h1_error(c, concentration, concentration_grad, dm, mesh))
        print(f"divisors {div[0]:g}:{div[1]:g}  c-H1 {errs[-1]:.4e}  orders {orders(errs)}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("what", choices=["flow", "transport"])
    ap.add_argument("--case", default="smooth")
    ap.add_argument("--meshes", default="10,20,40,80")
    ap.add_argument("--c1", default="4,32,128")
    ap.add_argument("--divisors", default="1:1,4:4,8:4,8:8")
    args = ap.parse_args()
    meshes = [int(m) for m in args.meshes.split(",")]
    case = get_case(args.case)
    if args.what == "flow":
        scan_flow(case, meshes, [float(c) for c in args.c1.split(",")])
    else:
        scan_transport(case, meshes, [tuple(float(v) for v in d.split(":")) for d in args.divisors.split(",")])
