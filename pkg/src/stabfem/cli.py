"""``stabfem`` command line: single solves, convergence ladders and tau values.

Exit status: 0 success, 1 solver failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .adr import compute_tau3, solve_adr
from .flow import DEFAULT_C1, DEFAULT_C2, compute_flow_taus, solve_flow
from .harness import (ConfigError, RunConfig, emit_csv, emit_markdown, load_config,
                      markdown_tables, run_convergence)
from .mesh import build_dof_map, build_structured_mesh
from .mms import concentration, concentration_grad, get_case, h1_error, l2_error
from .sparse import SolverError
from .vtk import write_vtk

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("stabfem")


def _meshes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' configuration file")
    p.add_argument("--case", help="manufactured case: smooth|small_diffusion|diffusion_dominated (or a|b|c)")
    p.add_argument("--method", help="galerkin | sgs | both")
    p.add_argument("--flow-method", dest="flow_method", help="flow discretization: galerkin | sgs | auto")
    p.add_argument("--meshes", type=_meshes, help="comma-separated subdivisions, e.g. 10,20,40")
    p.add_argument("--solver", help="lu | bicgstab")
    p.add_argument("--tol", type=float, help="BiCGSTAB relative residual tolerance")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--preconditioner", help="none | jacobi | ilu0")
    p.add_argument("--c1", type=float, help=f"flow constant c1 (default {DEFAULT_C1:g})")
    p.add_argument("--c2", type=float, help=f"flow constant c2 (default {DEFAULT_C2:g})")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--markdown", help="Markdown output path")
    p.add_argument("--vtk", help="VTK output path (solve only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabfem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve flow and transport on one mesh")
    _add_run_flags(p)
    p.add_argument("-n", type=int, help="mesh subdivisions (default: first of --meshes)")

    p = sub.add_parser("converge", help="run a mesh ladder and print error/order tables")
    _add_run_flags(p)

    p = sub.add_parser("taus", help="print stabilization parameters")
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--h", type=float, required=True, help="element size")
    p.add_argument("--c1", type=float, default=DEFAULT_C1)
    p.add_argument("--c2", type=float, default=DEFAULT_C2)
    p.add_argument("--D", type=float, default=0.0, help="diffusion for tau3")
    p.add_argument("--U", type=float, default=0.0, help="speed for tau3")
    p.add_argument("--alpha", type=float, default=0.0, help="reaction for tau3")
    return parser


def _config(args) -> RunConfig:
    keys = ("case", "method", "flow_method", "meshes", "solver", "tol", "max_iter",
            "preconditioner", "c1", "c2", "out", "markdown", "vtk")
    return load_config(args.config, {k: getattr(args, k) for k in keys})


def cmd_solve(args) -> int:
    cfg = _config(args)
    n = args.n or cfg.meshes[0]
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    case = get_case(cfg.case)
    mesh = build_structured_mesh(n)
    opts = cfg.solver_options()
    flow = solve_flow(mesh, case.flow_problem(), cfg.resolved_flow_method, opts, cfg.c1, cfg.c2)
    cdm = build_dof_map(mesh, 2)
    fields = {"u1": flow.u1, "u2": flow.u2, "p": flow.p}
    print(f"case={case.name} n={n} h={mesh.h:.6g} flow={cfg.resolved_flow_method} "
          f"div_u_l2={flow.div_l2:.6g}")
    for method in cfg.methods:
        c, iters = solve_adr(mesh, case.transport_problem(), flow, method, opts, dofmap=cdm)
        fields[f"c_{method}" if len(cfg.methods) > 1 else "c"] = c
        print(f"  {method}: err_c_l2={l2_error(c, concentration, cdm, mesh):.6g} "
              f"err_c_h1={h1_error(c, concentration, concentration_grad, cdm, mesh):.6g} "
              f"iterations={iters}")
    if cfg.vtk:
        print(f"wrote {write_vtk(cfg.vtk, mesh, fields, title=f'{case.name} n={n}')}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _config(args)
    report = run_convergence(cfg)
    print(markdown_tables(report))
    if cfg.out:
        for path in emit_csv(report, cfg.out):
            print(f"wrote {path}")
    if cfg.markdown:
        print(f"wrote {emit_markdown(report, cfg.markdown)}")
    if not report.complete:
        print(f"solver failure: {report.failure}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_taus(args) -> int:
    try:
        stab = compute_flow_taus(args.mu, args.sigma, args.h, args.c1, args.c2)
        print(f"tau1 = {stab.tau1:.17g}\ntau2 = {stab.tau2:.17g}")
        if args.D or args.U or args.alpha:
            print(f"tau3 = {compute_tau3(args.D, args.U, args.alpha, args.h):.17g}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": cmd_solve, "converge": cmd_converge, "taus": cmd_taus}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
