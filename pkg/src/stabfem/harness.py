"""Convergence studies: configuration, the mesh ladder driver and table output."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .adr import solve_adr
from .flow import DEFAULT_C1, DEFAULT_C2, FlowSolution, solve_flow
from .mesh import build_dof_map, build_structured_mesh
from .mms import (ManufacturedCase, component, concentration, concentration_grad, get_case,
                  h1_error, l2_error, observed_order, pressure, velocity, velocity_grad)
from .sparse import SolverError, SolverOptions

log = logging.getLogger(__name__)

METHODS = ("galerkin", "sgs")
ERROR_COLUMNS = ("err_u1_h1", "err_u2_h1", "err_p_l2", "err_c_l2", "err_c_h1")
ORDER_COLUMNS = tuple("ord_" + c[4:] for c in ERROR_COLUMNS)
CSV_COLUMNS = ("n", "h") + ERROR_COLUMNS + ORDER_COLUMNS + ("div_u_l2", "solve_seconds")
ENV_PREFIX = "STABFEM_"
LABELS = {"galerkin": "Galerkin", "sgs": "SGS"}


class ConfigError(ValueError):
    """Invalid run configuration (exit status 2)."""


@dataclass(frozen=True)
class RunConfig:
    case: str = "smooth"
    method: str = "both"  # galerkin | sgs | both
    meshes: tuple[int, ...] = (10, 20, 40, 80, 160)
    solver: str = "lu"
    tol: float = 1e-10
    max_iter: int = 2000
    preconditioner: str = "ilu0"
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    # flow discretization feeding the transport solve; "auto" follows the
    # method, using the stabilized flow whenever SGS transport is requested
    flow_method: str = "auto"
    out: str | None = None
    markdown: str | None = None
    vtk: str | None = None

    def __post_init__(self):
        try:
            get_case(self.case)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if self.method not in METHODS + ("both",):
            raise ConfigError(f"method must be galerkin, sgs or both, got {self.method!r}")
        if self.flow_method not in METHODS + ("auto",):
            raise ConfigError(f"flow_method must be galerkin, sgs or auto, got {self.flow_method!r}")
        if self.solver not in ("lu", "bicgstab"):
            raise ConfigError(f"solver must be lu or bicgstab, got {self.solver!r}")
        if self.preconditioner not in ("none", "jacobi", "ilu0"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ConfigError(f"c1 and c2 must be positive, got {self.c1}, {self.c2}")
        check_ladder(self.meshes)

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)

    @property
    def resolved_flow_method(self) -> str:
        if self.flow_method != "auto":
            return self.flow_method
        return "galerkin" if self.method == "galerkin" else "sgs"

    def solver_options(self) -> SolverOptions:
        return SolverOptions(self.solver, self.tol, self.max_iter, self.preconditioner)


def check_ladder(meshes) -> None:
    """Strictly increasing, each a power-of-two multiple of the first."""
    meshes = tuple(meshes)
    if not meshes:
        raise ConfigError("mesh list is empty")
    if any(not isinstance(m, int) or m < 1 for m in meshes):
        raise ConfigError(f"mesh sizes must be positive integers, got {meshes}")
    for a, b in zip(meshes, meshes[1:]):
        if b <= a:
            raise ConfigError(f"mesh list must be strictly increasing, got {meshes}")
    for m in meshes:
        q, r = divmod(m, meshes[0])
        if r or q & (q - 1):
            raise ConfigError(f"{m} is not a power-of-two multiple of {meshes[0]}")


# ---------------------------------------------------------------- config I/O

def _coerce(name: str, raw: str):
    kind = {f.name: f for f in dataclasses.fields(RunConfig)}[name].type
    raw = raw.strip()
    try:
        if name == "meshes":
            return tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)
        if "float" in kind:
            return float(raw)
        if kind.startswith("int"):
            return int(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    if "None" in kind and raw.lower() in ("", "none"):
        return None
    return raw


def _known_keys() -> set[str]:
    return {f.name for f in dataclasses.fields(RunConfig)}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace(".", "_").replace("-", "_").lower()
        if key not in _known_keys():
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def env_overrides(environ: Mapping[str, str] | None = None) -> dict:
    environ = os.environ if environ is None else environ
    values = {}
    for key in _known_keys():
        var = ENV_PREFIX + key.upper().replace(".", "_")
        if var in environ:
            values[key] = _coerce(key, environ[var])
    return values


def load_config(path=None, overrides: Mapping | None = None,
                environ: Mapping[str, str] | None = None) -> RunConfig:
    """Defaults < config file < ``STABFEM_*`` environment < explicit overrides."""
    values: dict = {}
    if path is not None:
        values.update(parse_config_file(path))
    values.update(env_overrides(environ))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - _known_keys()
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ------------------------------------------------------------------ reports

@dataclass
class ConvergenceRow:
    n: int
    h: float
    err_u1_h1: float
    err_u2_h1: float
    err_p_l2: float
    err_c_l2: float
    err_c_h1: float
    div_u_l2: float
    solve_seconds: float
    iterations: int = 0


@dataclass
class ConvergenceReport:
    case: str
    methods: tuple[str, ...]
    flow_method: str
    c1: float
    c2: float
    solver: str
    rows: dict[str, list[ConvergenceRow]] = field(default_factory=dict)
    failure: str | None = None

    @property
    def complete(self) -> bool:
        return self.failure is None

    def orders(self, method: str) -> list[dict[str, float | None]]:
        """Observed orders between consecutive rows; None on the first row."""
        rows = self.rows[method]
        out: list[dict[str, float | None]] = [dict.fromkeys(ORDER_COLUMNS)]
        for a, b in zip(rows, rows[1:]):
            out.append({o: _order(getattr(a, e), getattr(b, e), b.n / a.n)
                        for e, o in zip(ERROR_COLUMNS, ORDER_COLUMNS)})
        return out[:len(rows)]

    def table(self, method: str) -> list[dict]:
        recs = []
        for row, ords in zip(self.rows[method], self.orders(method)):
            rec = {c: getattr(row, c) for c in ("n", "h") + ERROR_COLUMNS}
            rec.update(ords)
            rec["div_u_l2"] = row.div_u_l2
            rec["solve_seconds"] = row.solve_seconds
            recs.append(rec)
        return recs


def _order(e_coarse: float, e_fine: float, ratio: float) -> float | None:
    if e_coarse > 1e-14 and e_fine > 1e-14:
        return observed_order(e_coarse, e_fine, ratio)
    return None


# ------------------------------------------------------------------- driver

def _flow_key(case: ManufacturedCase, n: int, method: str, cfg: RunConfig) -> tuple:
    # every case shares the same manufactured (u, p), so the forcing depends
    # on (mu, sigma) only
    return (n, method, case.mu, case.sigma, cfg.c1, cfg.c2, cfg.solver, cfg.tol,
            cfg.max_iter, cfg.preconditioner)


def run_convergence(config: RunConfig, flow_cache: dict | None = None) -> ConvergenceReport:
    """Solve the flow once per mesh, then transport for each requested method.

    A solver failure stops the ladder; the rows computed so far are kept and
    ``failure`` carries the message.  ``flow_cache`` may be shared between
    calls to reuse flow solutions of identical (mesh, coefficients, options).
    """
    case = get_case(config.case)
    fm = config.resolved_flow_method
    opts = config.solver_options()
    report = ConvergenceReport(case.name, config.methods, fm, config.c1, config.c2, config.solver,
                               rows={m: [] for m in config.methods})
    flow_prob, transport = case.flow_problem(), case.transport_problem()
    cache = {} if flow_cache is None else flow_cache

    for n in config.meshes:
        mesh = build_structured_mesh(n)
        try:
            key = _flow_key(case, n, fm, config)
            t0 = time.perf_counter()
            if key not in cache:
                cache[key] = solve_flow(mesh, flow_prob, fm, opts, config.c1, config.c2)
            flow: FlowSolution = cache[key]
            flow_seconds = time.perf_counter() - t0
            errs_u = _flow_errors(flow)
            cdm = build_dof_map(mesh, 2)
            for method in config.methods:
                t1 = time.perf_counter()
                c, iters = solve_adr(mesh, transport, flow, method, opts, dofmap=cdm)
                seconds = flow_seconds + time.perf_counter() - t1
                report.rows[method].append(ConvergenceRow(
                    n=n, h=mesh.h, **errs_u,
                    err_c_l2=l2_error(c, concentration, cdm, mesh),
                    err_c_h1=h1_error(c, concentration, concentration_grad, cdm, mesh),
                    div_u_l2=flow.div_l2, solve_seconds=seconds,
                    iterations=flow.iterations + iters))
                log.info("case=%s n=%d method=%s c_h1=%.4e (%.1fs)", case.name, n, method,
                         report.rows[method][-1].err_c_h1, seconds)
        except SolverError as exc:
            report.failure = f"n={n}: {exc}"
            log.error("solver failure, stopping ladder at %s", report.failure)
            break
    return report


def _flow_errors(flow: FlowSolution) -> dict[str, float]:
    mesh, vdm, pdm = flow.mesh, flow.velocity_dofs, flow.pressure_dofs
    return {
        "err_u1_h1": h1_error(flow.u1, component(velocity, 0), component(velocity_grad, 0), vdm, mesh),
        "err_u2_h1": h1_error(flow.u2, component(velocity, 1), component(velocity_grad, 1), vdm, mesh),
        "err_p_l2": l2_error(flow.p, pressure, pdm, mesh),
    }


# ------------------------------------------------------------------- output

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.6g}"


def _csv_path(path: Path, method: str, report: ConvergenceReport) -> Path:
    if len(report.methods) == 1:
        return path
    return path.with_name(f"{path.stem}_{method}{path.suffix or '.csv'}")


def emit_csv(report: ConvergenceReport, path, method: str | None = None) -> list[Path]:
    """Write one CSV per method (``<stem>_<method>.csv`` when several are present)."""
    path = Path(path)
    methods = (method,) if method else report.methods
    written = []
    for m in methods:
        target = path if method else _csv_path(path, m, report)
        try:
            with target.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for rec in report.table(m):
                    w.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
        except OSError as exc:
            raise OSError(f"cannot write CSV {target}: {exc}") from exc
        written.append(target)
    return written


def read_csv(path) -> list[dict[str, float | None]]:
    with Path(path).open(newline="") as fh:
        return [{k: (float(v) if v != "" else None) for k, v in rec.items()}
                for rec in csv.DictReader(fh)]


def markdown_tables(report: ConvergenceReport) -> str:
    lines = [f"# Convergence study: case `{report.case}`", "",
             f"- methods: {', '.join(report.methods)}",
             f"- flow discretization: {report.flow_method}",
             f"- c1 = {report.c1:g}, c2 = {report.c2:g}, solver = {report.solver}"]
    if report.failure:
        lines.append(f"- **incomplete**: {report.failure}")
    lines.append("")
    if len(report.methods) > 1:
        lines += ["## Concentration H1 error", "",
                  "| Mesh size | " + " | ".join(f"{LABELS[m]} error | {LABELS[m]} order"
                                                 for m in report.methods) + " |",
                  "|---|" + "---|---|" * len(report.methods)]
        tables = {m: report.table(m) for m in report.methods}
        for i in range(max(len(t) for t in tables.values())):
            cells = []
            n = None
            for m in report.methods:
                rec = tables[m][i] if i < len(tables[m]) else None
                n = n or (rec and rec["n"])
                cells += [_fmt(rec["err_c_h1"]), _fmt(rec["ord_c_h1"])] if rec else ["", ""]
            lines.append(f"| {n} | " + " | ".join(cells) + " |")
        lines.append("")
    for m in report.methods:
        lines += [f"## {m}", "", "| " + " | ".join(CSV_COLUMNS) + " |",
                  "|" + "---|" * len(CSV_COLUMNS)]
        lines += ["| " + " | ".join(_fmt(rec[c]) for c in CSV_COLUMNS) + " |"
                  for rec in report.table(m)]
        lines.append("")
    return "\n".join(lines)


def emit_markdown(report: ConvergenceReport, path) -> Path:
    path = Path(path)
    try:
        path.write_text(markdown_tables(report))
    except OSError as exc:
        raise OSError(f"cannot write Markdown {path}: {exc}") from exc
    return path
