"""Galerkin vs SGS comparison tables for the small-diffusion and
diffusion-dominated transport cases, plus the flow ladder of the smooth case.

    python scripts/run_tables.py [--meshes 10,20,40,80,160] [--outdir results]
"""
import argparse
import logging
import time
from pathlib import Path

from stabfem.harness import RunConfig, emit_csv, emit_markdown, markdown_tables, run_convergence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--meshes", default="10,20,40,80,160")
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    meshes = tuple(int(m) for m in args.meshes.split(","))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    cache = {}  # all cases share the flow, so it is solved once per mesh
    for case in ("small_diffusion", "diffusion_dominated", "smooth"):
        t0 = time.perf_counter()
        report = run_convergence(RunConfig(case=case, method="both", meshes=meshes), cache)
        emit_csv(report, outdir / f"{case}.csv")
        emit_markdown(report, outdir / f"{case}.md")
        print(markdown_tables(report))
        print(f"[{case}: {time.perf_counter() - t0:.1f}s]\n")


if __name__ == "__main__":
    main()
