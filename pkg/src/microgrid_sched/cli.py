"""Command-line entry point.

Solves locally by default. With ``--server URL`` the solve is delegated to a
running instance of the HTTP service and only the report files are written here.
Log verbosity comes from the ``SCHEDULER_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``...; default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .evaluation import ScheduleSolution, evaluate, reconstruct_counters
from .pipeline import EXIT_INPUT_ERROR, EXIT_SOLVER_ERROR, Outcome, RunConfig, run
from .solver import MilpSolution, SolverConfig
from .uncertainty import ScenarioConfig, ScenarioSet


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="microgrid-sched",
                                description="Day-ahead stochastic microgrid scheduling against a DMO transfer schedule.")
    p.add_argument("--input", required=True, type=Path, help="instance document (JSON)")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--scenarios", type=int, default=10, help="number of generated scenarios")
    p.add_argument("--band-renewable", type=float, default=0.1, help="relative forecast error band of renewables")
    p.add_argument("--band-load", type=float, default=0.1, help="relative forecast error band of loads")
    p.add_argument("--islanding-prob", type=float, default=0.0, help="per-hour probability an outage starts")
    p.add_argument("--max-island-hours", type=int, default=1, help="longest outage, in hours")
    p.add_argument("--reduce-to", type=int, default=None, help="keep this many scenarios after reduction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap", type=float, default=1e-6, help="relative optimality gap")
    p.add_argument("--time-limit", type=float, default=None, help="solver time limit in seconds")
    p.add_argument("--node-limit", type=int, default=None, help="branch-and-bound node limit")
    p.add_argument("--plugin", default=None, help="external solver plugin (e.g. highs, scipy)")
    p.add_argument("--emit-plot-data", action="store_true", help="also write CSV series for plotting")
    p.add_argument("--server", default=None, metavar="URL", help="delegate solving to this service")
    return p


def _configure_logging() -> None:
    level = os.environ.get("SCHEDULER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def remote_solver(url: str, timeout: float | None = None):
    """Solve callback for :func:`microgrid_sched.pipeline.run` that posts to the service."""
    import httpx

    def solve(spec, dmo, cfg: RunConfig) -> Outcome:
        body = {
            "instance": json.loads(Path(cfg.input).read_text()),
            "config": vars(cfg.scenarios),
            "reduce_to": cfg.reduce_to,
            "solver": {"gap_tol": cfg.solver.gap_tol, "integrality_tol": cfg.solver.integrality_tol,
                       "node_limit": cfg.solver.node_limit, "time_limit": cfg.solver.time_limit},
            "plugin": cfg.plugin,
        }
        try:
            resp = httpx.post(url.rstrip("/") + "/solve", json=body, timeout=timeout)
        except httpx.HTTPError as exc:
            raise RuntimeError(f"cannot reach {url}: {exc}") from None
        if resp.status_code == 422:
            raise KeyError(f"service rejected the request: {resp.json().get('detail')}")
        if resp.status_code != 200:
            raise RuntimeError(f"service returned HTTP {resp.status_code}: {resp.text[:500]}")
        data = resp.json()
        scenarios = ScenarioSet.from_dict(data["scenarios"], spec.time_grid.n_steps)
        sol = report = None
        if data["schedule"] is not None:
            sol = ScheduleSolution.from_dict(data["schedule"], spec, len(scenarios))
            sol = reconstruct_counters(sol, spec)
            report = evaluate(spec, scenarios, dmo, sol)
        milp = MilpSolution(data["status"], None, data["objective"],
                            data["bound"] if data["bound"] is not None else float("-inf"),
                            data["nodes"], solver=data["solver"])
        stats = tuple(data["model"][k] for k in ("n_vars", "n_binaries", "n_constraints", "n_nonzeros"))
        return Outcome(scenarios, milp, sol, report, stats)

    return solve


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging()
    try:
        solver = SolverConfig(gap_tol=args.gap, node_limit=args.node_limit, time_limit=args.time_limit)
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    cfg = RunConfig(
        input=args.input,
        out=args.out,
        scenarios=ScenarioConfig(n_scenarios=args.scenarios, renewable_band=args.band_renewable,
                                 load_band=args.band_load, islanding_prob_per_hour=args.islanding_prob,
                                 max_island_hours=args.max_island_hours, seed=args.seed),
        reduce_to=args.reduce_to,
        solver=solver,
        plugin=args.plugin,
        emit_plot_data=args.emit_plot_data,
    )
    result = run(cfg, remote_solver(args.server) if args.server else None)
    stream = sys.stdout if result.exit_code == 0 else sys.stderr
    print(result.message, file=stream)
    if result.files:
        print(f"wrote {len(result.files)} files to {args.out}", file=stream)
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


__all__ = ["main", "build_parser", "remote_solver", "EXIT_SOLVER_ERROR"]
