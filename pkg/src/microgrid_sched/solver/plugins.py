"""External-solver adapters.

An adapter receives the path of an LP-format model, the path where it must write
a solution file (see :mod:`microgrid_sched.formulation.lpformat`) and the solver
config. Adapters are registered by name; :func:`solve_via_plugin` handles the file
round trip and maps the result back onto the model's columns.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
import time
from pathlib import Path
from typing import Callable

import numpy as np

from ..formulation.lpformat import read_lp, read_lp_solution, write_lp, write_solution
from ..formulation.model import MilpModel
from .bnb import MilpSolution, SolverConfig

Adapter = Callable[[Path, Path, SolverConfig], None]

_REGISTRY: dict[str, Adapter] = {}


class UnknownPluginError(KeyError):
    pass


class ExternalSolverError(RuntimeError):
    pass


def register_plugin(name: str, adapter: Adapter) -> None:
    _REGISTRY[name] = adapter


def unregister_plugin(name: str) -> None:
    _REGISTRY.pop(name, None)


def available_plugins() -> list[str]:
    return sorted(_REGISTRY)


def command_adapter(argv: str | list[str]) -> Adapter:
    """Adapter running an external program as ``argv... <lp path> <solution path>``."""
    base = shlex.split(argv) if isinstance(argv, str) else list(argv)

    def run(lp_path: Path, sol_path: Path, cfg: SolverConfig) -> None:
        proc = subprocess.run(base + [str(lp_path), str(sol_path)], capture_output=True, text=True,
                              timeout=cfg.time_limit)
        if proc.returncode != 0:
            raise ExternalSolverError(f"{base[0]} exited with {proc.returncode}: {proc.stderr.strip()[:500]}")

    return run


def _highs_adapter(lp_path: Path, sol_path: Path, cfg: SolverConfig) -> None:
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", cfg.gap_tol)
    h.setOptionValue("mip_feasibility_tolerance", min(cfg.integrality_tol, 1e-6))
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    if cfg.time_limit is not None:
        h.setOptionValue("time_limit", float(cfg.time_limit))
    if cfg.node_limit is not None:
        h.setOptionValue("mip_max_nodes", int(cfg.node_limit))
    if h.readModel(str(lp_path)) != highspy.HighsStatus.kOk:
        raise ExternalSolverError(f"HiGHS could not read {lp_path}")
    h.run()
    status = h.getModelStatus()
    M = highspy.HighsModelStatus
    mapping = {
        M.kOptimal: "optimal",
        M.kInfeasible: "infeasible",
        M.kUnbounded: "unbounded",
        M.kUnboundedOrInfeasible: "infeasible",
        M.kTimeLimit: "time_limit",
        M.kSolutionLimit: "node_limit",
    }
    if hasattr(M, "kNodeLimit"):
        mapping[M.kNodeLimit] = "node_limit"
    name = mapping.get(status)
    if name is None:
        raise ExternalSolverError(f"HiGHS finished with status {h.modelStatusToString(status)}")
    info = h.getInfo()
    values = {}
    objective = None
    if info.primal_solution_status == 2 or name == "optimal":
        sol = h.getSolution()
        lp = h.getLp()
        values = dict(zip(lp.col_names_, sol.col_value))
        objective = info.objective_function_value
    bound = getattr(info, "mip_dual_bound", None)
    if bound is not None and not math.isfinite(bound):
        bound = None
    write_solution(sol_path, name, objective, values, bound)


def _scipy_adapter(lp_path: Path, sol_path: Path, cfg: SolverConfig) -> None:
    """Parse the LP file ourselves and hand the arrays to ``scipy.optimize.milp``."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    model = read_lp(lp_path)
    lb, ub = model.bounds()
    lo, hi = model.row_bounds()
    integrality = np.array([1 if v.kind == "binary" else 0 for v in model.variables])
    options = {"mip_rel_gap": cfg.gap_tol, "disp": False}
    if cfg.time_limit is not None:
        options["time_limit"] = float(cfg.time_limit)
    if cfg.node_limit is not None:
        options["node_limit"] = int(cfg.node_limit)
    cons = [LinearConstraint(model.matrix(), lo, hi)] if model.n_constraints else []
    res = milp(model.cost_vector(), constraints=cons, integrality=integrality, bounds=Bounds(lb, ub),
               options=options)
    status = {0: "optimal", 1: "time_limit", 2: "infeasible", 3: "unbounded"}.get(res.status)
    if status is None:
        raise ExternalSolverError(f"scipy.optimize.milp failed: {res.message}")
    if res.status == 1 and "node" in str(res.message).lower():
        status = "node_limit"
    values = {} if res.x is None else {v.name: float(x) for v, x in zip(model.variables, res.x)}
    write_solution(sol_path, status, None if res.x is None else float(res.fun), values)


register_plugin("scipy", _scipy_adapter)
try:  # pragma: no cover - depends on the environment
    import highspy  # noqa: F401

    register_plugin("highs", _highs_adapter)
except ImportError:  # pragma: no cover
    pass


def solve_via_plugin(model: MilpModel, plugin_name: str, cfg: SolverConfig | None = None,
                     workdir: str | Path | None = None) -> MilpSolution:
    """Export ``model`` to LP format, run the named adapter, and read its solution back."""
    cfg = cfg or SolverConfig()
    if plugin_name not in _REGISTRY:
        raise UnknownPluginError(f"no solver plugin registered under {plugin_name!r}; "
                                 f"available: {', '.join(available_plugins()) or 'none'}")
    model.check()
    adapter = _REGISTRY[plugin_name]
    start = time.monotonic()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp_path = write_lp(model, Path(tmp) / "model.lp")
        sol_path = Path(tmp) / "model.sol"
        try:
            adapter(lp_path, sol_path, cfg)
        except (UnknownPluginError, ExternalSolverError):
            raise
        except Exception as exc:
            raise ExternalSolverError(f"plugin {plugin_name!r} failed: {exc}") from exc
        if not sol_path.exists():
            raise ExternalSolverError(f"plugin {plugin_name!r} wrote no solution file")
        status, objective, values, bound = read_lp_solution(sol_path)
    elapsed = time.monotonic() - start

    x = None
    if values:
        x = np.zeros(model.n_vars)
        missing = []
        for j, v in enumerate(model.variables):
            if v.name in values:
                x[j] = values[v.name]
            elif v.lb == v.ub:
                x[j] = v.lb
            else:
                missing.append(v.name)
        if missing:
            raise ExternalSolverError(f"solution lacks {len(missing)} columns, e.g. {missing[0]}")
        binaries = model.binary_columns()
        x[binaries] = np.round(x[binaries])
        objective = float(model.objective_value(x))
    if status == "optimal":
        bound = objective if bound is None else min(bound, objective)
    return MilpSolution(status, x, objective, -math.inf if bound is None else bound, 0, 0, elapsed,
                        solver=plugin_name)
