"""End-to-end run: generate -> reduce -> build -> solve -> evaluate -> write reports."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .domain import DmoSchedule, MicrogridSpec
from .evaluation import (
    CostReport,
    ScheduleSolution,
    evaluate,
    hourly_costs,
    reconstruct_counters,
    solution_from_vector,
)
from .formulation import build_model, model_stats
from .io import InstanceError, SpecValidationError, load_instance
from .solver import MilpSolution, SolverConfig, solve_milp, solve_via_plugin
from .uncertainty import InvalidConfigError, ScenarioConfig, ScenarioSet, generate_scenarios, reduce_scenarios

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4
EXIT_SOLVER_ERROR = 5

_LIMIT_STATUSES = {"gap_limit", "node_limit", "time_limit"}

SOLUTION_FILE = "solution.json"
COST_REPORT_FILE = "cost_report.json"
DISPATCH_FILE = "dispatch.csv"
MANIFEST_FILE = "manifest.json"
PLOT_FILES = ("plot_cost_by_hour.csv", "plot_grid_transfer.csv", "plot_unit_dispatch.csv")

# manifest fields that legitimately differ between identical runs
VOLATILE_MANIFEST_FIELDS = ("started_at", "wall_time")


@dataclass(frozen=True)
class RunConfig:
    input: Path
    out: Path
    scenarios: ScenarioConfig = field(default_factory=lambda: ScenarioConfig(n_scenarios=10))
    reduce_to: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    plugin: str | None = None
    emit_plot_data: bool = False

    def check(self) -> None:
        if not str(self.input):
            raise InvalidConfigError("input path is empty")
        if not str(self.out):
            raise InvalidConfigError("output directory is empty")
        self.scenarios.check()
        if self.reduce_to is not None and not 1 <= self.reduce_to <= self.scenarios.n_scenarios:
            raise InvalidConfigError(
                f"reduce_to must be in [1, {self.scenarios.n_scenarios}], got {self.reduce_to}")

    def to_dict(self) -> dict:
        return {
            "input": str(self.input),
            "scenarios": dataclasses.asdict(self.scenarios),
            "reduce_to": self.reduce_to,
            "solver": dataclasses.asdict(self.solver),
            "plugin": self.plugin,
            "emit_plot_data": self.emit_plot_data,
        }


@dataclass
class Outcome:
    """Everything produced by one solve."""

    scenarios: ScenarioSet
    milp: MilpSolution
    solution: ScheduleSolution | None
    report: CostReport | None
    stats: tuple

    @property
    def exit_code(self) -> int:
        return exit_code_for(self.milp.status)


@dataclass
class RunResult:
    exit_code: int
    message: str = ""
    outcome: Outcome | None = None
    files: list[Path] = field(default_factory=list)


def exit_code_for(status: str) -> int:
    if status == "optimal":
        return EXIT_OK
    if status in _LIMIT_STATUSES:
        return EXIT_LIMIT
    return EXIT_INFEASIBLE


def prepare_scenarios(spec: MicrogridSpec, dmo: DmoSchedule, cfg: ScenarioConfig,
                      reduce_to: int | None = None) -> ScenarioSet:
    scenarios = generate_scenarios(spec, cfg)
    if reduce_to is not None and reduce_to < len(scenarios):
        scenarios = reduce_scenarios(scenarios, reduce_to, islanding_scale=dmo.p_m_max)
    return scenarios


def solve_schedule(spec: MicrogridSpec, dmo: DmoSchedule, scenarios: ScenarioSet,
                   solver: SolverConfig | None = None, plugin: str | None = None) -> Outcome:
    """Build and solve the scheduling model, then audit the result independently."""
    solver = solver or SolverConfig()
    model, index = build_model(spec, scenarios, dmo)
    stats = model_stats(model)
    log.info("model: %d columns (%d binary), %d rows", stats.n_vars, stats.n_binaries, stats.n_constraints)
    milp = solve_via_plugin(model, plugin, solver) if plugin else solve_milp(model, solver)
    log.info("solver %s finished: %s, objective %s, gap %.3g", milp.solver, milp.status, milp.objective, milp.gap)
    sol = report = None
    if milp.has_incumbent:
        sol = solution_from_vector(spec, scenarios, index, milp.x, milp.objective, milp.status)
        sol = reconstruct_counters(sol, spec)
        report = evaluate(spec, scenarios, dmo, sol)
        if report.violations:
            log.warning("%d constraint violations in the returned schedule", len(report.violations))
    return Outcome(scenarios, milp, sol, report, tuple(stats))


def config_hash(cfg: RunConfig) -> str:
    h = hashlib.sha256(json.dumps(cfg.to_dict(), sort_keys=True).encode())
    h.update(Path(cfg.input).read_bytes())
    return h.hexdigest()


def _num(x: float) -> str:
    return repr(float(x))


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def _csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def dispatch_rows(spec: MicrogridSpec, scenarios: ScenarioSet, sol: ScheduleSolution, eps: float = 1e-9):
    K = spec.time_grid.subperiods_per_hour
    series = []
    for n, g in enumerate(spec.dispatchable_units):
        series.append((g.id, "P", sol.P[n]))
    for n, st in enumerate(spec.storage_units):
        series.append((st.id, "P", sol.P_storage[n]))
        series.append((st.id, "C", sol.C[n]))
    for n, d in enumerate(spec.adjustable_loads):
        series.append((d.id, "D", sol.D[n]))
    for name in ("PM", "LS", "dP", "dPplus"):
        series.append(("grid" if name != "LS" else "microgrid", name, getattr(sol, name)))
    for s, sc in enumerate(scenarios):
        for k in range(spec.time_grid.n_steps):
            for entity, qty, arr in series:
                v = float(arr[k, s])
                if abs(v) > eps:
                    yield sc.id, k // K, k % K, entity, qty, _num(v)


def write_outputs(out: Path, spec: MicrogridSpec, dmo: DmoSchedule, outcome: Outcome,
                  emit_plot_data: bool) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    files = []
    milp = outcome.milp
    header = {"status": milp.status, "objective": milp.objective,
              "bound": milp.bound if np.isfinite(milp.bound) else None, "gap": _finite(milp.gap),
              "nodes": milp.nodes, "solver": milp.solver}
    sol_doc = dict(header, scenarios=[sc.id for sc in outcome.scenarios],
                   probabilities=[sc.probability for sc in outcome.scenarios],
                   schedule=outcome.solution.to_dict() if outcome.solution else None)
    files.append(_write_json(out / SOLUTION_FILE, sol_doc))
    files.append(_write_json(out / COST_REPORT_FILE,
                             dict(header, report=outcome.report.to_dict() if outcome.report else None)))
    rows = dispatch_rows(spec, outcome.scenarios, outcome.solution) if outcome.solution else ()
    files.append(_csv(out / DISPATCH_FILE, ["scenario", "hour", "subperiod", "entity", "quantity", "value"], rows))
    if emit_plot_data and outcome.solution is not None:
        files += write_plot_data(out, spec, dmo, outcome)
    return files


def write_plot_data(out: Path, spec: MicrogridSpec, dmo: DmoSchedule, outcome: Outcome) -> list[Path]:
    sol, scenarios = outcome.solution, outcome.scenarios
    grid = spec.time_grid
    K = grid.subperiods_per_hour
    costs = hourly_costs(spec, scenarios, dmo, sol)
    names = list(costs)
    cost_rows = []
    for t in range(grid.n_hours):
        vals = [costs[c][t] for c in names]
        cost_rows.append([t] + [_num(v) for v in vals] + [_num(sum(vals))])
    files = [_csv(out / PLOT_FILES[0], ["hour"] + names + ["total"], cost_rows)]

    grid_rows = []
    for s, sc in enumerate(scenarios):
        for k in range(grid.n_steps):
            grid_rows.append([sc.id, k // K, k % K, _num(dmo.p_sched[k // K]), _num(sol.PM[k, s])])
    files.append(_csv(out / PLOT_FILES[1], ["scenario", "hour", "subperiod", "p_sched", "p_m"], grid_rows))

    probs = scenarios.probabilities
    unit_rows = []
    for n, g in enumerate(spec.dispatchable_units):
        expected = sol.P[n] @ probs
        for k in range(grid.n_steps):
            unit_rows.append([g.id, k // K, k % K, int(round(sol.I[n, k // K])), _num(expected[k])])
    files.append(_csv(out / PLOT_FILES[2], ["unit", "hour", "subperiod", "committed", "expected_power"], unit_rows))
    return files


def _finite(x: float):
    return float(x) if np.isfinite(x) else None


def run(cfg: RunConfig, solve=None) -> RunResult:
    """Execute one batch run. Never raises for input or solver problems; see ``exit_code``.

    ``solve(spec, dmo, cfg) -> Outcome`` replaces the in-process solve (used by the
    thin HTTP client).
    """
    started = datetime.now(timezone.utc)
    t0 = time.monotonic()
    try:
        cfg.check()
        spec, dmo = load_instance(cfg.input)
    except SpecValidationError as exc:
        return RunResult(EXIT_INPUT_ERROR, str(exc))
    except (InstanceError, InvalidConfigError) as exc:
        return RunResult(EXIT_INPUT_ERROR, f"input error: {exc}")

    try:
        if solve is None:
            scenarios = prepare_scenarios(spec, dmo, cfg.scenarios, cfg.reduce_to)
            outcome = solve_schedule(spec, dmo, scenarios, cfg.solver, cfg.plugin)
        else:
            outcome = solve(spec, dmo, cfg)
    except KeyError as exc:  # unknown plugin
        return RunResult(EXIT_INPUT_ERROR, f"input error: {exc.args[0]}")
    except RuntimeError as exc:
        return RunResult(EXIT_SOLVER_ERROR, f"solver error: {exc}")

    out = Path(cfg.out)
    files = write_outputs(out, spec, dmo, outcome, cfg.emit_plot_data)
    milp = outcome.milp
    manifest = {
        "version": __version__,
        "seed": cfg.scenarios.seed,
        "config_hash": config_hash(cfg),
        "config": cfg.to_dict(),
        "status": milp.status,
        "objective": milp.objective,
        "gap": _finite(milp.gap),
        "nodes": milp.nodes,
        "solver": milp.solver,
        "model": dict(zip(("n_vars", "n_binaries", "n_constraints", "n_nonzeros"), outcome.stats)),
        "files": sorted(p.name for p in files),
        "started_at": started.isoformat(),
        "wall_time": time.monotonic() - t0,
    }
    files.append(_write_json(out / MANIFEST_FILE, manifest))
    message = f"status {milp.status}"
    if milp.objective is not None:
        message += f", expected cost {milp.objective:.6f}"
    if outcome.report is not None and outcome.report.violations:
        message += f", {len(outcome.report.violations)} constraint violations"
    return RunResult(outcome.exit_code, message, outcome, files)
