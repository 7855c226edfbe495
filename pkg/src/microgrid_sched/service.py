"""HTTP service exposing validation, scenario handling, solving and evaluation.

Run with ``microgrid-sched-serve`` or ``uvicorn microgrid_sched.service:app``.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, HTTPException

from . import __version__
from .domain import validate_spec
from .evaluation import DimensionError, ScheduleSolution, evaluate
from .io import InstanceError, parse_instance
from .pipeline import prepare_scenarios, solve_schedule
from .schemas import (
    EvaluateRequest,
    EvaluateResponse,
    HealthResponse,
    ReduceRequest,
    ScenarioConfigBody,
    ScenariosRequest,
    ScenarioSetBody,
    SolveRequest,
    SolveResponse,
    ValidateRequest,
    ValidateResponse,
    ViolationBody,
)
from .solver import ExternalSolverError, SolverConfig, UnknownPluginError, available_plugins
from .uncertainty import InvalidConfigError, ScenarioConfig, ScenarioSet, reduce_scenarios

log = logging.getLogger(__name__)

app = FastAPI(title="microgrid scheduler", version=__version__)


def _instance(doc: dict, validate: bool = True):
    try:
        spec, dmo = parse_instance(doc)
    except InstanceError as exc:
        raise HTTPException(status_code=422, detail={"error": "instance", "path": exc.path, "message": str(exc)})
    if validate:
        report = validate_spec(spec, dmo)
        if not report.ok:
            raise HTTPException(status_code=422, detail={"error": "validation", "violations": report.lines()})
    return spec, dmo


def _scenario_config(body: ScenarioConfigBody) -> ScenarioConfig:
    cfg = ScenarioConfig(**body.model_dump())
    try:
        cfg.check()
    except InvalidConfigError as exc:
        raise HTTPException(status_code=422, detail={"error": "config", "message": str(exc)})
    return cfg


def _scenario_set(body: ScenarioSetBody, n_steps: int | None = None) -> ScenarioSet:
    try:
        scenarios = ScenarioSet.from_dict(body.model_dump(), n_steps)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail={"error": "scenarios", "message": str(exc)})
    problems = scenarios.check()
    if problems:
        raise HTTPException(status_code=422, detail={"error": "scenarios", "message": "; ".join(problems)})
    return scenarios


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__, plugins=available_plugins())


@app.post("/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    spec, dmo = _instance(req.instance, validate=False)
    report = validate_spec(spec, dmo)
    return ValidateResponse(ok=report.ok, violations=[ViolationBody(asset=v.asset, field=v.field, rule=v.rule)
                                                      for v in report])


@app.post("/scenarios", response_model=ScenarioSetBody)
def scenarios(req: ScenariosRequest):
    spec, dmo = _instance(req.instance)
    cfg = _scenario_config(req.config)
    if req.reduce_to is not None and not 1 <= req.reduce_to <= cfg.n_scenarios:
        raise HTTPException(status_code=422, detail={"error": "config", "message": "reduce_to out of range"})
    return prepare_scenarios(spec, dmo, cfg, req.reduce_to).to_dict()


@app.post("/reduce", response_model=ScenarioSetBody)
def reduce(req: ReduceRequest):
    scen = _scenario_set(req.scenarios)
    try:
        return reduce_scenarios(scen, req.k, islanding_scale=req.islanding_scale).to_dict()
    except ValueError as exc:
        raise HTTPException(status_code=422, detail={"error": "config", "message": str(exc)})


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest):
    spec, dmo = _instance(req.instance)
    if req.scenarios is not None:
        scen = _scenario_set(req.scenarios, spec.time_grid.n_steps)
    else:
        cfg = _scenario_config(req.config)
        if req.reduce_to is not None and not 1 <= req.reduce_to <= cfg.n_scenarios:
            raise HTTPException(status_code=422, detail={"error": "config", "message": "reduce_to out of range"})
        scen = prepare_scenarios(spec, dmo, cfg, req.reduce_to)
    try:
        solver = SolverConfig(**req.solver.model_dump())
        outcome = solve_schedule(spec, dmo, scen, solver, req.plugin)
    except UnknownPluginError as exc:
        raise HTTPException(status_code=422, detail={"error": "plugin", "message": exc.args[0]})
    except ValueError as exc:
        raise HTTPException(status_code=422, detail={"error": "model", "message": str(exc)})
    except ExternalSolverError as exc:
        raise HTTPException(status_code=502, detail={"error": "solver", "message": str(exc)})
    milp = outcome.milp
    return SolveResponse(
        status=milp.status,
        objective=milp.objective,
        bound=milp.bound if abs(milp.bound) != float("inf") else None,
        gap=milp.gap if milp.gap != float("inf") else None,
        nodes=milp.nodes,
        solver=milp.solver,
        model=dict(zip(("n_vars", "n_binaries", "n_constraints", "n_nonzeros"), outcome.stats)),
        scenarios=outcome.scenarios.to_dict(),
        schedule=outcome.solution.to_dict() if outcome.solution else None,
        report=outcome.report.to_dict() if outcome.report else None,
    )


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_schedule(req: EvaluateRequest):
    spec, dmo = _instance(req.instance)
    scen = _scenario_set(req.scenarios, spec.time_grid.n_steps)
    try:
        sol = ScheduleSolution.from_dict(req.schedule, spec, len(scen))
        report = evaluate(spec, scen, dmo, sol)
    except (DimensionError, KeyError) as exc:
        raise HTTPException(status_code=422, detail={"error": "schedule", "message": str(exc)})
    return EvaluateResponse(feasible=report.feasible, report=report.to_dict())


def serve(argv: list[str] | None = None) -> None:  # pragma: no cover - starts a server
    """Run the service with uvicorn (install the ``serve`` extra)."""
    import argparse

    import uvicorn

    p = argparse.ArgumentParser(prog="microgrid-sched-serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    args = p.parse_args(argv)
    uvicorn.run(app, host=args.host, port=args.port)
