"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScenarioConfigBody(_Body):
    n_scenarios: int = 10
    renewable_band: float = 0.1
    load_band: float = 0.1
    islanding_prob_per_hour: float = 0.0
    max_island_hours: int = 1
    seed: int = 0


class SolverConfigBody(_Body):
    gap_tol: float = 1e-6
    integrality_tol: float = 1e-6
    node_limit: int | None = None
    time_limit: float | None = None


class ScenarioBody(_Body):
    id: str
    probability: float
    renewables: list[list[float]]
    loads: list[list[float]]
    grid_connected: list[int]


class ScenarioSetBody(_Body):
    scenarios: list[ScenarioBody]


class ViolationBody(_Body):
    asset: str
    field: str
    rule: str


class ValidateRequest(_Body):
    instance: dict[str, Any] = Field(description="instance document, same schema as input files")


class ValidateResponse(_Body):
    ok: bool
    violations: list[ViolationBody]


class ScenariosRequest(_Body):
    instance: dict[str, Any]
    config: ScenarioConfigBody = ScenarioConfigBody()
    reduce_to: int | None = None


class ReduceRequest(_Body):
    scenarios: ScenarioSetBody
    k: int
    islanding_scale: float = 1.0


class SolveRequest(_Body):
    instance: dict[str, Any]
    config: ScenarioConfigBody = ScenarioConfigBody()
    scenarios: ScenarioSetBody | None = Field(default=None, description="use these instead of generating")
    reduce_to: int | None = None
    solver: SolverConfigBody = SolverConfigBody()
    plugin: str | None = None


class SolveResponse(_Body):
    status: str
    objective: float | None
    bound: float | None
    gap: float | None
    nodes: int
    solver: str
    model: dict[str, int]
    scenarios: ScenarioSetBody
    schedule: dict[str, Any] | None
    report: dict[str, Any] | None


class EvaluateRequest(_Body):
    instance: dict[str, Any]
    scenarios: ScenarioSetBody
    schedule: dict[str, Any]


class EvaluateResponse(_Body):
    feasible: bool
    report: dict[str, Any]


class HealthResponse(_Body):
    status: str
    version: str
    plugins: list[str]
