"""JSON instance documents.

Top-level keys: ``time_grid``, ``dispatchable_units``, ``storage_units``,
``nondispatchable_units``, ``fixed_loads``, ``adjustable_loads``, ``voll``,
``dmo_schedule`` (plus optional ``allow_load_shedding``).

Units follow the domain module except ramp limits, which are written in kW per
hour in documents and stored in kW per sub-period once loaded.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, ValidationError

from .domain import (
    AdjustableLoad,
    DispatchableUnit,
    DmoSchedule,
    FixedLoad,
    MicrogridSpec,
    NondispatchableUnit,
    StorageUnit,
    TimeGrid,
    ValidationReport,
    validate_spec,
)
from .uncertainty import ScenarioSet


class InstanceError(ValueError):
    """Malformed instance document. ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class SpecValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("instance failed validation:\n" + "\n".join(report.lines()))
        self.report = report


class InstanceDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    time_grid: TimeGrid = TimeGrid()
    dispatchable_units: tuple[DispatchableUnit, ...] = ()
    storage_units: tuple[StorageUnit, ...] = ()
    nondispatchable_units: tuple[NondispatchableUnit, ...] = ()
    fixed_loads: tuple[FixedLoad, ...] = ()
    adjustable_loads: tuple[AdjustableLoad, ...] = ()
    voll: float
    allow_load_shedding: bool = True
    dmo_schedule: DmoSchedule


def _loc(loc: tuple) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out


def _hourly_to_step(value: float, k: int) -> float:
    return value / k


def _step_to_hourly(value: float, k: int) -> float:
    """Hourly figure that converts back to exactly ``value``."""
    h = value * k
    for _ in range(4):
        if h / k == value:
            return h
        h = math.nextafter(h, math.inf if h / k < value else -math.inf)
    return value * k


def parse_instance(doc: Any) -> tuple[MicrogridSpec, DmoSchedule]:
    """Build (spec, dmo) from a decoded JSON document without physical validation."""
    if not isinstance(doc, dict):
        raise InstanceError("document must be a JSON object")
    try:
        parsed = InstanceDocument.model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise InstanceError(err["msg"], _loc(err["loc"])) from None
    K = parsed.time_grid.subperiods_per_hour
    if K < 1:
        raise InstanceError("must be >= 1", "time_grid.subperiods_per_hour")
    units = tuple(
        u.model_copy(update={"ramp_up": _hourly_to_step(u.ramp_up, K), "ramp_down": _hourly_to_step(u.ramp_down, K)})
        for u in parsed.dispatchable_units
    )
    spec = MicrogridSpec(
        time_grid=parsed.time_grid,
        dispatchable_units=units,
        storage_units=parsed.storage_units,
        nondispatchable_units=parsed.nondispatchable_units,
        fixed_loads=parsed.fixed_loads,
        adjustable_loads=parsed.adjustable_loads,
        voll=parsed.voll,
        allow_load_shedding=parsed.allow_load_shedding,
    )
    return spec, parsed.dmo_schedule


def load_instance(path: str | Path, validate: bool = True) -> tuple[MicrogridSpec, DmoSchedule]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    spec, dmo = parse_instance(doc)
    if validate:
        report = validate_spec(spec, dmo)
        if not report.ok:
            raise SpecValidationError(report)
    return spec, dmo


def instance_to_dict(spec: MicrogridSpec, dmo: DmoSchedule) -> dict:
    K = spec.time_grid.subperiods_per_hour
    doc = spec.model_dump(mode="json")
    for u, src in zip(doc["dispatchable_units"], spec.dispatchable_units):
        u["ramp_up"] = _step_to_hourly(src.ramp_up, K)
        u["ramp_down"] = _step_to_hourly(src.ramp_down, K)
    doc["dmo_schedule"] = dmo.model_dump(mode="json")
    return doc


def dump_instance(spec: MicrogridSpec, dmo: DmoSchedule, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(instance_to_dict(spec, dmo), indent=2) + "\n")
    return path


def write_scenarios(scenarios: ScenarioSet, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(scenarios.to_dict(), indent=2) + "\n")
    return path


def read_scenarios(path: str | Path, n_steps: int | None = None) -> ScenarioSet:
    return ScenarioSet.from_dict(json.loads(Path(path).read_text()), n_steps)
