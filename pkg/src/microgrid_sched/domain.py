"""Typed description of a microgrid, its time grid and the DMO schedule.

Units: power in kW, energy in kWh, prices in $/kWh, durations in hours.
Profiles are flat sequences indexed hour-major: ``k = t * subperiods_per_hour + tau``.

Sign conventions: storage power is positive when discharging (injection into
the microgrid bus) and negative when charging; main-grid transfer is positive
when importing into the microgrid.

Models only check shapes and types. Physical invariants are checked by
:func:`validate_spec`, which reports violations as data instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

Profile = tuple[float, ...]


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class TimeGrid(_Frozen):
    n_hours: int = 24
    subperiods_per_hour: int = 6

    @property
    def delta_tau(self) -> float:
        return 1.0 / self.subperiods_per_hour

    @property
    def n_steps(self) -> int:
        return self.n_hours * self.subperiods_per_hour

    def step(self, t: int, tau: int) -> int:
        return t * self.subperiods_per_hour + tau

    def hour_of(self, k: int) -> int:
        return k // self.subperiods_per_hour


class CostSegment(_Frozen):
    """Marginal rate applying to output between the previous breakpoint and ``breakpoint``."""

    breakpoint: float
    rate: float


class DispatchableUnit(_Frozen):
    id: str
    p_min: float
    p_max: float
    ramp_up: float = Field(description="kW per sub-period")
    ramp_down: float = Field(description="kW per sub-period")
    min_up: int = 0
    min_down: int = 0
    cost_segments: tuple[CostSegment, ...]
    no_load_cost: float = 0.0
    startup_cost: float = 0.0
    shutdown_cost: float = 0.0
    init_committed: bool = False
    init_on_hours: int = 0
    init_off_hours: int = 0
    init_power: float = 0.0

    def segment_widths(self) -> list[float]:
        """Width of each cost segment, the last one stretched to ``p_max``."""
        widths = []
        prev = 0.0
        for j, seg in enumerate(self.cost_segments):
            end = self.p_max if j == len(self.cost_segments) - 1 else min(seg.breakpoint, self.p_max)
            widths.append(max(end - prev, 0.0))
            prev = max(prev, end)
        return widths

    def energy_cost(self, power: float) -> float:
        """$/h cost of producing ``power`` kW (excluding no-load cost)."""
        remaining = power
        total = 0.0
        for seg, width in zip(self.cost_segments, self.segment_widths()):
            take = min(remaining, width)
            total += take * seg.rate
            remaining -= take
            if remaining <= 0:
                break
        if remaining > 0:
            total += remaining * self.cost_segments[-1].rate
        return total


class StorageMode(str, Enum):
    CHARGING = "charging"
    DISCHARGING = "discharging"
    IDLE = "idle"


class StorageUnit(_Frozen):
    id: str
    p_ch_min: float = 0.0
    p_ch_max: float
    p_dch_min: float = 0.0
    p_dch_max: float
    c_max: float
    c_init: float | None = None
    min_charge_time: int = 0
    min_discharge_time: int = 0
    init_mode: StorageMode = StorageMode.IDLE
    init_mode_hours: int = 0

    @property
    def initial_energy(self) -> float:
        return self.c_max / 2 if self.c_init is None else self.c_init


class NondispatchableUnit(_Frozen):
    id: str
    forecast: Profile


class FixedLoad(_Frozen):
    id: str
    forecast: Profile


class AdjustableLoad(_Frozen):
    id: str
    d_min: float = 0.0
    d_max: float
    energy_required: float
    window_start: int
    window_end: int
    min_operating_time: int = 0

    def hours(self) -> range:
        return range(self.window_start, self.window_end + 1)


class DmoSchedule(_Frozen):
    p_sched: tuple[float, ...] = Field(description="signed kW per hour")
    p_m_max: float
    penalty: float

    def scaled(self, factor: float) -> "DmoSchedule":
        return self.model_copy(update={"p_sched": tuple(factor * p for p in self.p_sched)})


class MicrogridSpec(_Frozen):
    time_grid: TimeGrid = TimeGrid()
    dispatchable_units: tuple[DispatchableUnit, ...] = ()
    storage_units: tuple[StorageUnit, ...] = ()
    nondispatchable_units: tuple[NondispatchableUnit, ...] = ()
    fixed_loads: tuple[FixedLoad, ...] = ()
    adjustable_loads: tuple[AdjustableLoad, ...] = ()
    voll: float
    allow_load_shedding: bool = True


@dataclass(frozen=True)
class Violation:
    asset: str
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.asset}.{self.field}: {self.rule}"


class ValidationReport(list):
    """List of :class:`Violation`; empty means valid."""

    @property
    def ok(self) -> bool:
        return not self

    def lines(self) -> list[str]:
        return [str(v) for v in self]


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _check_profile(report, asset_id, field, profile, n_steps):
    if len(profile) != n_steps:
        report.append(Violation(asset_id, field, f"profile length {len(profile)} != {n_steps}"))
    if any(not _finite(x) or x < 0 for x in profile):
        report.append(Violation(asset_id, field, "values >= 0"))


def validate_spec(spec: MicrogridSpec, dmo: DmoSchedule | None = None) -> ValidationReport:
    """Collect every invariant violation of ``spec`` (and ``dmo`` when given)."""
    report = ValidationReport()
    add = lambda a, f, r: report.append(Violation(a, f, r))  # noqa: E731

    grid = spec.time_grid
    if grid.n_hours < 1:
        add("time_grid", "n_hours", "n_hours >= 1")
    if grid.subperiods_per_hour < 1:
        add("time_grid", "subperiods_per_hour", "subperiods_per_hour >= 1")
    n_steps = max(grid.n_hours, 0) * max(grid.subperiods_per_hour, 0)
    if not (_finite(spec.voll) and spec.voll >= 0):
        add("microgrid", "voll", "voll >= 0")

    for g in spec.dispatchable_units:
        if g.p_min < 0:
            add(g.id, "p_min", "0 <= p_min")
        if g.p_min > g.p_max:
            add(g.id, "p_min", "p_min <= p_max")
        if g.ramp_up < 0:
            add(g.id, "ramp_up", "ramp_up >= 0")
        if g.ramp_down < 0:
            add(g.id, "ramp_down", "ramp_down >= 0")
        if g.min_up < 0:
            add(g.id, "min_up", "min_up >= 0")
        if g.min_down < 0:
            add(g.id, "min_down", "min_down >= 0")
        if not 1 <= len(g.cost_segments) <= 4:
            add(g.id, "cost_segments", "1 to 4 segments")
        rates = [s.rate for s in g.cost_segments]
        if any(b < a for a, b in zip(rates, rates[1:])):
            add(g.id, "cost_segments", "segment rates non-decreasing")
        bps = [s.breakpoint for s in g.cost_segments]
        if any(b <= a for a, b in zip(bps, bps[1:])) or any(b <= 0 for b in bps):
            add(g.id, "cost_segments", "breakpoints positive and increasing")
        for name in ("no_load_cost", "startup_cost", "shutdown_cost"):
            if getattr(g, name) < 0:
                add(g.id, name, f"{name} >= 0")
        if g.init_on_hours < 0:
            add(g.id, "init_on_hours", "init_on_hours >= 0")
        if g.init_off_hours < 0:
            add(g.id, "init_off_hours", "init_off_hours >= 0")
        if g.init_committed and not (g.p_min <= g.init_power <= g.p_max):
            add(g.id, "init_power", "init_power in [p_min, p_max] when committed")
        if not g.init_committed and g.init_power != 0:
            add(g.id, "init_power", "init_power = 0 when offline")

    for s in spec.storage_units:
        if not 0 <= s.p_ch_min <= s.p_ch_max:
            add(s.id, "p_ch_min", "0 <= p_ch_min <= p_ch_max")
        if not 0 <= s.p_dch_min <= s.p_dch_max:
            add(s.id, "p_dch_min", "0 <= p_dch_min <= p_dch_max")
        if s.c_max < 0:
            add(s.id, "c_max", "c_max >= 0")
        if not 0 <= s.initial_energy <= s.c_max:
            add(s.id, "c_init", "0 <= c_init <= c_max")
        if s.min_charge_time < 0:
            add(s.id, "min_charge_time", "min_charge_time >= 0")
        if s.min_discharge_time < 0:
            add(s.id, "min_discharge_time", "min_discharge_time >= 0")
        if s.init_mode_hours < 0:
            add(s.id, "init_mode_hours", "init_mode_hours >= 0")

    for r in spec.nondispatchable_units:
        _check_profile(report, r.id, "forecast", r.forecast, n_steps)
    for fl in spec.fixed_loads:
        _check_profile(report, fl.id, "forecast", fl.forecast, n_steps)

    for d in spec.adjustable_loads:
        if not 0 <= d.d_min <= d.d_max:
            add(d.id, "d_min", "0 <= d_min <= d_max")
        if not 0 <= d.window_start <= d.window_end < grid.n_hours:
            add(d.id, "window_start", "0 <= window_start <= window_end < n_hours")
        span = d.window_end - d.window_start + 1
        if d.energy_required < d.d_min * span:
            add(d.id, "energy_required", "d_min x window <= E")
        if d.energy_required > d.d_max * span:
            add(d.id, "energy_required", "E <= d_max x window")
        if d.min_operating_time < 0:
            add(d.id, "min_operating_time", "min_operating_time >= 0")

    ids = [a.id for group in (spec.dispatchable_units, spec.storage_units, spec.nondispatchable_units,
                              spec.fixed_loads, spec.adjustable_loads) for a in group]
    seen = set()
    for asset_id in ids:
        if asset_id in seen:
            add(asset_id, "id", "asset ids unique")
        seen.add(asset_id)

    if dmo is not None:
        if not dmo.p_m_max > 0:
            add("dmo_schedule", "p_m_max", "p_m_max > 0")
        if not dmo.penalty >= 0:
            add("dmo_schedule", "penalty", "penalty >= 0")
        if len(dmo.p_sched) != grid.n_hours:
            add("dmo_schedule", "p_sched", f"length {len(dmo.p_sched)} != n_hours {grid.n_hours}")
        if any(abs(p) > dmo.p_m_max for p in dmo.p_sched):
            add("dmo_schedule", "p_sched", "|p_sched| <= p_m_max")
    return report
