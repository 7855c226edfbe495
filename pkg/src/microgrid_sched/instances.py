"""Reference instances used by the test suite, the acceptance checks and the CLI demo."""

from __future__ import annotations

import numpy as np

from .domain import (
    AdjustableLoad,
    CostSegment,
    DispatchableUnit,
    DmoSchedule,
    FixedLoad,
    MicrogridSpec,
    NondispatchableUnit,
    StorageMode,
    StorageUnit,
    TimeGrid,
)
from .uncertainty import Scenario, ScenarioConfig, ScenarioSet, forecast_scenario, generate_scenarios

DESK_ISLANDING_HOURS = {0: range(12, 15), 1: range(19, 22)}


def _daily_load(grid: TimeGrid) -> list[float]:
    steps = np.arange(grid.n_steps) / grid.subperiods_per_hour
    base = 260 + 90 * np.sin((steps - 8) / 24 * 2 * np.pi) + 60 * np.exp(-((steps - 19.5) ** 2) / 6)
    return [round(float(x), 3) for x in base]


def _pv(grid: TimeGrid) -> list[float]:
    steps = np.arange(grid.n_steps) / grid.subperiods_per_hour
    shape = np.clip(np.sin((steps - 6) / 13 * np.pi), 0, None)
    return [round(float(x), 3) for x in 120 * shape]


def _wind(grid: TimeGrid) -> list[float]:
    steps = np.arange(grid.n_steps) / grid.subperiods_per_hour
    return [round(float(x), 3) for x in 45 + 20 * np.cos(steps / 24 * 2 * np.pi)]


def desk_spec(grid: TimeGrid | None = None, voll: float = 10.0) -> MicrogridSpec:
    grid = grid or TimeGrid(n_hours=24, subperiods_per_hour=6)
    K = grid.subperiods_per_hour
    units = (
        DispatchableUnit(id="g1", p_min=40, p_max=200, ramp_up=300 / K, ramp_down=300 / K, min_up=3, min_down=2,
                         cost_segments=(CostSegment(breakpoint=100, rate=0.08), CostSegment(breakpoint=200, rate=0.10)),
                         no_load_cost=6.0, startup_cost=30.0, shutdown_cost=5.0),
        DispatchableUnit(id="g2", p_min=20, p_max=120, ramp_up=240 / K, ramp_down=240 / K, min_up=2, min_down=1,
                         cost_segments=(CostSegment(breakpoint=60, rate=0.12), CostSegment(breakpoint=120, rate=0.15)),
                         no_load_cost=4.0, startup_cost=20.0),
        DispatchableUnit(id="g3", p_min=10, p_max=80, ramp_up=480 / K, ramp_down=480 / K, min_up=1, min_down=1,
                         cost_segments=(CostSegment(breakpoint=80, rate=0.25),),
                         no_load_cost=2.0, startup_cost=10.0),
    )
    storage = (
        StorageUnit(id="bess", p_ch_max=50, p_dch_max=50, c_max=200, c_init=100, min_charge_time=1,
                    min_discharge_time=1, init_mode=StorageMode.IDLE),
    )
    renewables = (
        NondispatchableUnit(id="pv", forecast=tuple(_pv(grid))),
        NondispatchableUnit(id="wind", forecast=tuple(_wind(grid))),
    )
    loads = (FixedLoad(id="base_load", forecast=tuple(_daily_load(grid))),)
    adjustable = (
        AdjustableLoad(id="pump", d_min=0, d_max=40, energy_required=120, window_start=8, window_end=16,
                       min_operating_time=2),
        AdjustableLoad(id="ev_fleet", d_min=10, d_max=30, energy_required=90, window_start=17, window_end=23,
                       min_operating_time=3),
    )
    return MicrogridSpec(time_grid=grid, dispatchable_units=units, storage_units=storage,
                         nondispatchable_units=renewables, fixed_loads=loads, adjustable_loads=adjustable,
                         voll=voll)


def desk_dmo(spec: MicrogridSpec, penalty: float = 2.0, fraction: float = 0.55, p_m_max: float = 400.0) -> DmoSchedule:
    """Hourly schedule covering ``fraction`` of the forecast net load."""
    grid = spec.time_grid
    K = grid.subperiods_per_hour
    base = forecast_scenario(spec)
    net = base.loads.sum(axis=0) - base.renewables.sum(axis=0)
    hourly = net.reshape(grid.n_hours, K).mean(axis=1)
    sched = tuple(round(float(max(fraction * h, 0.0)), 3) for h in hourly)
    return DmoSchedule(p_sched=sched, p_m_max=p_m_max, penalty=penalty)


def desk_scenarios(spec: MicrogridSpec, n: int = 10, seed: int = 7) -> ScenarioSet:
    """Ten equiprobable scenarios; two of them carry fixed islanding windows."""
    base = generate_scenarios(spec, ScenarioConfig(n_scenarios=n, renewable_band=0.15, load_band=0.05,
                                                   islanding_prob_per_hour=0.0, seed=seed))
    K = spec.time_grid.subperiods_per_hour
    out = []
    for i, sc in enumerate(base):
        u = sc.grid_connected.copy()
        for t in DESK_ISLANDING_HOURS.get(i, ()):
            u[t * K : (t + 1) * K] = 0
        out.append(Scenario(sc.id, sc.probability, sc.renewables, sc.loads, u))
    return ScenarioSet(out)


def desk_instance(penalty: float = 2.0):
    spec = desk_spec()
    return spec, desk_dmo(spec, penalty=penalty), desk_scenarios(spec)


def tiny_instance(rng: np.random.Generator, max_binaries: int = 12):
    """Random small instance (<= 2 units, <= 1 storage, <= 1 adjustable load, T <= 4, K <= 2, S <= 2).

    Redraws until the model has at most ``max_binaries`` binary columns.
    """
    from .formulation import build_model

    while True:
        T = int(rng.integers(1, 5))
        K = int(rng.integers(1, 3))
        S = int(rng.integers(1, 3))
        grid = TimeGrid(n_hours=T, subperiods_per_hour=K)
        n_units = int(rng.integers(1, 3))
        units = []
        for i in range(n_units):
            p_max = float(rng.integers(30, 101))
            p_min = float(rng.integers(0, int(p_max // 2) + 1))
            rates = sorted(float(r) for r in rng.uniform(0.05, 0.4, size=int(rng.integers(1, 3))))
            if len(rates) == 1:
                segs = (CostSegment(breakpoint=p_max, rate=rates[0]),)
            else:
                segs = (CostSegment(breakpoint=round(p_max / 2, 3), rate=rates[0]),
                        CostSegment(breakpoint=p_max, rate=rates[1]))
            committed = bool(rng.random() < 0.3)
            units.append(DispatchableUnit(
                id=f"g{i}", p_min=p_min, p_max=p_max,
                ramp_up=float(rng.integers(10, 120)) / K, ramp_down=float(rng.integers(10, 120)) / K,
                min_up=int(rng.integers(0, 3)), min_down=int(rng.integers(0, 3)), cost_segments=segs,
                no_load_cost=float(rng.uniform(0, 5)), startup_cost=float(rng.uniform(0, 10)),
                shutdown_cost=float(rng.uniform(0, 3)), init_committed=committed,
                init_on_hours=int(rng.integers(0, 3)) if committed else 0,
                init_off_hours=0 if committed else int(rng.integers(0, 3)),
                init_power=p_min if committed else 0.0))
        storage = []
        if rng.random() < 0.4:
            cmax = float(rng.integers(10, 60))
            storage.append(StorageUnit(id="b0", p_ch_min=0.0, p_ch_max=float(rng.integers(5, 30)),
                                       p_dch_min=0.0, p_dch_max=float(rng.integers(5, 30)), c_max=cmax,
                                       c_init=float(rng.uniform(0, cmax)),
                                       min_charge_time=int(rng.integers(0, 3)),
                                       min_discharge_time=int(rng.integers(0, 3))))
        adjustable = []
        if rng.random() < 0.4:
            a = int(rng.integers(0, T))
            b = int(rng.integers(a, T))
            span = b - a + 1
            d_max = float(rng.integers(5, 25))
            adjustable.append(AdjustableLoad(id="d0", d_min=0.0, d_max=d_max,
                                             energy_required=round(float(rng.uniform(0.2, 0.9)) * d_max * span, 3),
                                             window_start=a, window_end=b,
                                             min_operating_time=int(rng.integers(0, 3))))
        n = T * K
        load = tuple(round(float(x), 3) for x in rng.uniform(20, 120, size=n))
        ren = tuple(round(float(x), 3) for x in rng.uniform(0, 20, size=n))
        spec = MicrogridSpec(time_grid=grid, dispatchable_units=tuple(units), storage_units=tuple(storage),
                             nondispatchable_units=(NondispatchableUnit(id="pv", forecast=ren),),
                             fixed_loads=(FixedLoad(id="load", forecast=load),),
                             adjustable_loads=tuple(adjustable), voll=float(rng.uniform(1, 5)))
        p_m_max = float(rng.integers(40, 120))
        dmo = DmoSchedule(p_sched=tuple(round(float(x), 3) for x in rng.uniform(-0.3, 0.9, size=T) * p_m_max),
                          p_m_max=p_m_max, penalty=float(rng.uniform(0, 2)))
        scen = generate_scenarios(spec, ScenarioConfig(n_scenarios=S, renewable_band=0.2, load_band=0.1,
                                                       islanding_prob_per_hour=0.3, max_island_hours=2,
                                                       seed=int(rng.integers(0, 2**31))))
        model, _ = build_model(spec, scen, dmo)
        if len(model.binary_columns()) <= max_binaries:
            return spec, dmo, scen


def islanded_shortfall_instance(voll: float = 2.0, shortfall: float = 40.0):
    """One day fully islanded; a 60 kW unit forced on all day against a flat demand 40 kW above it."""
    grid = TimeGrid(n_hours=24, subperiods_per_hour=6)
    unit = DispatchableUnit(id="g1", p_min=0, p_max=60, ramp_up=60, ramp_down=60, min_up=24, min_down=0,
                            cost_segments=(CostSegment(breakpoint=60, rate=0.1),), init_committed=True,
                            init_on_hours=0, init_power=60)
    demand = 60 + shortfall
    spec = MicrogridSpec(time_grid=grid, dispatchable_units=(unit,),
                         fixed_loads=(FixedLoad(id="load", forecast=(demand,) * grid.n_steps),), voll=voll)
    dmo = DmoSchedule(p_sched=(0.0,) * grid.n_hours, p_m_max=100, penalty=1.0)
    scen = ScenarioSet([forecast_scenario(spec, grid_connected=np.zeros(grid.n_steps, dtype=int))])
    return spec, dmo, scen


def export_surplus_instance(schedule: float = -20.0, penalty: float = 5.0):
    """Renewable surplus larger than the scheduled export, so the transfer stays below schedule all day."""
    grid = TimeGrid(n_hours=24, subperiods_per_hour=6)
    steps = np.arange(grid.n_steps)
    load = tuple(round(30 + 5 * np.sin(k / 12), 3) for k in steps)
    pv = tuple(round(90 + 10 * np.cos(k / 9), 3) for k in steps)
    unit = DispatchableUnit(id="g1", p_min=10, p_max=50, ramp_up=10, ramp_down=10,
                            cost_segments=(CostSegment(breakpoint=50, rate=0.2),), no_load_cost=1.0,
                            startup_cost=3.0)
    spec = MicrogridSpec(time_grid=grid, dispatchable_units=(unit,),
                         nondispatchable_units=(NondispatchableUnit(id="pv", forecast=pv),),
                         fixed_loads=(FixedLoad(id="load", forecast=load),), voll=1.0)
    dmo = DmoSchedule(p_sched=(schedule,) * grid.n_hours, p_m_max=150, penalty=penalty)
    scen = generate_scenarios(spec, ScenarioConfig(n_scenarios=2, renewable_band=0.05, load_band=0.05, seed=3))
    return spec, dmo, scen
