import numpy as np
import pytest

from microgrid_sched.domain import (
    AdjustableLoad,
    CostSegment,
    DispatchableUnit,
    DmoSchedule,
    FixedLoad,
    MicrogridSpec,
    NondispatchableUnit,
    StorageUnit,
    TimeGrid,
)


def make_unit(**kw):
    base = dict(id="g1", p_min=10, p_max=60, ramp_up=60, ramp_down=60, min_up=1, min_down=1,
                cost_segments=(CostSegment(breakpoint=60, rate=0.2),), no_load_cost=1.0, startup_cost=5.0)
    base.update(kw)
    return DispatchableUnit(**base)


def make_spec(n_hours=2, k=1, demand=30.0, units=None, storage=(), adjustable=(), renewables=None, voll=10.0):
    grid = TimeGrid(n_hours=n_hours, subperiods_per_hour=k)
    n = grid.n_steps
    ren = () if renewables is None else (NondispatchableUnit(id="pv", forecast=tuple(renewables)),)
    return MicrogridSpec(
        time_grid=grid,
        dispatchable_units=(make_unit(),) if units is None else tuple(units),
        storage_units=tuple(storage),
        nondispatchable_units=ren,
        fixed_loads=(FixedLoad(id="load", forecast=(float(demand),) * n),),
        adjustable_loads=tuple(adjustable),
        voll=voll,
    )


def make_dmo(n_hours=2, p_sched=0.0, p_m_max=100.0, penalty=1.0):
    return DmoSchedule(p_sched=(float(p_sched),) * n_hours, p_m_max=p_m_max, penalty=penalty)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["make_unit", "make_spec", "make_dmo", "StorageUnit", "AdjustableLoad"]
