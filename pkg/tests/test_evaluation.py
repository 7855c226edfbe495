import numpy as np
import pytest

from microgrid_sched.evaluation import (
    OracleScaleError,
    ScheduleSolution,
    brute_force_solve,
    evaluate,
    reconstruct_counters,
    storage_telescoping_residual,
)
from microgrid_sched.formulation import build_model
from microgrid_sched.instances import islanded_shortfall_instance
from microgrid_sched.solver import SolverConfig, solve_milp
from microgrid_sched.uncertainty import ScenarioSet, forecast_scenario

from conftest import StorageUnit, make_dmo, make_spec, make_unit


def one_scenario(spec, islanded=False):
    n = spec.time_grid.n_steps
    gc = np.zeros(n, dtype=int) if islanded else np.ones(n, dtype=int)
    return ScenarioSet([forecast_scenario(spec, grid_connected=gc)])


def test_islanded_shortfall_is_shed():
    spec, dmo, scen = islanded_shortfall_instance(voll=2.0, shortfall=40.0)
    sol = ScheduleSolution.zeros(spec, 1)
    sol.I[:] = 1
    sol.P[0] = 60.0
    sol.LS[:] = 40.0
    sol.dP[:] = -dmo.p_sched[0]
    rep = evaluate(spec, scen, dmo, sol)
    assert rep.violations == []
    assert rep.expected("curtailment") == pytest.approx(2.0 * 40 * 24, rel=1e-12)


def test_null_system_costs_nothing():
    spec = make_spec(demand=0.0, units=[])
    sol = ScheduleSolution.zeros(spec, 1)
    rep = evaluate(spec, one_scenario(spec), make_dmo(), sol)
    assert rep.expected_total == 0.0
    assert rep.feasible


def test_simultaneous_charge_and_discharge_flagged_once():
    bess = StorageUnit(id="b", p_ch_max=10, p_dch_max=10, c_max=20, c_init=10)
    spec = make_spec(n_hours=1, demand=0.0, units=[], storage=[bess])
    sol = ScheduleSolution.zeros(spec, 1)
    sol.u[0, 0] = sol.v[0, 0] = 1
    sol.C[0] = 10.0
    rep = evaluate(spec, one_scenario(spec), make_dmo(n_hours=1), sol)
    assert [v.family for v in rep.violations] == ["storage-mode"]


def test_cost_components_by_hand():
    # 2 hours, K=2, unit at 40 kW in hour 0 and off in hour 1, grid covers the rest
    spec = make_spec(n_hours=2, k=2, demand=50.0)
    dmo = make_dmo(p_sched=5.0, penalty=3.0)
    scen = one_scenario(spec)
    sol = ScheduleSolution.zeros(spec, 1)
    sol.I[0] = [1, 0]
    sol.P[0, :2, 0] = 40.0
    sol.PM[:, 0] = [10, 10, 50, 50]
    sol.dP[:, 0] = sol.PM[:, 0] - 5.0
    sol.dPplus[:, 0] = sol.dP[:, 0]
    sol.delta[:, 0] = 1
    rep = evaluate(spec, scen, dmo, sol)
    assert rep.violations == [], rep.violations
    c = rep.scenario_costs[0]
    assert c["generation"] == pytest.approx(0.5 * 0.2 * 40 * 2)
    assert c["no_load"] == pytest.approx(1.0)
    assert c["startup"] == pytest.approx(5.0)
    assert c["shutdown"] == 0.0
    assert c["penalty"] == pytest.approx(3.0 * 0.5 * (5 + 5 + 45 + 45))
    assert rep.expected_total == pytest.approx(8 + 1 + 5 + 150)


def test_penalty_only_above_schedule():
    spec = make_spec(n_hours=1, demand=10.0, units=[])
    dmo = make_dmo(n_hours=1, p_sched=30.0, penalty=100.0)
    sol = ScheduleSolution.zeros(spec, 1)
    sol.PM[:] = 10.0
    sol.dP[:] = -20.0
    rep = evaluate(spec, one_scenario(spec), dmo, sol)
    assert rep.feasible
    assert rep.expected("penalty") == 0.0


def test_balance_violation_detected():
    spec = make_spec(n_hours=1, demand=10.0, units=[])
    sol = ScheduleSolution.zeros(spec, 1)
    rep = evaluate(spec, one_scenario(spec), make_dmo(n_hours=1), sol)
    assert "balance" in {v.family for v in rep.violations}


def test_brute_force_zero_cost_when_demand_under_schedule():
    spec = make_spec(n_hours=2, demand=20.0)
    dmo = make_dmo(p_sched=30.0, penalty=2.0)
    sol = brute_force_solve(spec, one_scenario(spec), dmo)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_brute_force_infeasible_without_shedding():
    spec = make_spec(n_hours=1, demand=200.0).model_copy(update={"allow_load_shedding": False})
    sol = brute_force_solve(spec, one_scenario(spec, islanded=True), make_dmo(n_hours=1))
    assert sol.status == "infeasible"


def test_brute_force_refuses_large_models():
    spec = make_spec(n_hours=12)
    with pytest.raises(OracleScaleError):
        brute_force_solve(spec, one_scenario(spec), make_dmo(n_hours=12), max_binaries=20)


def test_brute_force_agrees_with_solver_and_evaluator():
    spec = make_spec(n_hours=3, k=2, demand=45.0,
                     units=[make_unit(min_up=2), make_unit(id="g2", p_min=5, p_max=30, no_load_cost=0.5)])
    dmo = make_dmo(n_hours=3, p_sched=25.0, penalty=1.5)
    scen = one_scenario(spec)
    oracle = brute_force_solve(spec, scen, dmo)
    model, _ = build_model(spec, scen, dmo)
    res = solve_milp(model, SolverConfig(gap_tol=1e-9))
    assert res.objective == pytest.approx(oracle.objective, rel=1e-6)
    rep = evaluate(spec, scen, dmo, oracle)
    assert rep.feasible
    assert rep.expected_total == pytest.approx(oracle.objective, rel=1e-6)


def test_unit_counters():
    spec = make_spec(n_hours=4, units=[make_unit(init_committed=False, init_off_hours=5)])
    sol = ScheduleSolution.zeros(spec, 1)
    sol.I[0] = [1, 1, 0, 1]
    sol = reconstruct_counters(sol, spec)
    assert sol.T_on[0].tolist() == [1, 2, 0, 1]
    assert sol.T_off[0].tolist() == [0, 0, 1, 0]


def test_unit_counters_continue_initial_state():
    spec = make_spec(n_hours=4, units=[make_unit(init_committed=False, init_off_hours=3)])
    sol = reconstruct_counters(ScheduleSolution.zeros(spec, 1), spec)
    assert sol.T_off[0].tolist() == [4, 5, 6, 7]
    assert sol.T_on[0].tolist() == [0, 0, 0, 0]


def test_storage_counters():
    bess = StorageUnit(id="b", p_ch_max=10, p_dch_max=10, c_max=20)
    spec = make_spec(n_hours=3, units=[], storage=[bess])
    sol = ScheduleSolution.zeros(spec, 1)
    sol.u[0] = [0, 1, 1]
    sol.v[0] = [1, 0, 0]
    sol = reconstruct_counters(sol, spec)
    assert sol.T_dch[0].tolist() == [0, 1, 2]
    assert sol.T_ch[0].tolist() == [1, 0, 0]


def test_telescoping_residual():
    bess = StorageUnit(id="b", p_ch_max=10, p_dch_max=10, c_max=40, c_init=20)
    spec = make_spec(n_hours=2, k=2, units=[], storage=[bess])
    sol = ScheduleSolution.zeros(spec, 1)
    sol.P_storage[0, :, 0] = [4, -2, 6, 0]
    sol.C[0, :, 0] = 20 - 0.5 * np.cumsum([4, -2, 6, 0])
    assert storage_telescoping_residual(spec, sol) == pytest.approx(0.0, abs=1e-12)
    sol.C[0, -1, 0] += 1.0
    assert storage_telescoping_residual(spec, sol) == pytest.approx(1.0)


def test_dict_round_trip():
    spec = make_spec(n_hours=2, k=2)
    sol = ScheduleSolution.zeros(spec, 2)
    sol.PM[:] = 3.0
    back = ScheduleSolution.from_dict(sol.to_dict(), spec, 2)
    assert np.array_equal(back.PM, sol.PM)
    with pytest.raises(ValueError):
        ScheduleSolution.from_dict(sol.to_dict(), spec, 3)
