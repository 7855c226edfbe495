import sys
import textwrap

import pytest

from microgrid_sched.formulation import build_model
from microgrid_sched.formulation.model import BINARY, MilpModel
from microgrid_sched.solver import (
    ExternalSolverError,
    SolverConfig,
    UnknownPluginError,
    available_plugins,
    command_adapter,
    register_plugin,
    solve_milp,
    solve_via_plugin,
    unregister_plugin,
)
from microgrid_sched.uncertainty import ScenarioConfig, generate_scenarios

from conftest import make_dmo, make_spec


def small_model():
    m = MilpModel()
    y = m.add_variable("y", BINARY, 0, 1, cost=3.0)
    x = m.add_variable("x", lb=0, ub=10, cost=1.0)
    m.add_constraint([(x, 1.0), (y, 4.0)], ">=", 5.5)
    m.objective_constant = 2.0
    return m


def test_unknown_plugin():
    with pytest.raises(UnknownPluginError, match="nope"):
        solve_via_plugin(small_model(), "nope")


def test_builtin_plugins_registered():
    assert {"highs", "scipy"} <= set(available_plugins())


@pytest.mark.parametrize("name", ["highs", "scipy"])
def test_plugin_matches_embedded(name):
    spec = make_spec(n_hours=3, k=2, demand=45.0, renewables=[5, 8, 12, 10, 6, 3])
    scen = generate_scenarios(spec, ScenarioConfig(n_scenarios=2, islanding_prob_per_hour=0.4, seed=5))
    model, _ = build_model(spec, scen, make_dmo(n_hours=3, p_sched=20.0))
    ref = solve_milp(model, SolverConfig(gap_tol=1e-9))
    res = solve_via_plugin(model, name, SolverConfig(gap_tol=1e-9))
    assert res.status == "optimal" and res.solver == name
    assert isinstance(res.objective, float)
    assert res.objective == pytest.approx(ref.objective, rel=1e-6)
    assert model.max_violation(res.x) < 1e-6


def test_command_adapter(tmp_path):
    script = tmp_path / "fake_solver.py"
    script.write_text(textwrap.dedent("""
        import sys
        from microgrid_sched.formulation.lpformat import read_lp, write_solution
        model = read_lp(sys.argv[1])
        write_solution(sys.argv[2], "optimal", None, {"y": 1.0, "x": 1.5})
    """))
    register_plugin("fake", command_adapter([sys.executable, str(script)]))
    try:
        res = solve_via_plugin(small_model(), "fake")
    finally:
        unregister_plugin("fake")
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0 + 1.5 + 2.0)


def test_command_adapter_failure(tmp_path):
    register_plugin("broken", command_adapter([sys.executable, "-c", "import sys; sys.exit(3)"]))
    try:
        with pytest.raises(ExternalSolverError, match="exited with 3"):
            solve_via_plugin(small_model(), "broken")
    finally:
        unregister_plugin("broken")


def test_adapter_without_solution_file():
    register_plugin("silent", lambda lp, sol, cfg: None)
    try:
        with pytest.raises(ExternalSolverError, match="no solution"):
            solve_via_plugin(small_model(), "silent")
    finally:
        unregister_plugin("silent")
