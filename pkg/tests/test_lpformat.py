import math

import numpy as np

from microgrid_sched.formulation import BINARY, MilpModel, build_model, read_lp_solution, write_lp
from microgrid_sched.formulation.lpformat import lp_text, read_lp, write_solution
from microgrid_sched.uncertainty import ScenarioConfig, generate_scenarios

from conftest import make_dmo, make_spec


def small_model():
    m = MilpModel()
    x = m.add_variable("x", lb=-math.inf, ub=4, cost=1.5)
    y = m.add_variable("y", BINARY, 0, 1, cost=-2)
    z = m.add_variable("z", lb=0, ub=math.inf)
    m.add_constraint([(x, 1), (y, 2.5)], "<=", 7, name="c1")
    m.add_constraint([(x, 1), (z, -1)], "=", 0.1, name="c2")
    m.add_constraint([(z, 3)], ">=", -2, name="c3")
    return m


def assert_same(a: MilpModel, b: MilpModel):
    assert [v.name for v in a.variables] == [v.name for v in b.variables]
    assert [(v.kind, v.lb, v.ub) for v in a.variables] == [(v.kind, v.lb, v.ub) for v in b.variables]
    assert np.array_equal(a.cost_vector(), b.cost_vector())
    assert (a.matrix() != b.matrix()).nnz == 0
    for ra, rb in zip(a.row_bounds(), b.row_bounds()):
        assert np.array_equal(ra, rb)


def test_roundtrip_small():
    m = small_model()
    text = lp_text(m)
    assert "Minimize" in text and "Subject To" in text and "Binaries" in text and text.rstrip().endswith("End")
    assert_same(m, read_lp(text))


def test_roundtrip_built_model(tmp_path):
    spec = make_spec(n_hours=3, k=2)
    scen = generate_scenarios(spec, ScenarioConfig(n_scenarios=2, seed=3, islanding_prob_per_hour=0.4))
    model, _ = build_model(spec, scen, make_dmo(n_hours=3, p_sched=7.3))
    path = write_lp(model, tmp_path / "m.lp")
    assert_same(model, read_lp(path))


def test_long_rows_are_wrapped():
    m = MilpModel()
    cols = [m.add_variable(f"x_{i}", cost=1) for i in range(200)]
    m.add_constraint([(j, 1.0) for j in cols], ">=", 1)
    text = lp_text(m)
    assert max(len(line) for line in text.splitlines()) <= 255
    assert_same(m, read_lp(text))


def test_solution_file_roundtrip(tmp_path):
    path = tmp_path / "s.sol"
    write_solution(path, "optimal", 1.25, {"x": 0.1, "y": 1.0}, bound=1.0)
    sol = read_lp_solution(path)
    assert sol.status == "optimal" and sol.objective == 1.25 and sol.bound == 1.0
    assert sol.values == {"x": 0.1, "y": 1.0}
