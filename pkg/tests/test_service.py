import pytest
from fastapi.testclient import TestClient

from microgrid_sched.io import instance_to_dict
from microgrid_sched.service import app

from conftest import make_dmo, make_spec


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def doc(**spec_kw):
    spec = make_spec(n_hours=2, k=2, demand=40.0, renewables=[3, 5, 6, 2], **spec_kw)
    return instance_to_dict(spec, make_dmo(p_sched=15.0))


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert "scipy" in body["plugins"]


def test_validate_reports_violations(client):
    bad = doc()
    bad["dispatchable_units"][0]["p_min"] = 100
    body = client.post("/validate", json={"instance": bad}).json()
    assert not body["ok"]
    assert {"asset": "g1", "field": "p_min", "rule": "p_min <= p_max"} in body["violations"]
    assert client.post("/validate", json={"instance": doc()}).json() == {"ok": True, "violations": []}


def test_malformed_instance_is_422(client):
    inst = doc()
    del inst["voll"]
    r = client.post("/validate", json={"instance": inst})
    assert r.status_code == 422
    assert r.json()["detail"]["path"] == "voll"


def test_scenarios_then_reduce(client):
    r = client.post("/scenarios", json={"instance": doc(), "config": {"n_scenarios": 5, "seed": 4}})
    assert r.status_code == 200
    scen = r.json()
    assert len(scen["scenarios"]) == 5
    red = client.post("/reduce", json={"scenarios": scen, "k": 2}).json()
    assert len(red["scenarios"]) == 2
    assert sum(s["probability"] for s in red["scenarios"]) == pytest.approx(1.0)


def test_reduce_rejects_bad_k(client):
    scen = client.post("/scenarios", json={"instance": doc(), "config": {"n_scenarios": 2}}).json()
    assert client.post("/reduce", json={"scenarios": scen, "k": 5}).status_code == 422


def test_solve_then_evaluate(client):
    r = client.post("/solve", json={"instance": doc(), "config": {"n_scenarios": 2, "seed": 1},
                                    "solver": {"gap_tol": 1e-9}})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "optimal"
    assert body["report"]["violations"] == []
    ev = client.post("/evaluate", json={"instance": doc(), "scenarios": body["scenarios"],
                                        "schedule": body["schedule"]}).json()
    assert ev["feasible"]
    assert ev["report"]["expected_total"] == pytest.approx(body["objective"], rel=1e-6)


def test_solve_with_plugin_and_given_scenarios(client):
    scen = client.post("/scenarios", json={"instance": doc(), "config": {"n_scenarios": 2}}).json()
    a = client.post("/solve", json={"instance": doc(), "scenarios": scen}).json()
    b = client.post("/solve", json={"instance": doc(), "scenarios": scen, "plugin": "scipy"}).json()
    assert b["solver"] == "scipy"
    assert b["objective"] == pytest.approx(a["objective"], rel=1e-6)


def test_unknown_plugin_is_422(client):
    r = client.post("/solve", json={"instance": doc(), "plugin": "nope"})
    assert r.status_code == 422
    assert r.json()["detail"]["error"] == "plugin"


def test_evaluate_rejects_wrong_shape(client):
    scen = client.post("/scenarios", json={"instance": doc(), "config": {"n_scenarios": 1}}).json()
    sol = client.post("/solve", json={"instance": doc(), "scenarios": scen}).json()["schedule"]
    sol["PM"] = [[0.0]]
    r = client.post("/evaluate", json={"instance": doc(), "scenarios": scen, "schedule": sol})
    assert r.status_code == 422
