import json

import numpy as np
import pytest

from microgrid_sched.instances import desk_spec, desk_dmo, tiny_instance
from microgrid_sched.io import (
    InstanceError,
    SpecValidationError,
    dump_instance,
    instance_to_dict,
    load_instance,
    parse_instance,
    read_scenarios,
    write_scenarios,
)
from microgrid_sched.uncertainty import ScenarioConfig, generate_scenarios


def minimal_doc(**overrides):
    doc = {
        "time_grid": {"n_hours": 2, "subperiods_per_hour": 6},
        "dispatchable_units": [{
            "id": "g1", "p_min": 10, "p_max": 100, "ramp_up": 120, "ramp_down": 60,
            "min_up": 1, "min_down": 1, "cost_segments": [{"breakpoint": 100, "rate": 0.1}],
        }],
        "fixed_loads": [{"id": "load", "forecast": [50.0] * 12}],
        "voll": 2.0,
        "dmo_schedule": {"p_sched": [10.0, 20.0], "p_m_max": 80.0, "penalty": 1.0},
    }
    doc.update(overrides)
    return doc


def write(tmp_path, doc, name="inst.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_minimal_document_loads(tmp_path):
    spec, dmo = load_instance(write(tmp_path, minimal_doc()))
    assert spec.time_grid.n_steps == 12
    assert dmo.p_sched == (10.0, 20.0)
    assert spec.allow_load_shedding


def test_ramp_is_stored_per_subperiod(tmp_path):
    spec, _ = load_instance(write(tmp_path, minimal_doc()))
    assert spec.dispatchable_units[0].ramp_up == pytest.approx(20.0)
    assert spec.dispatchable_units[0].ramp_down == pytest.approx(10.0)


def test_missing_voll_is_named(tmp_path):
    doc = minimal_doc()
    del doc["voll"]
    with pytest.raises(InstanceError, match="voll"):
        load_instance(write(tmp_path, doc))


def test_error_path_locates_field():
    doc = minimal_doc()
    doc["dispatchable_units"][0]["p_max"] = "lots"
    with pytest.raises(InstanceError) as info:
        parse_instance(doc)
    assert info.value.path == "dispatchable_units[0].p_max"


def test_unknown_key_rejected():
    with pytest.raises(InstanceError, match="colour"):
        parse_instance(minimal_doc(colour="blue"))


def test_invalid_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "voll": 1,\n  oops\n}')
    with pytest.raises(InstanceError, match="line 3"):
        load_instance(p)


def test_missing_file(tmp_path):
    with pytest.raises(InstanceError, match="cannot read"):
        load_instance(tmp_path / "nope.json")


def test_physical_validation_names_unit_and_field(tmp_path):
    doc = minimal_doc()
    doc["dispatchable_units"][0]["p_min"] = 150
    with pytest.raises(SpecValidationError) as info:
        load_instance(write(tmp_path, doc))
    assert "g1.p_min" in str(info.value)
    spec, _ = load_instance(write(tmp_path, doc), validate=False)
    assert spec.dispatchable_units[0].p_min == 150


def test_round_trip_desk(tmp_path):
    spec = desk_spec()
    dmo = desk_dmo(spec)
    again = load_instance(dump_instance(spec, dmo, tmp_path / "desk.json"))
    assert again == (spec, dmo)


@pytest.mark.parametrize("seed", range(20))
def test_round_trip_random(seed):
    spec, dmo, _ = tiny_instance(np.random.default_rng(seed), max_binaries=40)
    doc = json.loads(json.dumps(instance_to_dict(spec, dmo)))
    assert parse_instance(doc) == (spec, dmo)


def test_scenario_file_round_trip(tmp_path):
    spec = desk_spec()
    scen = generate_scenarios(spec, ScenarioConfig(n_scenarios=3, islanding_prob_per_hour=0.2, seed=1))
    back = read_scenarios(write_scenarios(scen, tmp_path / "s.json"), spec.time_grid.n_steps)
    assert list(back) == list(scen)
