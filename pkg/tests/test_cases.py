import json
import math

import pytest

from rectse import bundled_case_path
from rectse.cases import (CaseError, load_case, parse_case, rotate_to_reference,
                          serialize_case)

MINIMAL_JSON = """
{
 "base_mva": 100.0,
 "reference_bus": 1,
 "buses": [
  {"id": 1, "vm": 1.02, "va_deg": 0.0},
  {"id": 2, "vm": 0.98, "va_deg": -3.0, "bs": 0.05}
 ],
 "branches": [
  {"from": 1, "to": 2, "r": 0.01, "x": 0.1, "b": 0.02}
 ]
}
"""

MINIMAL_M = """
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1.02 0.0 132 1 1.1 0.9;
 2 1 20 5 0 5 1 0.98 -3.0 132 1 1.1 0.9;
];
mpc.gen = [
 1 30 5 100 -100 1.02 100 1 200 0;
];
mpc.branch = [
 1 2 0.01 0.1 0.02 0 0 0 0 0 1 -360 360;
 1 2 0.02 0.2 0.00 0 0 0 0.97 1.5 0 -360 360;
];
"""


def test_parse_json_minimal():
    case = parse_case(MINIMAL_JSON)
    assert case.base_mva == 100.0
    assert case.reference_bus == 1
    assert case.n_buses == 2
    assert case.bus(2).shunt_b == 0.05
    assert case.branches[0].b_charging == 0.02
    assert math.isclose(case.bus(2).v_true_ang, math.radians(-3.0))


def test_parse_matpower_minimal():
    case = parse_case(MINIMAL_M)
    assert case.reference_bus == 1
    # Gs/Bs columns are normalized by the MVA base.
    assert math.isclose(case.bus(2).shunt_b, 0.05)
    # The second branch is out of service and dropped.
    assert len(case.branches) == 1


def test_matpower_zero_tap_means_nominal():
    case = parse_case(MINIMAL_M)
    assert case.branches[0].tap == 1.0


def test_json_round_trip():
    case = parse_case(MINIMAL_JSON)
    again = parse_case(serialize_case(case))
    assert again.base_mva == case.base_mva
    assert again.reference_bus == case.reference_bus
    assert again.branches == case.branches
    for b_new, b_old in zip(again.buses, case.buses):
        assert (b_new.id, b_new.v_true_mag, b_new.shunt_g, b_new.shunt_b) == \
            (b_old.id, b_old.v_true_mag, b_old.shunt_g, b_old.shunt_b)
        # The degree/radian conversion may wobble by one ulp.
        assert b_new.v_true_ang == pytest.approx(b_old.v_true_ang, abs=1e-15)


def test_bundled_matpower_14_bus():
    case = load_case(bundled_case_path("ieee14"))
    assert case.base_mva == 100.0
    assert case.reference_bus == 1
    assert case.n_buses == 14
    assert len(case.branches) == 20
    taps = {(br.from_bus, br.to_bus): br.tap for br in case.branches}
    assert taps[(4, 7)] == 0.978
    assert taps[(1, 2)] == 1.0
    assert math.isclose(case.bus(9).shunt_b, 0.19)


def test_bundled_m_and_json_14_bus_agree():
    from_m = load_case(bundled_case_path("ieee14"))
    from_json = parse_case(serialize_case(from_m))
    assert from_json.branches == from_m.branches
    for b_new, b_old in zip(from_json.buses, from_m.buses):
        assert b_new.id == b_old.id
        assert b_new.v_true_mag == b_old.v_true_mag
        assert b_new.v_true_ang == pytest.approx(b_old.v_true_ang, abs=1e-15)


@pytest.mark.parametrize("name,n_buses", [("ieee14", 14), ("ieee57", 57),
                                          ("ieee118", 118), ("case2869", 2869)])
def test_bundled_cases_load(name, n_buses):
    case = load_case(bundled_case_path(name))
    assert case.n_buses == n_buses
    assert any(b.id == case.reference_bus for b in case.buses)


def test_rotate_to_reference():
    doc = json.loads(MINIMAL_JSON)
    doc["buses"][0]["va_deg"] = 10.0
    case = rotate_to_reference(parse_case(json.dumps(doc)))
    assert case.bus(1).v_true_ang == 0.0
    assert math.isclose(case.bus(2).v_true_ang, math.radians(-13.0))


def test_rotate_is_identity_at_zero():
    case = parse_case(MINIMAL_JSON)
    assert rotate_to_reference(case) is case


def _json_with(**overrides):
    doc = json.loads(MINIMAL_JSON)
    doc.update(overrides)
    return json.dumps(doc)


def test_duplicate_bus_ids_rejected():
    doc = json.loads(MINIMAL_JSON)
    doc["buses"].append({"id": 1, "vm": 1.0, "va_deg": 0.0})
    with pytest.raises(CaseError, match="duplicate bus ids"):
        parse_case(json.dumps(doc))


def test_missing_reference_rejected():
    with pytest.raises(CaseError, match="reference bus"):
        parse_case(_json_with(reference_bus=99))


def test_dangling_branch_rejected():
    doc = json.loads(MINIMAL_JSON)
    doc["branches"].append({"from": 1, "to": 7, "r": 0.01, "x": 0.1})
    with pytest.raises(CaseError, match="dangling endpoint 7"):
        parse_case(json.dumps(doc))


def test_zero_impedance_rejected():
    doc = json.loads(MINIMAL_JSON)
    doc["branches"][0].update(r=0.0, x=0.0)
    with pytest.raises(CaseError, match="zero series impedance"):
        parse_case(json.dumps(doc))


def test_negative_tap_rejected():
    doc = json.loads(MINIMAL_JSON)
    doc["branches"][0]["tap"] = -1.0
    with pytest.raises(CaseError, match="nonpositive tap"):
        parse_case(json.dumps(doc))


def test_nonpositive_voltage_rejected():
    doc = json.loads(MINIMAL_JSON)
    doc["buses"][1]["vm"] = 0.0
    with pytest.raises(CaseError, match="voltage magnitude"):
        parse_case(json.dumps(doc))


def test_json_syntax_error_reports_position():
    with pytest.raises(CaseError, match="line"):
        parse_case('{"base_mva": 100.0,,}')


def test_matpower_missing_table_rejected():
    with pytest.raises(CaseError, match="missing mpc.branch"):
        parse_case("mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0 0 0 1 1.0 0 0 1 1.1 0.9;];")


def test_matpower_bad_token_reports_line():
    text = MINIMAL_M.replace("0.98", "oops")
    with pytest.raises(CaseError, match="near line"):
        parse_case(text)
