import json
import math

import numpy as np
import pytest

from rectse import bundled_case_path, harness
from rectse.harness import (HarnessError, Placement, ScenarioConfig,
                            generate_readings, index_sigma2x, index_xi,
                            inject_bad_data, pmu_polar_to_rect, run_campaign,
                            table1_placement, write_campaign_csv,
                            write_state_errors)
from rectse.measurements import predict_readings
from rectse.network import build_models, state_index


def test_placement_deterministic(case14):
    assert table1_placement(case14) == table1_placement(case14)


def test_placement_counts_14_bus(case14):
    p = table1_placement(case14)
    assert len(p.pmu_buses) == 5
    assert len(p.pmu_currents) == 14
    assert len(p.rtu_v_buses) == 11
    assert len(p.rtu_inj_buses) == 10
    # Flow slots are capped by the sides available at the chosen RTU buses.
    assert 20 <= len(p.rtu_flows) <= 36


def test_placement_reference_has_pmu(case14):
    p = table1_placement(case14)
    assert p.pmu_buses[0] == case14.reference_bus


def test_placement_rtu_buses_feed_pseudo_pairs(case14):
    p = table1_placement(case14)
    flow_sides = {side for _, _, side, _ in p.rtu_flows}
    for bus in p.rtu_v_buses:
        assert bus in set(p.rtu_inj_buses) | flow_sides


def test_placement_current_channels_on_distinct_lines_first(case14):
    p = table1_placement(case14)
    lines = [(min(bf, bt), max(bf, bt), ckt) for bf, bt, _, ckt in p.pmu_currents]
    assert len(set(lines)) == len(lines)   # 14 channels, no duplicated line


def test_generate_exact_readings_equal_truth(case14):
    models, incidence = build_models(case14)
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    index = state_index(case14)
    v = index.complex_voltages(index.state_from_case(case14))
    z = predict_readings(readings, models, incidence, v)
    assert np.abs(z - [rd.value for rd in readings]).max() <= 1e-12


def test_generate_uniform_noise_within_band(case14):
    placement = table1_placement(case14)
    rng = np.random.default_rng(1)
    noisy = generate_readings(case14, placement, rng=rng)
    exact = generate_readings(case14, placement, noise="none")
    for n, e in zip(noisy, exact):
        assert abs(n.value - e.value) <= n.sigma
        assert n.sigma == e.sigma


def test_generate_pmu_sigma_fraction(case14):
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    ref_v = next(rd for rd in readings
                 if rd.kind == "V_R" and rd.bus == case14.reference_bus)
    # 0.02% of a ~1 pu voltage; the reading stays within +/- sigma of truth.
    assert ref_v.sigma == pytest.approx(0.0002 * ref_v.value, rel=1e-12)
    rng = np.random.default_rng(2)
    noisy = generate_readings(case14, placement, rng=rng)
    noisy_v = next(rd for rd in noisy
                   if rd.kind == "V_R" and rd.bus == case14.reference_bus)
    assert abs(noisy_v.value - ref_v.value) <= 0.0002 * ref_v.value


def test_generate_sigma_floor_for_small_truths(case14):
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    small = [rd for rd in readings if rd.device == "RTU"
             and rd.kind in ("P_flow", "Q_flow") and abs(rd.value) < 1.0]
    assert small, "expected some sub-unit flow truths"
    for rd in small:
        assert rd.sigma == pytest.approx(0.01, rel=1e-12)


def test_generate_seeded_determinism(case14):
    placement = table1_placement(case14)
    a = generate_readings(case14, placement,
                          rng=np.random.default_rng(np.random.SeedSequence(9)))
    b = generate_readings(case14, placement,
                          rng=np.random.default_rng(np.random.SeedSequence(9)))
    assert a == b


def test_generate_gaussian_mode_differs(case14):
    placement = table1_placement(case14)
    a = generate_readings(case14, placement, noise="gaussian",
                          rng=np.random.default_rng(3))
    b = generate_readings(case14, placement, noise="uniform",
                          rng=np.random.default_rng(3))
    assert a != b
    with pytest.raises(HarnessError, match="noise model"):
        generate_readings(case14, placement, noise="salt")


def test_inject_bad_data_scales_value(case14):
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    out = inject_bad_data(readings, [({"device": "PMU", "kind": "V_R",
                                       "bus": 1}, 0.30)])
    changed = [(a, b) for a, b in zip(readings, out) if a != b]
    assert len(changed) == 1
    before, after = changed[0]
    assert after.value == pytest.approx(before.value * 1.3, rel=1e-14)
    # Untouched readings are the same objects.
    assert sum(a is b for a, b in zip(readings, out)) == len(readings) - 1


def test_inject_bad_data_zero_alteration_is_identity(case14):
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    out = inject_bad_data(readings, [({"device": "PMU", "kind": "V_R",
                                       "bus": 1}, 0.0)])
    assert out == readings


def test_inject_bad_data_selector_must_be_unique(case14):
    placement = table1_placement(case14)
    readings = generate_readings(case14, placement, noise="none")
    with pytest.raises(HarnessError, match="matched 0"):
        inject_bad_data(readings, [({"device": "PMU", "kind": "V_R",
                                     "bus": 9999}, 0.1)])
    with pytest.raises(HarnessError, match="expected 1"):
        inject_bad_data(readings, [({"device": "PMU", "kind": "V_R"}, 0.1)])
    with pytest.raises(HarnessError, match="non-finite"):
        inject_bad_data(readings, [({"device": "PMU", "kind": "V_R",
                                     "bus": 1}, math.inf)])


def test_index_sigma2x():
    x = np.zeros(5)
    assert index_sigma2x(x, x) == 0.0
    y = x.copy()
    y[2] = 1e-3
    assert index_sigma2x(y, x) == pytest.approx(1e-6, rel=1e-12)
    with pytest.raises(HarnessError, match="mismatch"):
        index_sigma2x(np.zeros(4), x)


def test_index_xi():
    z_t = np.array([1.0, 2.0])
    z_m = np.array([1.1, 2.1])
    assert index_xi(z_m, z_m, z_t) == pytest.approx(1.0)
    assert index_xi(z_t, z_m, z_t) == 0.0
    assert index_xi(z_t, z_t, z_t) is None


def test_pmu_polar_to_rect():
    re, im, s_re, s_im = pmu_polar_to_rect(1.0, 0.0, 0.001, 0.002)
    assert (re, im) == (1.0, 0.0)
    assert s_re == pytest.approx(0.001)
    assert s_im == pytest.approx(0.002)
    re, im, _, _ = pmu_polar_to_rect(2.0, math.pi / 2, 0.001, 0.002)
    assert re == pytest.approx(0.0, abs=1e-15)
    assert im == pytest.approx(2.0)


def _config(tmp_path, **kw):
    defaults = dict(case_path=bundled_case_path("ieee14"), trials=3, seed=21)
    defaults.update(kw)
    return ScenarioConfig(**defaults)


def test_campaign_trial_streams_are_order_invariant(tmp_path):
    full = run_campaign(_config(tmp_path, trials=3))
    short = run_campaign(_config(tmp_path, trials=1))
    assert full.trials[0].sigma2_x == short.trials[0].sigma2_x
    assert full.trials[0].xi == short.trials[0].xi


def test_campaign_aggregates(tmp_path):
    res = run_campaign(_config(tmp_path))
    assert len(res.trials) == 3
    vals = [t.sigma2_x for t in res.trials]
    assert res.mean_sigma2_x == pytest.approx(np.mean(vals))
    assert res.std_sigma2_x == pytest.approx(np.std(vals))
    assert all(t.error is None for t in res.trials)
    assert all(t.xi is not None and t.xi < 1 for t in res.trials)


def test_campaign_exact_noise_reports_sentinel(tmp_path):
    res = run_campaign(_config(tmp_path, noise="none", trials=1))
    assert res.trials[0].xi is None
    assert res.mean_xi is None
    assert res.trials[0].sigma2_x <= 1e-16


def test_campaign_state_errors_cover_all_buses(case14, tmp_path):
    res = run_campaign(_config(tmp_path, trials=1))
    assert len(res.state_errors) == case14.n_buses
    buses = [b for b, _, _ in res.state_errors]
    assert buses == [b.id for b in case14.buses]
    ref = next(e for e in res.state_errors if e[0] == case14.reference_bus)
    assert ref[2] == 0.0


def test_campaign_csv_and_state_errors_files(tmp_path):
    res = run_campaign(_config(tmp_path, trials=2))
    csv_path = tmp_path / "campaign.csv"
    dat_path = tmp_path / "state_errors.dat"
    write_campaign_csv(res, str(csv_path))
    write_state_errors(res, str(dat_path))
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "trial,sigma2_x,xi,solve_ms,detect_ms,iterations,events"
    assert len(lines) == 3
    assert len(dat_path.read_text().splitlines()) == 15   # header + 14 buses


def test_scenario_config_from_json(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({
        "case": bundled_case_path("ieee14"),
        "trials": 4, "seed": 11, "noise": "gaussian", "q": 4.0,
        "mode": "remove",
        "bad_data": [{"selector": {"device": "PMU", "kind": "V_R", "bus": 1},
                      "alteration": 0.3}]}))
    cfg = ScenarioConfig.from_json(str(path))
    assert cfg.trials == 4 and cfg.seed == 11 and cfg.q == 4.0
    assert cfg.mode == "remove" and cfg.noise == "gaussian"
    assert cfg.bad_data == [({"device": "PMU", "kind": "V_R", "bus": 1}, 0.3)]


def test_scenario_config_rejects_zero_trials():
    with pytest.raises(HarnessError, match="trials"):
        ScenarioConfig(case_path="x", trials=0)


def test_campaign_records_trial_failures(tmp_path):
    # An unobservable hand-built measurement file: campaign continues and
    # reports the per-trial error.
    readings = [{"id": "a", "device": "PMU", "kind": "V_R", "bus": 1,
                 "value": 1.06, "sigma": 0.01}]
    mpath = tmp_path / "m.json"
    mpath.write_text(json.dumps(readings))
    cfg = _config(tmp_path, trials=2, measurements_path=str(mpath))
    res = run_campaign(cfg)
    assert all(t.error is not None for t in res.trials)
    assert res.mean_sigma2_x is None


def test_custom_counts_placement(case14):
    p = table1_placement(case14, counts=(2, 4, 3, 2, 4))
    assert (len(p.pmu_buses), len(p.pmu_currents)) == (2, 4)
    assert (len(p.rtu_v_buses), len(p.rtu_inj_buses), len(p.rtu_flows)) == (3, 2, 4)
