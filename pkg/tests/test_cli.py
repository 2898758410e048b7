import json

from rectse import bundled_case_path
from rectse.cli import (EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK,
                        EXIT_UNOBSERVABLE, main)


def test_make_measurements_then_estimate(tmp_path, capsys):
    case = bundled_case_path("ieee14")
    mfile = tmp_path / "m.json"
    report = tmp_path / "report.json"
    assert main(["make-measurements", "--case", case, "--seed", "3",
                 "--out", str(mfile)]) == EXIT_OK
    assert main(["estimate", "--case", case, "--measurements", str(mfile),
                 "--out", str(report)]) == EXIT_OK
    doc = json.loads(report.read_text())
    assert doc["converged"] is True
    assert len(doc["state"]["bus_ids"]) == 14
    err = capsys.readouterr().err
    assert "27 states" in err


def test_estimate_writes_report_to_stdout(tmp_path, capsys):
    case = bundled_case_path("ieee14")
    mfile = tmp_path / "m.json"
    main(["make-measurements", "--case", case, "--out", str(mfile)])
    assert main(["estimate", "--case", case,
                 "--measurements", str(mfile)]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert "residuals" in doc


def test_estimate_remove_mode_flag(tmp_path):
    case = bundled_case_path("ieee14")
    mfile = tmp_path / "m.json"
    main(["make-measurements", "--case", case, "--out", str(mfile)])
    assert main(["estimate", "--case", case, "--measurements", str(mfile),
                 "--mode", "remove", "--q", "4"]) == EXIT_OK


def test_campaign_command(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"case": bundled_case_path("ieee14"),
                               "trials": 2, "seed": 5}))
    out = tmp_path / "out"
    assert main(["campaign", "--config", str(cfg),
                 "--out-dir", str(out)]) == EXIT_OK
    lines = (out / "campaign.csv").read_text().splitlines()
    assert len(lines) == 3
    assert (out / "state_errors.dat").exists()


def test_campaign_flag_overrides(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"case": bundled_case_path("ieee14"),
                               "trials": 5, "seed": 5}))
    out = tmp_path / "out"
    assert main(["campaign", "--config", str(cfg), "--out-dir", str(out),
                 "--trials", "1", "--noise", "none"]) == EXIT_OK
    lines = (out / "campaign.csv").read_text().splitlines()
    assert len(lines) == 2


def test_missing_case_file_is_input_error(tmp_path, capsys):
    assert main(["make-measurements", "--case", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "m.json")]) == EXIT_INPUT
    assert "input error" in capsys.readouterr().err


def test_malformed_measurements_is_input_error(tmp_path, capsys):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    assert main(["estimate", "--case", bundled_case_path("ieee14"),
                 "--measurements", str(bad)]) == EXIT_INPUT


def test_unobservable_set_exit_code(tmp_path, capsys):
    mfile = tmp_path / "m.json"
    mfile.write_text(json.dumps([{"id": "a", "device": "PMU", "kind": "V_R",
                                  "bus": 1, "value": 1.06, "sigma": 0.01}]))
    assert main(["estimate", "--case", bundled_case_path("ieee14"),
                 "--measurements", str(mfile)]) == EXIT_UNOBSERVABLE
    assert "unobservable" in capsys.readouterr().err


def test_nonconverged_exit_code(tmp_path, capsys):
    case = bundled_case_path("ieee14")
    mfile = tmp_path / "m.json"
    main(["make-measurements", "--case", case, "--out", str(mfile)])
    readings = json.loads(mfile.read_text())
    # Corrupt many readings and forbid iterations so the cleanup loop is cut off.
    for rd in readings[:5]:
        rd["value"] *= 1.5
    mfile.write_text(json.dumps(readings))
    code = main(["estimate", "--case", case, "--measurements", str(mfile),
                 "--max-iterations", "1"])
    assert code == EXIT_NONCONVERGED
    assert "iteration limit" in capsys.readouterr().err
