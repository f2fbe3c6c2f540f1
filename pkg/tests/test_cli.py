import json

import pytest

from skembed.cli import run


def _json(path):
    return json.loads(path.read_text())


def test_annulus_check_order(tmp_path):
    inst = tmp_path / "ann.json"
    assert run(["gen", "--preset", "annulus-pair", "-o", str(inst)]) == 0
    assert run(["check-order", str(inst), "--domain", "U", "--out", str(tmp_path / "U")]) == 1
    assert (tmp_path / "U" / "witness.csv").exists()
    verdict = _json(tmp_path / "U" / "order.json")
    assert verdict["in_order"] is False and verdict["routes_agree"]
    assert run(["check-order", str(inst), "--domain", "V", "--out", str(tmp_path / "V")]) == 0


def test_delta_solve_duality(tmp_path):
    inst = tmp_path / "d.json"
    assert run(["gen", "--preset", "delta-start", "-o", str(inst)]) == 0
    assert run(["solve", str(inst), "--out", str(tmp_path)]) == 0
    assert run(["duality", str(inst), "--out", str(tmp_path)]) == 0
    summary = _json(tmp_path / "duality.json")
    assert summary["gap"] <= 1e-8 and summary["ok"]


def test_config_errors(tmp_path, capsys):
    assert run(["solve", "--no-such-flag"]) == 2
    assert run([]) == 2
    assert run(["solve", str(tmp_path / "missing.json")]) == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{\n  "method": "exact",\n  "colour": "blue"\n}\n')
    assert run(["--config", str(cfg), "gen", "--preset", "delta-start"]) == 2
    assert ":3:" in capsys.readouterr().err
    cfg.write_text('{\n  "method": exact\n}\n')
    assert run(["--config", str(cfg), "gen", "--preset", "delta-start"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"lattice": {"d": 2, "h": 1, "R_O": 3}, "mu": [], "nu": [],
                               "extra": 1}))
    assert run(["solve", str(bad)]) == 2


def test_report_is_composition(tmp_path, monkeypatch):
    monkeypatch.setenv("SKEMBED_THREADS", "2")
    inst = tmp_path / "m.json"
    assert run(["gen", "--preset", "two-shell-mixture", "--d", "2", "--R-O", "5",
                "-o", str(inst)]) == 0
    code = run(["report", str(inst), "--out", str(tmp_path / "r"), "--paths", "5000"])
    rep = _json(tmp_path / "r" / "report.json")
    parts = {}
    for name in ("check-order", "solve", "duality", "barrier"):
        parts[name] = run([name, str(inst), "--out", str(tmp_path / name)])
        assert rep[name] == ("pass" if parts[name] == 0 else "fail")
    assert code == max(parts.values())
    assert rep["details"]["barrier"]["n_violations"] == _json(
        tmp_path / "barrier" / "cap_report.json")["n_violations"]


def test_round_trip_every_subcommand(tmp_path):
    inst = tmp_path / "d.json"
    run(["gen", "--preset", "overlap-pair", "-o", str(inst)])
    before = inst.read_text()
    assert run(["envelope", str(inst), "--out", str(tmp_path)]) == 0
    assert run(["simulate", str(inst), "--out", str(tmp_path), "--paths", "2000",
                "--threads", "2", "--trace", "3"]) == 0
    assert (tmp_path / "sim_trace.csv").exists()
    code = run(["simulate", str(inst), "--policy", str(tmp_path / "policy.json"), "--out",
                str(tmp_path / "p"), "--paths", "2000"])
    assert code == 0 and (tmp_path / "p" / "sim_report.json").exists()
    assert inst.read_text() == before
    assert run(["gain-scan", "--d", "2", "--h", "0.5", "--R-O", "3", "--y", "2,0", "--r-x", "2",
                "--profile", "2:1", "--alpha", "1", "--out", str(tmp_path / "g")]) == 0
    data = _json(tmp_path / "g" / "scan.json")
    assert data["verdict"] == "PASS"


def test_twelve_significant_digits(tmp_path):
    inst = tmp_path / "m.json"
    run(["gen", "--preset", "overlap-pair", "-o", str(inst)])
    run(["solve", str(inst), "--out", str(tmp_path)])
    text = (tmp_path / "stop_measures.csv").read_text().splitlines()[1]
    for field in text.split(",")[-2:]:
        digits = field.replace(".", "").replace("-", "").split("e")[0].lstrip("0")
        assert len(digits) <= 12
