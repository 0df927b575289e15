import json
import math
import os
import pathlib
import subprocess

import pytest

cvahedge = pytest.importorskip("cvahedge")

ROOT = pathlib.Path(__file__).resolve().parents[2]
SCENARIOS = ROOT / "scenarios"


def small(name, paths=4000):
    s = cvahedge.load_scenario(str(SCENARIOS / name))
    s.estimator_paths = paths
    s.threads = 1
    return s


def test_round_trip():
    s = small("cds_n1.json")
    again = cvahedge.parse_scenario(s.to_json())
    assert again == s
    assert again.to_json() == s.to_json()


def test_bad_scenario_reports_field():
    text = (SCENARIOS / "cds_n1.json").read_text()
    doc = json.loads(text)
    doc["sim"]["n_paths"] = 0
    with pytest.raises(ValueError, match="n_paths"):
        cvahedge.parse_scenario(json.dumps(doc))
    doc = json.loads(text)
    doc["model"]["kapa"] = 1
    with pytest.raises(ValueError, match="model.kapa"):
        cvahedge.parse_scenario(json.dumps(doc))


def test_direct_and_recursive_agree_with_oracle():
    s = small("cds_n1.json")
    d = cvahedge.price(s, method="direct")
    r = cvahedge.price(s, method="recursive")
    o = cvahedge.oracle(s)
    for est in (d, r):
        se = math.hypot(est["std_error"], o["std_error"])
        assert abs(est["value"] - o["value"]) <= 3 * se + 1e-12


def test_triggered_cds_is_loss():
    s = small("cds_n1.json", 16)
    assert cvahedge.price(s, state=0b11)["value"] == 0.6


def test_constant_intensity_formula():
    v = cvahedge.cds_constant_intensity(0.6, 0.02, 0.05, 1.0)
    assert v == pytest.approx((0.6 - 0.02 / 0.05) * (1 - math.exp(-0.05)))


def test_simulate_compensators_nonnegative():
    s = small("contagion_n3.json")
    p = cvahedge.simulate(s, 3)
    assert p["times"][0] == 0.0 and p["times"][-1] == s.horizon
    assert min(p["compensators"]) >= 0.0
    assert len(p["default_times"]) == s.n_names


def test_run_zero_portfolio_hedge(tmp_path):
    s = small("zero_portfolio.json")
    s.output_dir = str(tmp_path)
    code, log = cvahedge.run(s)
    assert code == 0, log
    lines = (tmp_path / "hedge.csv").read_text().splitlines()
    assert lines[0] == "time,theta,eta,value,U1,U2,U3,phi,dC,dA"
    for row in lines[1:]:
        cells = [float(c) for c in row.split(",")]
        assert cells[1:7] == [0.0] * 6 and cells[8:] == [0.0, 0.0]


def test_cli_config_error(tmp_path):
    cli = os.environ.get("CVAHEDGE_CLI")
    if not cli:
        pytest.skip("CLI path not provided")
    doc = json.loads((SCENARIOS / "cds_n1.json").read_text())
    doc["sim"]["n_paths"] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    res = subprocess.run([cli, "--scenario", str(path), "--mode", "simulate", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 2
    assert "n_paths" in res.stderr
