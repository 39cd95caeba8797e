import csv
import json
import subprocess
import sys

import pytest

from udgfl.cli import main


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "inst.txt"
    assert main(["gen", "--n", "30", "--seed", "2", "--box", "2.5", "--out", str(path)]) == 0
    return path


def test_solve_writes_report_and_csv(tmp_path, inst_file, capsys):
    out, table = tmp_path / "rep.json", tmp_path / "r.csv"
    code = main(["solve", "--input", str(inst_file), "--solver", "boxptas", "--grid-trials", "4",
                 "--out", str(out), "--csv", str(table)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["config"]["solver"] == "boxptas" and rep["error"] is None
    assert rep["solution"]["total_cost"] == pytest.approx(rep["cost"])
    assert all(a["passed"] for a in rep["audits"].values())
    assert list(csv.DictReader(open(table)))[0]["solver"] == "boxptas"
    assert "PASS solution_consistency" in capsys.readouterr().out


def test_audit_round_trip_and_tamper(tmp_path, inst_file):
    out = tmp_path / "rep.json"
    assert main(["solve", "--input", str(inst_file), "--solver", "exact", "--out", str(out)]) == 0
    assert main(["audit", "--report", str(out)]) == 0
    rep = json.loads(out.read_text())
    rep["solution"]["total_cost"] += 1.0
    out.write_text(json.dumps(rep))
    assert main(["audit", "--report", str(out)]) == 2
    rep["audits"]["udg_edges"]["passed"] = False
    rep["instance"].pop("source")
    out.write_text(json.dumps(rep))
    assert main(["audit", "--report", str(out)]) == 2


def test_errors_exit_one(tmp_path, inst_file):
    assert main(["solve", "--input", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "x.json")]) == 1
    assert main(["solve", "--input", str(inst_file), "--eps", "2", "--out", str(tmp_path / "x.json")]) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("0 0 0 client\n1 0 0 facility 1.0\n")
    assert main(["solve", "--input", str(bad), "--out", str(tmp_path / "x.json")]) == 1
    assert main(["solve", "--input", str(bad), "--merge-coincident", "--solver", "exact",
                 "--out", str(tmp_path / "x.json")]) == 0


def test_stage_failure_exits_one(tmp_path, inst_file):
    out = tmp_path / "rep.json"
    code = main(["solve", "--input", str(inst_file), "--solver", "boxptas", "--net-cap", "1", "--L", "0.01",
                 "--out", str(out)])
    assert code == 1
    assert json.loads(out.read_text())["error"]["stage"] == "box"


def test_module_entry_point(tmp_path):
    path = tmp_path / "g.json"
    res = subprocess.run([sys.executable, "-m", "udgfl.cli", "gen", "--family", "corridor", "--n", "40",
                          "--out", str(path)], capture_output=True, text=True)
    assert res.returncode == 0 and path.exists()
    assert json.loads(path.read_text())
