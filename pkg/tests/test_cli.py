import json
import subprocess
import sys

import pytest

from pbds.catalog import Catalog
from pbds.cli import main
from pbds.fixtures import CITIES_ROWS, Q2_TEXT, REUSE_TEMPLATE_TEXT
from pbds.storage import load_dir

SCHEMA = "popden:int,city:str,state:str"


def write_cities(path, rows=CITIES_ROWS):
    lines = ["popden,city,state"] + [f"{p},{c},{s}" for p, c, s in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def data(tmp_path):
    d = tmp_path / "data"
    assert main(["load", str(write_cities(tmp_path / "cities.csv")), "--name", "cities",
                 "--schema", SCHEMA, "--data", str(d)]) == 0
    return d


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_load_assigns_row_ids_in_file_order(data):
    rel = load_dir(str(data))["cities"]
    assert rel.ids == tuple(f"t{i}" for i in range(1, 8))
    assert rel.rows[1] == (6000, "San Diego", "CA")


def test_load_empty_file(tmp_path, capsys):
    f = tmp_path / "e.csv"
    f.write_text("popden,city,state\n")
    code, out, _ = run(capsys, "load", str(f), "--name", "e", "--schema", SCHEMA,
                       "--data", str(tmp_path / "d"))
    assert code == 0 and "0 rows" in out
    assert len(load_dir(str(tmp_path / "d"))["e"]) == 0


def test_load_reports_bad_cell_line(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("popden,city,state\n4200,Anchorage,AK\nlots,Austin,TX\n")
    code, _, err = run(capsys, "load", str(f), "--name", "c", "--schema", SCHEMA,
                       "--data", str(tmp_path / "d"))
    assert code == 2 and "line 3" in err


def test_load_rejects_duplicate_name(data, tmp_path, capsys):
    code, _, err = run(capsys, "load", str(write_cities(tmp_path / "again.csv")), "--name", "cities",
                       "--schema", SCHEMA, "--data", str(data))
    assert code == 2 and "already exists" in err


def test_run_q2(data, capsys):
    code, out, _ = run(capsys, "run", Q2_TEXT, "--data", str(data), "--lineage")
    assert code == 0
    assert "CA    | 5500" in out
    assert "{cities.t2, cities.t3}" in out


def test_capture_equi_depth_four(data, capsys):
    # Expected 0x8 (CA in fragment 1).  Equi-depth with 4 fragments over the seven
    # states puts AK alone in fragment 1, so CA lands in fragment 2 (0x4).
    code, out, _ = run(capsys, "capture", Q2_TEXT, "--partition", "cities.state:equi-depth:4",
                       "--data", str(data))
    assert code == 0
    assert "0x8" in out


def test_capture_with_explicit_bounds(data, capsys):
    code, out, _ = run(capsys, "capture", Q2_TEXT, "--partition", "cities.state:bounds:DE,MI,OK",
                       "--data", str(data))
    assert code == 0
    assert "1000 0x8" in out
    e = Catalog.open(str(data / "catalog.jsonl")).entries[0]
    assert e.safe and e.topk_min_rows == (1,)


def test_capture_refuses_unsafe_then_forces(data, capsys):
    args = ["capture", Q2_TEXT, "--partition", "cities.popden:bounds:4000", "--data", str(data)]
    code, out, _ = run(capsys, *args)
    assert code == 1 and "refusing" in out
    code, out, _ = run(capsys, *args, "--force", "--show-rewrite")
    assert code == 0 and "forced" in out and "CASE WHEN popden <= 4000" in out
    code, out, _ = run(capsys, "run", Q2_TEXT, "--use-sketch", "ps1", "--data", str(data))
    assert "NY    | 7000" in out


def test_check_safe_exit_codes(data, capsys):
    q = "select(totden < 7000, agg([state], sum(popden) as totden, scan(cities)))"
    code, out, _ = run(capsys, "check-safe", q, "--attrs", "cities.popden", "--data", str(data))
    assert code == 1 and out.strip() == "Unknown"
    code, out, _ = run(capsys, "check-safe", Q2_TEXT, "--attrs", "cities.state", "--explain",
                       "--data", str(data))
    assert code == 0 and out.startswith("verdict: Safe")


def test_check_reuse(data, capsys):
    base = ["check-reuse", REUSE_TEMPLATE_TEXT, "--data", str(data)]
    assert run(capsys, *base, "--captured", "100,10", "--incoming", "100,15")[0] == 0
    assert run(capsys, *base, "--captured", "100,15", "--incoming", "100,10")[0] == 1


def test_catalog_commands(data, capsys):
    code, out, _ = run(capsys, "catalog", "list", "--data", str(data))
    assert code == 0 and out.strip().splitlines() == ["id | template | binding | attrs | bits | safe | uses"]
    run(capsys, "capture", Q2_TEXT, "--partition", "cities.state:bounds:DE,MI,OK", "--data", str(data))
    code, out, _ = run(capsys, "catalog", "show", "ps1", "--data", str(data))
    assert code == 0 and "1000 0x8" in out
    assert run(capsys, "catalog", "drop", "ps1", "--data", str(data))[0] == 0
    assert run(capsys, "catalog", "show", "ps1", "--data", str(data))[0] == 2


def test_usage_errors(data, capsys):
    assert run(capsys, "run", "select(", "--data", str(data))[0] == 2
    assert run(capsys, "capture", Q2_TEXT, "--partition", "cities.state:weird:3", "--data", str(data))[0] == 2
    assert run(capsys, "run", Q2_TEXT, "--data", str(data / "missing"))[0] == 2


def test_simulate_writes_report(tmp_path, capsys):
    spec = {
        "synthetic": {"rows": 4000, "seed": 1},
        "templates": [{"text": "select(total > $3, agg([g], sum(v) as total, "
                               "select(a >= $1 AND a < $2, scan(R))))",
                       "params": [{"mean": 50000, "stddev": 1500, "step": 500},
                                  {"kind": "offset", "mean": 1000, "base": 1}, 10]}],
        "queries": 30, "seed": 2, "policy": {"fragments": 100},
    }
    w = tmp_path / "w.json"
    w.write_text(json.dumps(spec))
    report = tmp_path / "r.json"
    code, out, _ = run(capsys, "simulate", "--workload", str(w), "--report", str(report),
                       "--data", str(tmp_path))
    assert code == 0 and "first reuse" in out
    body = json.loads(report.read_text())
    assert body["queries"] == 30 and len(body["cumulative"]["policy"]) == 30
    code2, out2, _ = run(capsys, "simulate", "--workload", str(w), "--data", str(tmp_path))
    assert out2 == out


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "pbds", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "check-safe" in r.stdout
