import csv
import io
import json
import subprocess
import sys

import pytest

from crystalsim.analytics import min_committee_size
from crystalsim.cli import cmd_fig5, cmd_fig6, cmd_params, cmd_table2, cmd_table3, main


def _rows(text):
    return list(csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_params_monotone_and_note(tmp_path, capsys):
    out = tmp_path / "params.csv"
    assert main(["params", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# config:" in text and "# seed:" in text
    rows = _rows(text)
    ms = [int(r["m_min"]) for r in rows]
    assert ms == sorted(ms)
    last = rows[-1]
    assert last["alpha"] == "0.35" and "340" in last["note"]
    # re-verify against analytics
    for r in rows:
        assert int(r["m_min"]) == min_committee_size(float(r["alpha"]), 3024, 1e-4)
    main(["params", "--out", str(tmp_path / "again.csv")])
    assert (tmp_path / "again.csv").read_bytes() == out.read_bytes()


def test_params_flags_infeasible():
    out = cmd_params([0.2, 0.49], W=50, epsilon=1e-9)
    assert out.rows[-1]["note"] == "infeasible"


def test_table2_columns():
    out = cmd_table2(trials=10 ** 4, seed=1)
    assert len(out.rows) == 6 and out.ok
    first = out.rows[0]
    assert first["published_T_f"] == "16.6h" and first["T_f"] == "16.7h"
    assert first["tail"] == pytest.approx(1e-2)


def test_table3_cells():
    out = cmd_table3(0.0, trials=2 * 10 ** 4, seed=1)
    cell = {(r["protocol"], r["alpha"], r["k"]): r for r in out.rows}
    assert len(cell) == 40
    assert round(cell[("nc", 0.2, 4)]["analytic"], 4) == 0.0667
    assert round(cell[("crystal", 0.45, 8)]["analytic"], 3) == 0.201
    assert cell[("nc", 0.2, 4)]["published"] == 0.0667
    assert all("ci_low" in r and "trials" in r for r in out.rows)


def test_fig5_alpha_zero_row():
    out = cmd_fig5([0.0, 0.3], blocks=2 * 10 ** 4, seed=1)
    zero = out.rows[0]
    assert zero["nc_analytic"] == zero["crystal_analytic"] == zero["crystal_sim"] == zero["nc_sim"] == 0


def test_fig6_rows():
    out = cmd_fig6([0.0, 0.1], trials=10 ** 4, seed=1)
    assert [r["gamma_off"] for r in out.rows] == [0.0, 0.1]
    assert out.rows[1]["analytic"] > out.rows[0]["analytic"]


def test_json_format(tmp_path):
    out = tmp_path / "t.json"
    assert main(["table2", "--trials", "0", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["meta"]["seed"] == 0 and doc["meta"]["config"]["trials"] == 0
    assert len(doc["rows"]) == 6


def test_simulate_spec(tmp_path):
    spec = tmp_path / "s.yaml"
    spec.write_text(f"""
kind: simulate
seed: 3
trials: 2
grid:
  alpha: [0.2]
  delta: [0, 10]
base:
  n_honest: 2
  strategy: selfish
  horizon_blocks: 150
output:
  path: {tmp_path / 'out.csv'}
  traces: {tmp_path / 'traces'}
""")
    assert main(["simulate", str(spec)]) == 0
    rows = _rows((tmp_path / "out.csv").read_text())
    assert len(rows) == 4 and {r["seed"] for r in rows} == {"3", "4", "5", "6"}
    assert len(list((tmp_path / "traces").iterdir())) == 4
    first = (tmp_path / "out.csv").read_bytes()
    assert main(["simulate", str(spec)]) == 0
    assert (tmp_path / "out.csv").read_bytes() == first


def test_simulate_bad_spec_reports_field(tmp_path, capsys):
    spec = tmp_path / "bad.yaml"
    spec.write_text("kind: simulate\ngrid:\n  alpha: [0.1, 0.7]\n")
    assert main(["simulate", str(spec)]) == 2
    assert "grid.alpha[1]" in capsys.readouterr().err


def test_verify_subset(tmp_path):
    out = tmp_path / "v.json"
    code = main(["verify", "--only", "10", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert code == 0 and all(r["passed"] for r in doc["rows"])
    # the published committee-size tail is not reproduced, so this check fails
    assert main(["verify", "--only", "9"]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "crystalsim", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "0.1.0"
