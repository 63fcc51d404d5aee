from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from rsenf.cli import EXIT_INVALID, EXIT_NO_DECISION, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    rlum, enf = d / "v.rlum", d / "ref.csv"
    code = main(["simulate", "--duration", "120", "--fps", "30", "--rows", "55", "--idle", "0.45",
                 "--snr-db", "25", "--seed", "7", "--offset", "150", "--ref-duration", "600",
                 "--ref-start", "2024-05-01T00:00:00Z", "--out-rlum", str(rlum), "--out-enf", str(enf)])
    assert code == EXIT_OK
    return d, rlum, enf


def test_model_csv_matches_table(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["model", "--grid-hz", "50", "--fps", "30", "--idle-step", "5", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 20
    by_idle = {float(r["idle_percent"]): r for r in rows}
    assert by_idle[5.0]["h1_hz"] == "100" and by_idle[5.0]["h2_hz"] == "70"
    assert float(by_idle[5.0]["ratio"]) == pytest.approx(5.0, rel=0.05)
    assert by_idle[45.0]["h1_hz"] == "40;70"
    assert by_idle[50.0]["h1_hz"] == "40"
    assert main(["model", "--fps", "25"]) == 0
    assert "idle_percent" in capsys.readouterr().out


def test_simulate_writes_sidecar(sim):
    d, rlum, enf = sim
    meta = json.loads((d / "v.rlum.json").read_text())
    assert meta["true_idle_pct"] == pytest.approx(45.0, abs=0.5)
    assert meta["seed"] == 7
    assert meta["true_start_utc"] == "2024-05-01T00:02:30Z"
    assert enf.read_text().splitlines()[1].startswith("2024-05-01T00:00:00Z,")


def test_estimate_idle_round_trip(sim, tmp_path):
    _, rlum, _ = sim
    out = tmp_path / "idle.json"
    assert main(["estimate-idle", "--rlum", str(rlum), "--grid-hz", "50", "--out-json", str(out)]) == 0
    est = json.loads(out.read_text())
    assert est["matched"]
    assert 40.0 <= est["point_estimate_pct"] <= 50.0


def test_extract_enf_to_stdout(sim, capsys):
    _, rlum, _ = sim
    assert main(["extract-enf", "--rlum", str(rlum), "--component-hz", "70"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "timestamp_utc,frequency_hz"
    assert len(lines) == 1 + 120 - 20 + 1


def test_verify_time_td_and_nd(sim, tmp_path, capsys):
    _, rlum, enf = sim
    out = tmp_path / "rep.json"
    args = ["verify-time", "--rlum", str(rlum), "--enf-log", str(enf), "--metric", "4",
            "--out-json", str(out)]
    assert main(args + ["--claimed-start", "2024-05-01T00:02:30Z"]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["decision"] == "TD"
    assert rep["expected_lag_s"] == 150.0
    assert "decision: TD" in capsys.readouterr().err
    # nothing can clear a threshold above 1
    code = main(args + ["--claimed-start", "2024-05-01T00:02:30Z", "--threshold", "1.01", "--metric", "1"])
    assert code == EXIT_NO_DECISION
    assert json.loads(out.read_text())["decision"] == "ND"


def test_vertical_phase_cli(tmp_path, capsys):
    from conftest import idle_series

    from rsenf.idle import row_means_from_series
    from rsenf.io import write_row_means

    p = tmp_path / "rows.csv"
    write_row_means(p, row_means_from_series(idle_series(0.48, seconds=40)))
    assert main(["vertical-phase", "--row-means", str(p), "--fps", "30"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert abs(res["idle_pct"] - 48.0) <= 2.0
    assert main(["vertical-phase", "--row-means", str(p), "--fps", "25"]) == EXIT_INVALID
    assert "inapplicable" in capsys.readouterr().err


def test_validation_errors_exit_2(sim, tmp_path, capsys):
    _, rlum, enf = sim
    bad = tmp_path / "bad.rlum"
    bad.write_text(rlum.read_text().rsplit("\n", 2)[0] + "\n")
    assert main(["estimate-idle", "--rlum", str(bad)]) == EXIT_INVALID
    assert "bad.rlum" in capsys.readouterr().err
    assert main(["estimate-idle", "--rlum", str(tmp_path / "missing.rlum")]) == EXIT_INVALID
    code = main(["verify-time", "--rlum", str(rlum), "--enf-log", str(enf),
                 "--claimed-start", "2023-01-01T00:00:00Z"])
    assert code == EXIT_INVALID
    assert main(["simulate", "--duration", "5", "--idle", "1.2", "--out-rlum", str(tmp_path / "x.rlum")]) == 2


def test_usage_errors_exit_64(capsys):
    assert main(["model", "--bogus"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["verify-time", "--metric", "5", "--rlum", "a", "--enf-log", "b", "--claimed-start", "c"]) == 64
    assert "usage" in capsys.readouterr().err


def test_determinism(tmp_path):
    outs = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.rlum"
        main(["simulate", "--duration", "4", "--idle", "0.3", "--snr-db", "10", "--seed", "3",
              "--out-rlum", str(p), "--out-enf", str(tmp_path / f"{name}.csv")])
        outs.append((p.read_bytes(), (tmp_path / f"{name}.csv").read_bytes(),
                     (tmp_path / f"{name}.rlum.json").read_bytes()))
    assert outs[0] == outs[1]


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "rsenf.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "0.1.0" in res.stdout
