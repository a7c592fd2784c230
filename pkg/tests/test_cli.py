import json

import numpy as np
import pytest

from carvesim.cli import main


def run_json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    assert code == 0
    return json.loads(out)


def test_protocol_stdout_json(capsys):
    report = run_json(
        capsys, ["protocol", "--scheme", "double", "--target", "psi_plus", "--trials", "500", "--seed", "7"]
    )
    assert report["command"] == "protocol"
    assert 0.7 < report["exact"]["fidelity"]["psi_plus"] < 0.8
    assert report["monte_carlo"]["trials"] == 500
    assert len(report["config_hash"]) == 16


def test_protocol_files(tmp_path, capsys):
    out = tmp_path / "run.json"
    code = main(
        ["protocol", "--scheme", "single", "--target", "psi_plus", "--alpha", "1.0",
         "--trials", "300", "--out", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert "eta_ideal" in report["exact"]
    csv_text = (tmp_path / "run.csv").read_text()
    lines = csv_text.splitlines()
    assert lines[0] == "# carvesim protocol"
    assert lines[1].startswith("# config_hash: ")
    assert lines[2] == "# columns: step,herald_prob,d_fraction,any_prob"
    assert len(lines) == 4  # single scheme: one pulse row


def test_ideal_flag_gives_lossless_limit(capsys):
    report = run_json(
        capsys,
        ["protocol", "--scheme", "double", "--target", "psi_plus", "--ideal", "--trials", "200"],
    )
    assert report["exact"]["fidelity"]["psi_plus"] == pytest.approx(1.0, abs=1e-9)
    assert report["exact"]["success_prob"] == pytest.approx(0.5, abs=1e-9)


def test_singlet_target_switches_preparation(capsys):
    report = run_json(
        capsys,
        ["protocol", "--scheme", "double", "--target", "psi_minus", "--ideal", "--trials", "200"],
    )
    assert report["exact"]["fidelity"]["psi_minus"] == pytest.approx(1.0, abs=1e-9)


def test_sweep_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["sweep", "--scheme", "double", "--target", "psi_plus", "--variable", "nbar",
         "--start", "0.1", "--stop", "0.7", "--steps", "3", "--trials", "200", "--out", str(out)]
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# carvesim sweep"
    assert "# columns: x,fidelity_exact,fidelity_mc,mc_stderr,success_prob" in lines
    data = [l for l in lines if not l.startswith("#")]
    assert len(data) == 3
    assert data[0].split(",")[0] == "0.1"


def test_sweep_rejects_bad_range():
    assert main(["sweep", "--variable", "nbar", "--start", "0.5", "--stop", "0.1", "--steps", "3"]) == 2


def test_parity_outputs(tmp_path, capsys):
    out = tmp_path / "parity.csv"
    code = main(
        ["parity", "--scheme", "double", "--target", "psi_plus", "--ideal",
         "--n-phases", "12", "--trials", "100", "--out", str(out)]
    )
    assert code == 0
    fit = json.loads((tmp_path / "parity.json").read_text())
    # ideal triplet: offset 2 * re<ud|rho|du> = 1
    assert fit["offset"] == pytest.approx(1.0, abs=1e-9)
    data = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(data) == 12


def test_husimi_named_state(tmp_path):
    out = tmp_path / "q.csv"
    code = main(["husimi", "--state", "phi_minus", "--resolution", "10x20", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")]
    assert len(data) == 200
    header = "\n".join(lines[:6])
    assert "integral:" in header
    qcol = np.array([float(l.split(",")[2]) for l in data])
    assert qcol.max() <= 3 / (4 * np.pi) + 1e-9


def test_husimi_bad_resolution():
    assert main(["husimi", "--state", "psi_plus", "--resolution", "axb"]) == 2


def test_lifetime_fit_output(tmp_path):
    out = tmp_path / "life.csv"
    code = main(["lifetime", "--target", "phi_minus", "--t-max", "250", "--points", "25", "--out", str(out)])
    assert code == 0
    report = json.loads((tmp_path / "life.json").read_text())
    assert report["tau_us"] == pytest.approx(90.0, rel=1e-3)


def test_detect_matrix(capsys):
    report = run_json(capsys, ["detect", "--trials", "20000", "--seed", "5"])
    matrix = np.array(report["matrix"])
    assert matrix.shape == (3, 4)
    np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-12)
    assert all(matrix[i, i] > 0.9 for i in range(3))


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("pulse.nbar = 0.5\nseed = 4\ntrials = 300\n")
    report = run_json(capsys, ["protocol", "--config", str(cfg)])
    assert report["monte_carlo"]["seed"] == 4
    report2 = run_json(capsys, ["protocol", "--config", str(cfg), "--seed", "5"])
    assert report2["monte_carlo"]["seed"] == 5
    assert report2["config_hash"] != report["config_hash"]


def test_bad_config_is_exit_1(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("pulse.sparkle = 1\n")
    assert main(["protocol", "--config", str(cfg)]) == 1
    assert main(["protocol", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert main(["protocol", "--trials", "0"]) == 1


def test_physics_errors_are_exit_2():
    assert main(["protocol", "--scheme", "single", "--target", "psi_minus"]) == 2


def test_cli_is_deterministic(tmp_path):
    args = ["protocol", "--scheme", "double", "--target", "psi_plus", "--trials", "400", "--seed", "21"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
