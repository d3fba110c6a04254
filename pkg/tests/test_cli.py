import json
import subprocess
import sys

import pytest

from komatu_loewner.cli import EXIT_CONFIG, EXIT_OK, EXIT_TOLERANCE, main

GOLDEN = {"domain": {"y": [1.0], "x_left": [-1.0], "x_right": [1.0]}}


@pytest.fixture
def config(tmp_path):
    def write(d):
        p = tmp_path / "config.json"
        p.write_text(json.dumps(d))
        return str(p)
    return write


def test_kernel_command(config, tmp_path):
    out = tmp_path / "k"
    code = main(["kernel", config(GOLDEN), "--xi", "0.2", "--samples", "500", "--nx", "5",
                 "--ny", "4", "--out", str(out)])
    assert code == EXIT_OK
    rep = json.loads((out / "bound_report.json").read_text())
    assert rep["passed"] and rep["residual"] < 1e-8
    assert (out / "kstar_field.csv").read_text().startswith("x,y,kstar\n")
    assert json.loads((out / "kernel.json").read_text())["schema_version"] == 1


def test_kernel_tolerance_failure(config, tmp_path):
    assert main(["kernel", config(GOLDEN), "--degree", "2", "--out", str(tmp_path)]) == EXIT_TOLERANCE


def test_bad_config(tmp_path, config):
    bad = config({"domain": {"y": [1.0], "x_left": [1.0], "x_right": [0.0]}})
    assert main(["kernel", bad, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["solve", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_solve_is_byte_reproducible(config, tmp_path, capsys):
    cfg = dict(GOLDEN, driver={"kind": "dirac", "T": 0.1, "n_steps": 10, "params": {"path": 0.0}},
               solve={"T": 0.1, "points": [[0.0, 2.0]]})
    path = config(cfg)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", path, "--out", str(a)]) == EXIT_OK
    assert main(["solve", path, "--out", str(b), "--no-report"]) == EXIT_OK
    for name in ("trajectory.json", "trajectory.csv", "slits.csv", "driver.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "report.json").read_text())
    assert rep["evolution_family"]["passed"] and rep["halt_reason"] == "completed"
    assert "point 0" in capsys.readouterr().out


def test_solve_half_plane_value(config, tmp_path, capsys):
    cfg = {"driver": {"kind": "dirac", "T": 1.0}, "solve": {"points": [[0.0, 1.0]]}}
    assert main(["solve", config(cfg), "--no-report", "--out", str(tmp_path)]) == EXIT_OK
    line = capsys.readouterr().out.strip().splitlines()[-1]
    im = float(line.split("z=(")[1].split(",")[1].rstrip(")").split(")")[0])
    assert im == pytest.approx(5 ** 0.5, abs=1e-9)


def test_solve_horizon_is_checked(config, tmp_path):
    cfg = dict(GOLDEN, driver={"kind": "dirac", "T": 0.1})
    assert main(["solve", config(cfg), "--T", "0.5", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_validate_tampered_tolerance(tmp_path, capsys):
    code = main(["validate", "--criteria", "4", "--tolerance", "conservation_abs=1e-30",
                 "--out", str(tmp_path)])
    assert code == EXIT_TOLERANCE
    assert "[FAIL] criterion  4" in capsys.readouterr().out


def test_validate_quick_subset(tmp_path):
    assert main(["validate", "--criteria", "1,4", "--out", str(tmp_path)]) == EXIT_OK
    d = json.loads((tmp_path / "validation.json").read_text())
    assert d["passed"]


def test_module_entry_point_and_threads():
    r = subprocess.run([sys.executable, "-m", "komatu_loewner", "--threads", "1", "--help"],
                       capture_output=True, text=True, timeout=60)
    assert r.returncode == 0
    assert "trajectory.csv" in r.stdout
