import csv
import json
import subprocess
import sys

import pytest

from sharplimit.cli import main

FAST = ["--T", "0.01", "--sharp-n", "200"]


def read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_profile(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "profile"]) == 0
    rows = dict(read(tmp_path / "profile.csv")[1:])
    assert float(rows["max_second_order_residual"]) < 1e-12
    assert abs(float(rows["surface_tension"]) - float(rows["closed_form"])) < 1e-8
    assert "surface_tension" in capsys.readouterr().out


def test_spectral(tmp_path):
    assert main(["--out", str(tmp_path), "spectral", "--eps", "0.5,0.25,0.125", "--n", "801"]) == 0
    rows = read(tmp_path / "spectral.csv")
    assert rows[0] == ["eps", "lambda1", "lambda2", "eigenfunction_deviation"]
    assert len(rows) == 4


def test_sharp(tmp_path):
    assert main(["--out", str(tmp_path), "sharp", *FAST, "--snapshots", "5"]) == 0
    rows = read(tmp_path / "sharp.csv")
    assert rows[0] == ["t", "R", "V", "mu_front", "d1"]
    assert len(rows) == 7 and float(rows[-1][1]) < 0.5


def test_construct(tmp_path):
    assert main(["--out", str(tmp_path), "construct", *FAST, "--eps", "0.1", "--time", "0.005", "--profile"]) == 0
    names = {r[0] for r in read(tmp_path / "construct.csv")[1:]}
    assert {"omega3_sup", "omega3_l2"} <= names
    assert read(tmp_path / "construct_profile.csv")[0][:2] == ["r", "u_A"]


def test_diffuse(tmp_path):
    assert main(["--out", str(tmp_path), "diffuse", *FAST, "--eps", "0.1", "--snapshots", "2"]) == 0
    rows = read(tmp_path / "diffuse.csv")
    assert rows[0][0] == "t" and len(rows) == 4


def test_converge_with_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("ladder = 0.2, 0.1, 0.05\nT = 0.01\nsharp_n = 200\npoints_per_eps = 16\nsnapshots = 2\n"
                   "delta = 0.15\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out), "converge"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["ladder"] == [0.2, 0.1, 0.05]
    assert (out / "u_outer.svg").exists()


@pytest.mark.parametrize("argv, code", [
    (["converge", "--ladder", "0.05,0.1,0.025"], 2),
    (["construct", "--eps", "-1"], 2),
    (["construct", "--eps", "0.1", "--delta", "0.4"], 2),
])
def test_error_lines(tmp_path, capsys, argv, code):
    assert main(["--out", str(tmp_path), *argv]) == code
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("error ")
    payload = json.loads(err[len("error "):])
    assert payload["code"] == "invalid-argument" and payload["message"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "sharplimit", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("sharplimit ")


def test_unknown_subcommand_exits_nonzero():
    out = subprocess.run([sys.executable, "-m", "sharplimit", "bogus"], capture_output=True, text=True)
    assert out.returncode != 0
