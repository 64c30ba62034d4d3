from __future__ import annotations

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from qsteer.cli import fixture_names, main, run


def _main_json(argv, tmp_path, name="out.json"):
    path = tmp_path / name
    code = main(argv + ["--out", str(path)])
    return code, json.loads(path.read_text()), path


def test_detect_werner_fixture(tmp_path):
    code, rep, _ = _main_json(["detect", "werner_w0.8_xz"], tmp_path)
    assert code == 0
    assert rep["result"]["steering"] is True and rep["result"]["mu"] < 0
    assert set(rep) == {"command", "inputs", "result", "solver", "wall_time"}
    assert len(next(iter(rep["inputs"]["files"].values()))) == 64


def test_validate_signalling_file(tmp_path):
    code, rep, _ = _main_json(["gen", "--w", "0.8"], tmp_path, "gen.json")
    asm = rep["result"]["assemblage"]
    asm["members"][0][0][0][0][0] += 0.05
    asm["members"][0][1][1][1][0] -= 0.05
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(asm))
    code, rep = run(["validate", str(bad)])
    assert code == 2 and "no-signalling" in rep["result"]["message"]


def test_unknown_file_exit_2():
    code, rep = run(["detect", "does_not_exist.json"])
    assert code == 2 and rep["result"]["error"] == "invalid-input"


def test_sweep_boundary():
    code, rep = run(["sweep", "--range", "0:1:41", "--workers", "1"])
    res = rep["result"]
    assert code == 0 and res["monotone"]
    assert abs(res["boundary"] - 1 / np.sqrt(2)) <= 0.0125


def test_deterministic_payload():
    argv = ["seesaw", "robustness", "--w", "1.0", "--restarts", "2", "--seed", "3"]
    _, r1 = run(argv)
    _, r2 = run(argv)
    for r in (r1, r2):
        r.pop("wall_time")
    assert json.dumps(r1, sort_keys=True, default=str) == json.dumps(r2, sort_keys=True, default=str)


@pytest.mark.parametrize("argv", [
    ["detect", "werner_w0.8_xz"],
    ["detect", "werner_w0.5_xz"],
    ["witness", "werner_w0.8_xz"],
    ["weight", "werner_w1_xz"],
    ["weight", "werner_w1_xz", "--consistent"],
    ["robustness", "werner_w1_xz"],
    ["robustness", "werner_w0.8_xz", "--noise", "reduced-state"],
    ["randomness", "local", "werner_w1_xz"],
    ["randomness", "global", "werner_w1_xz", "--bob", "Z"],
    ["lhs-model", "target", "--w", "0.3", "--directions", "octahedron"],
    ["multi", "ms", "ghz_noisy_1u_w0.2"],
    ["multi", "ms", "ghz_noisy_2u_w0.5", "--untrusted", "2"],
    ["npa", "ghz_noisy_2u_w0.8"],
    ["cv-test", "quadrature_example"],
    ["cv-test", "lossy_single_photon_eta0.75", "--level", "2"],
    ["incompat", "--meas", "XZ"],
])
def test_verify_roundtrip(argv, tmp_path):
    code, rep, path = _main_json(argv, tmp_path)
    assert code == 0, rep
    code, ver = run(["verify", str(path)])
    assert code == 0 and ver["result"]["valid"], ver["result"]


def test_verify_detects_tampering(tmp_path):
    code, rep, path = _main_json(["detect", "werner_w0.8_xz"], tmp_path)
    obj = json.loads(path.read_text())
    wit = obj["result"]["certificate"]["witness"]
    wit["elements"] = (np.asarray(wit["elements"]) * -1).tolist()
    path.write_text(json.dumps(obj))
    code, ver = run(["verify", str(path)])
    assert code == 0 and not ver["result"]["valid"]


def test_cv_underspecified_exit_2():
    code, rep = run(["cv-test", "quadrature_example", "--level", "2"])
    assert code == 2 and "A0 A0 A0" in rep["result"]["message"]


def test_pr_box_npa_rejected():
    code, rep = run(["npa", "pr_box", "--level", "2"])
    assert code == 0 and rep["result"]["quantum_compatible"] is False


def test_fixtures_listed():
    names = fixture_names()
    for w in ("0.5", "0.7071", "0.8", "1"):
        assert f"werner_w{w}_xz.json" in names
    assert "pr_box.json" in names and "quadrature_example.json" in names


def test_table_format(tmp_path, capsys):
    assert main(["detect", "werner_w0.8_xz", "--format", "table"]) == 0
    out = capsys.readouterr().out
    assert "steering" in out


@pytest.mark.skipif(shutil.which("qsteer") is None, reason="console script not installed")
def test_console_script():
    out = subprocess.run(["qsteer", "detect", "werner_w0.5_xz"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["result"]["steering"] is False


def test_module_entry():
    out = subprocess.run([sys.executable, "-m", "qsteer.cli", "fixtures"], capture_output=True, text=True)
    assert out.returncode == 0 and "pr_box.json" in out.stdout
