from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qfilt.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"
UNSTABLE = str(DATA / "unstable_filter.json")
TWO_MODE = str(DATA / "two_mode.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_unstable_filter_passes(capsys):
    code, out, _ = run(capsys, "check", UNSTABLE, "--json")
    doc = json.loads(out)
    assert code == 0 and doc["pass"]
    assert doc["symplectic"]["max_residual"] < 1e-8


def test_check_lossy_fails_with_named_condition(capsys):
    code, out, _ = run(capsys, "check", str(DATA / "lossy_lowpass.json"), "--json")
    assert code == 1
    assert "symplectic condition" in json.loads(out)["failed"]


def test_check_state_space_input(capsys, tmp_path):
    code, out, _ = run(capsys, "realize", UNSTABLE, "--json")
    p = tmp_path / "ss.json"
    p.write_text(json.dumps(json.loads(out)["state_space"]))
    code, out, _ = run(capsys, "check", str(p), "--json")
    doc = json.loads(out)
    assert code == 0 and doc["realizable"]["pass"]


def test_missing_file_exit_2(capsys):
    code, _, err = run(capsys, "check", "does-not-exist.json")
    assert code == 2 and "does-not-exist" in err


def test_bad_expression_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"m": 1, "entries": [["(s + "]]}))
    code, _, err = run(capsys, "check", str(p))
    assert code == 2 and "ParseError" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "nonsense")[0] == 2
    assert run(capsys, "check", UNSTABLE, "--points", "1")[0] == 2
    assert run(capsys, "check", UNSTABLE, "--tol", "bogus=1")[0] == 2
    assert run(capsys, "check", UNSTABLE, "--tol", "symplectic")[0] == 2


def test_realize_unstable_filter_matrices(capsys):
    code, out, _ = run(capsys, "realize", UNSTABLE, "--json")
    assert code == 0
    doc = json.loads(out)
    from qfilt.tfio import decode_matrix

    ss = doc["state_space"]
    r = np.sqrt(2.0)
    np.testing.assert_allclose(decode_matrix(ss["A"], "A"), np.eye(2), atol=1e-12)
    np.testing.assert_allclose(decode_matrix(ss["B"], "B"), [[0, r], [-r, 0]], atol=1e-12)
    np.testing.assert_allclose(decode_matrix(ss["C"], "C"), [[0, -r], [r, 0]], atol=1e-12)
    assert doc["residuals"]["pass"]
    assert ss["sign_convention"] == "paper_negative_s"


def test_realize_static_passthrough(capsys):
    code, out, _ = run(capsys, "realize", str(DATA / "identity.json"), "--json")
    assert code == 0
    assert json.loads(out)["state_space"]["A"]["rows"] == 0


def test_realize_pair_violation(capsys):
    code, out, err = run(capsys, "realize", str(DATA / "pair_violation.json"), "--json")
    assert code == 1
    doc = json.loads(out)
    assert "eigenvalue pair condition" in doc["message"]
    assert doc["exit_code"] == 1


def test_slh_output(capsys):
    code, out, _ = run(capsys, "slh", UNSTABLE)
    assert code == 0
    assert "L1 = (-1.41421+0i) a1^dag" in out
    assert "H/hbar = 0" in out
    code, out, _ = run(capsys, "slh", UNSTABLE, "--json")
    doc = json.loads(out)
    assert doc["Omega"]["data"] == [[0.0, 0.0]] * 4


def test_synth_output(capsys):
    code, out, _ = run(capsys, "synth", UNSTABLE, "--gamma-aux", "100", "--json")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["oscillators"]) == 1 and doc["interactions"] == []
    assert doc["oscillators"][0]["pump_intensity_1"] == pytest.approx([-10.0, 0.0])


def test_synth_default_gamma_from_band(capsys):
    code, out, _ = run(capsys, "synth", UNSTABLE, "--stop", "2", "--json")
    assert json.loads(out)["aux_bandwidth"] == 200.0


def test_sweep_csv(capsys):
    code, out, _ = run(capsys, "sweep", TWO_MODE, "--stop", "0.3", "--points", "4")
    lines = out.strip().splitlines()
    assert lines[0] == "omega,re_signal,im_signal,abs2_signal,abs2_noise_a,abs2_noise_b,formula_ratio"
    assert len(lines) == 5
    assert lines[1].split(",")[0] == "0.000000000000e+00"


def test_sweep_from_transfer_matrix(capsys):
    code, out, _ = run(capsys, "sweep", UNSTABLE, "--stop", "1", "--points", "3", "--json")
    doc = json.loads(out)
    assert doc["model"]["gamma"] == 100.0
    assert abs(doc["rows"][0][3] - 1) < 1e-12


def test_losscurve_constant_density(capsys):
    code, out, _ = run(capsys, "losscurve", "--target", "0.1", "--start", "1", "--stop", "10", "--points", "10")
    assert code == 0
    rows = [l.split(",") for l in out.splitlines()[2:]]
    eps = [float(r[1]) for r in rows]
    dens = {r[2] for r in rows}
    assert all(b > a for a, b in zip(eps, eps[1:])) and len(dens) == 1
    assert out.startswith("# convention=amplitude")


def test_losscurve_lengths(capsys):
    assert run(capsys, "losscurve", "--start", "-1")[0] == 2
    code, out, _ = run(capsys, "losscurve", "--stop", "2", "--points", "3", "--json")
    rows = json.loads(out)["rows"]
    assert rows[0]["L_a"] == 0 and rows[0]["eps_a"] == 0


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"points": 5, "stop": 2.0, "tol": {"symplectic": 1e-6}, "json": True}))
    code, out, _ = run(capsys, "sweep", TWO_MODE, "--config", str(cfg), "--points", "3")
    assert len(json.loads(out)["rows"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert run(capsys, "check", UNSTABLE, "--config", str(bad))[0] == 2


def test_output_file(capsys, tmp_path):
    out = tmp_path / "o.json"
    code, stdout, _ = run(capsys, "realize", UNSTABLE, "--json", "-o", str(out))
    assert code == 0 and stdout == ""
    assert json.loads(out.read_text())["kind"] == "realize_result"


COMMANDS = [
    ["check", UNSTABLE],
    ["realize", UNSTABLE],
    ["slh", UNSTABLE],
    ["synth", UNSTABLE],
    ["sweep", TWO_MODE],
    ["losscurve", "--start", "1", "--stop", "4"],
]


@pytest.mark.parametrize("argv", COMMANDS, ids=[c[0] for c in COMMANDS])
@pytest.mark.parametrize("as_json", [False, True])
def test_determinism(argv, as_json, tmp_path, capsys):
    outs = []
    for k in range(2):
        p = tmp_path / f"{k}.out"
        extra = ["--json"] if as_json else []
        assert main(argv + extra + ["-o", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qfilt.cli", "check", UNSTABLE], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "result: pass" in proc.stdout
