import json

import numpy as np
import pytest

from ghostsim import __version__
from ghostsim.cli import main
from ghostsim.io import read_pgm, write_pgm16
from ghostsim.scenario import load_scenario

SMALL = """
experiment = "image"
seed = 1

[grid]
n = 32
pitch = 40e-6

[geometry]
f = 0.5
f_D = 0.5
wavelength = 810e-9

[source]
type = "spdc"
L = 1e-4
D = 1.9e-10
M = 1e-5
k_pump = 15514037.795505151
omega0 = 2325495762109695.5
bandwidth = 330693963535767.7

[mask1]
type = "disk"
radius = 4e-4

[mask1.phase]
random = 4

[mask2]
type = "letter"
"""


def _write(tmp_path, text, name="s.scn"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _artifacts(folder):
    return {p.name: p.read_bytes() for p in sorted(folder.iterdir())}


def test_unit_image_is_flat(tmp_path, capsys):
    assert main(["image", "--scenario", "unit_image.scn", "--out", str(tmp_path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["analytic"]["cv"] <= 1e-6
    assert metrics["version"] == __version__
    assert metrics["scenario_sha256"] == load_scenario("unit_image.scn").digest
    img = read_pgm(tmp_path / "image_analytic.pgm")
    assert np.all(img == 1.0)
    assert b"scenario_sha256" in (tmp_path / "image_bruteforce.pgm").read_bytes()[:200]


def test_aberration_scenario_passes_its_checks(tmp_path, capsys):
    assert main(["image", "--scenario", "aberration_cancel.scn", "--out", str(tmp_path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["bruteforce"]["phase_cancellation_residual"] <= 1e-3
    assert metrics["passed"] is True


def test_tau_dip_scenario(tmp_path, capsys):
    assert main(["interfere", "--scenario", "tau_dip.scn", "--out", str(tmp_path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["dip_width_error_steps"] <= 2
    lines = (tmp_path / "tau_scan.csv").read_text().splitlines()
    assert lines[0].startswith("# ghostsim")
    assert "tau,R,ReW,ImW" in lines
    assert len([l for l in lines if not l.startswith("#")]) == 102


def test_interfere_overrides(tmp_path, capsys):
    args = ["interfere", "--scenario", "tau_dip.scn", "--tau-min", "0", "--tau-max", "1.9e-13",
            "--steps", "11", "--out", str(tmp_path)]
    assert main(args) == 0
    csv = (tmp_path / "tau_scan.csv").read_text().splitlines()
    assert len([l for l in csv if not l.startswith(("#", "tau"))]) == 11


def test_correlate(tmp_path, capsys):
    assert main(["correlate", "--scenario", "correlator.scn", "--scan", "1.2e-4,5", "--out", str(tmp_path)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["points"] == 25
    assert metrics["phase_cancellation_residual"] == 0.0
    assert (tmp_path / "correlation.csv").read_text().count("\n") == 3 + 1 + 25


def test_lens_flags(tmp_path, capsys):
    scn = _write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert main(["image", "--scenario", scn, "--path", "bruteforce", "--branch1-lens", "off", "--out", str(out)]) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["branch1_lens"] is False
    assert metrics["bruteforce"]["cv"] <= 1e-6


def test_identical_runs_are_byte_identical(tmp_path, monkeypatch, capsys):
    scn = _write(tmp_path, SMALL.replace('experiment = "image"', 'experiment = "lens-study"'))
    outs = []
    for threads in ("1", "3", "8"):
        monkeypatch.setenv("GHOSTSIM_THREADS", threads)
        out = tmp_path / f"t{threads}"
        assert main(["lens-study", "--scenario", scn, "--both-off", "--out", str(out)]) == 0
        outs.append(_artifacts(out))
    assert outs[0] == outs[1] == outs[2]
    assert "lens_both_off.pgm" in outs[0]


@pytest.mark.parametrize("text,code", [
    (SMALL + "\nunknown_key = 1\n", 2),
    (SMALL.replace("n = 32", "n = 31"), 2),
    (SMALL + "\n[resources]\nmax_pairs = 1000\n", 4),
    (SMALL + "\n[checks]\n\"analytic.cv\" = 1e-9\n", 1),
])
def test_exit_codes(tmp_path, capsys, text, code):
    scn = _write(tmp_path, text)
    path = "both" if code == 4 else "analytic"
    assert main(["image", "--scenario", scn, "--path", path, "--out", str(tmp_path / "o")]) == code
    if code != 1:
        assert "ghostsim: error:" in capsys.readouterr().err


def test_physics_error_exit_code(tmp_path, capsys):
    write_pgm16(tmp_path / "t.pgm", np.ones((32, 32)))
    text = SMALL.replace('[mask2]\ntype = "letter"', '[mask2]\ntype = "file"\npath = "t.pgm"\nscale = 1.5')
    assert main(["image", "--scenario", _write(tmp_path, text), "--out", str(tmp_path)]) == 3


def test_missing_scenario(tmp_path, capsys):
    assert main(["image", "--scenario", str(tmp_path / "nope.scn")]) == 2


def test_interfere_needs_a_tau_range(tmp_path, capsys):
    assert main(["interfere", "--scenario", _write(tmp_path, SMALL), "--out", str(tmp_path)]) == 2


def test_list(capsys):
    assert main(["list"]) == 0
    assert "tau_dip.scn" in capsys.readouterr().out


def test_validate_subset_and_tamper(tmp_path, capsys):
    assert main(["validate", "--criteria", "3", "6", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["passed"] is True
    assert [c["number"] for c in report["criteria"]] == [3, 6]

    # negative control: a tolerance tighter than what the physics delivers must fail
    assert main(["validate", "--criteria", "6", "--tolerance", "6.C_spread=1e-12", "--out", str(tmp_path)]) == 1
    report = json.loads((tmp_path / "validation.json").read_text())
    assert report["failed"] == ["6.C_spread"]


def test_validate_rejects_unknown_tolerance(tmp_path, capsys):
    assert main(["validate", "--criteria", "3", "--tolerance", "nope=1", "--out", str(tmp_path)]) == 2
