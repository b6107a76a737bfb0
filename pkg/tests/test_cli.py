import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

import cli_cases
from slcalib import cli
from slcalib.cli import main

INPUTS = cli_cases.INPUTS


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


@pytest.mark.parametrize("name", sorted(cli_cases.CASES))
def test_golden_outputs(name, tmp_path):
    code, out = cli_cases.run_case(name, tmp_path)
    assert code == 0
    assert out.read_bytes() == (cli_cases.GOLDEN / name).read_bytes()
    manifest = cli_cases.GOLDEN / (name + ".manifest.json")
    if manifest.exists():
        assert (tmp_path / (name + ".manifest.json")).read_bytes() == manifest.read_bytes()


def test_family_eval_case_iii_matches_library(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["family-eval", "--family", "case-iii", "--params", str(INPUTS / "caseiii.params"),
                 "--y1=-1:1:3", "--y2", "0:2:2", "--t", "0:3:4", "--out", str(out)]) == 0
    head, data = read_csv(out)
    assert head == ["y1", "y2", "t", "re_z1", "im_z1", "re_z2", "im_z2", "re_z3", "im_z3"]
    assert data.shape == (24, 9)
    from slcalib import families as fm
    p = fm.CaseIIIParams(A=0.5, B=0.25j, D=0.4)
    ref = fm.caseiii_point(data[:, 0], data[:, 1], data[:, 2], p)
    assert np.abs(data[:, 3::2] + 1j * data[:, 4::2] - ref).max() < 1e-12
    rec = json.loads((tmp_path / "f.csv.manifest.json").read_text())
    assert rec["rows"] == 24 and rec["parameters"]["A.re"] == "0.5"
    assert "elapsed_seconds" not in rec


def test_k4_rows_repeat_after_two_pi(tmp_path):
    out = tmp_path / "k.csv"
    assert main(["family-eval", "--family", "k", "--k", "4", "--A3.re", "0.3", "--B1.im", "1",
                 "--B4.re", "-0.2", "--x=-1:1:3", "--y", "0:1:2",
                 "--t", f"0:{2 * math.pi!r}:2", "--out", str(out)]) == 0
    head, data = read_csv(out)
    assert head[:3] == ["x", "y", "t"]
    assert np.abs(data[0::2, 3:] - data[1::2, 3:]).max() < 1e-12


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    argv = ["family-eval", "--family", "case-iii", "--params", str(INPUTS / "caseiii.params"),
            "--y1", "0:1:2", "--y2", "0:1:2", "--t", "0:5:11"]
    main(argv + ["--out", str(tmp_path / "one.csv")])
    monkeypatch.setenv("SLCALIB_THREADS", "4")
    main(argv + ["--out", str(tmp_path / "four.csv")])
    assert (tmp_path / "one.csv").read_bytes() == (tmp_path / "four.csv").read_bytes()
    monkeypatch.setenv("SLCALIB_THREADS", "zero")
    assert main(argv + ["--out", str(tmp_path / "bad.csv")]) == 2


def test_evolve_case_i_gives_linear_z6(tmp_path, capsys):
    init = write(tmp_path, "i.init", "z4.1.re = 1\nz5.2.re = 1\nz1.1.re = 0\n")
    out = tmp_path / "e.csv"
    assert main(["evolve", "--system", "z", "--init", init, "--t1", "1", "--step", "0.01",
                 "--record-every", "10", "--out", str(out)]) == 0
    head, data = read_csv(out)
    col = head.index("re_z6_3")
    assert np.allclose(data[:, col], data[:, 0] / 2, atol=1e-14)
    assert "steps = 100" in capsys.readouterr().out


def test_evolve_canonical_case_iii(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["evolve", "--system", "z", "--init", str(INPUTS / "caseiii.init"), "--t1", "1",
                 "--record-every", "1000", "--out", str(out)]) == 0
    head, data = read_csv(out)
    last = data[-1]
    z1 = [complex(last[head.index(f"re_z1_{j}")], last[head.index(f"im_z1_{j}")]) for j in (1, 2, 3)]
    assert np.allclose(z1, [np.exp(1j), -1j * np.exp(-1j), 0], atol=1e-10)


def test_evolve_rejects_inadmissible_and_bad_integrator(tmp_path):
    out = str(tmp_path / "x.csv")
    assert main(["evolve", "--system", "z", "--init", str(INPUTS / "broken.init"), "--t1", "1",
                 "--out", out]) == 2
    assert main(["evolve", "--system", "z", "--init", str(INPUTS / "caseiii.init"), "--t1", "1",
                 "--method", "euler", "--out", out]) == 2


def test_validate_pass_and_fail(tmp_path):
    out = tmp_path / "v.txt"
    assert main(["validate", "--family", "case-iii", "--params", str(INPUTS / "caseiii.params"),
                 "--samples", "50", "--out", str(out)]) == 0
    assert "result = pass" in out.read_text()
    assert main(["validate", "--init", str(INPUTS / "broken.init"), "--samples", "20",
                 "--t-max", "1", "--out", str(out)]) == 1
    assert "result = fail" in out.read_text()
    assert main(["validate", "--samples", "5"]) == 2


def test_classify_and_normalize(tmp_path):
    out = tmp_path / "c.txt"
    assert main(["classify", "--init", str(INPUTS / "diagonal.init"), "--out", str(out)]) == 0
    assert out.read_text().startswith("case = iv\ndimension = 3\n")
    assert main(["normalize", "--init", str(INPUTS / "caseiii.init"), "--out", str(out)]) == 0
    text = out.read_text()
    assert "case = iii" in text and "z3 = 0.0,0.0 0.0,0.0 1.0,0.0" in text
    assert main(["normalize", "--init", str(INPUTS / "caseiii.init"), "--case", "iv",
                 "--out", str(out)]) == 2
    zero = write(tmp_path, "zero.init", "z1.1.re = 0\n")
    assert main(["normalize", "--init", zero, "--out", str(out)]) == 2


def test_periodicity_single_pair_and_errors(capsys):
    assert main(["periodicity", "--p", "2", "--q", "7"]) == 0
    assert capsys.readouterr().out.splitlines()[1] == "2,7,-15,7,8,13,56,120,105"
    assert main(["periodicity", "--p", "1", "--q", "2"]) == 2
    assert main(["periodicity", "--p", "1"]) == 2
    assert main(["periodicity", "--p", "1", "--q", "3", "--scan-qmax", "5"]) == 2


def test_mesh_flat_plane_obj():
    y = np.linspace(0, 1, 2)
    U, V, T = np.meshgrid(y, y, y, indexing="ij")
    phi = np.stack([U, V, T], axis=-1) + 0j
    text = cli.obj_text(phi, cli.parse_coords("re-re-re"), "plane")
    verts = np.array([list(map(float, ln.split()[1:])) for ln in text.splitlines() if ln.startswith("v ")])
    faces = [ln for ln in text.splitlines() if ln.startswith("f ")]
    assert len(verts) == 8 and len(faces) == 4
    assert np.allclose(verts, np.stack([U, V, T], axis=-1).reshape(-1, 3))
    flat = cli.obj_text(phi, cli.parse_coords("re1,im1,re3"), "plane")
    pts = np.array([list(map(float, ln.split()[1:])) for ln in flat.splitlines() if ln.startswith("v ")])
    assert np.all(pts[:, 1] == 0)


def test_mesh_bad_coords(tmp_path):
    assert main(["mesh", "--family", "case-iii", "--y1", "0:1:2", "--y2", "0:1:2", "--t", "0:1:2",
                 "--coords", "re1,re1,re2", "--out", str(tmp_path / "m.obj")]) == 2


def test_parameter_errors(tmp_path):
    grid = ["--y1", "0:1:2", "--y2", "0:1:2", "--t", "0:1:2", "--out", str(tmp_path / "o.csv")]
    assert main(["family-eval", "--family", "case-iii", "--Q.re", "1"] + grid) == 2
    assert main(["family-eval", "--family", "case-iii", "--A.re", "abc"] + grid) == 2
    assert main(["family-eval", "--family", "case-iii", "--x", "0:1:2"] + grid) == 2
    assert main(["family-eval", "--family", "k", "--k", "2"] + grid) == 2
    assert main(["family-eval", "--family", "case-iii", "--params", str(tmp_path / "missing")] + grid) == 2
    bad = write(tmp_path, "bad.params", "A.re 1\n")
    assert main(["family-eval", "--family", "case-iii", "--params", bad] + grid) == 2
    assert main(["bogus"]) == 2


def test_parse_helpers():
    assert np.allclose(cli.parse_axis("t", "0:1:3"), [0, 0.5, 1])
    assert np.allclose(cli.parse_axis("t", "2:2:1"), [2])
    for text in ("0:1", "1:0:3", "0:1:0", "0:1:x"):
        with pytest.raises(cli.InputError):
            cli.parse_axis("t", text)
    assert cli.parse_extra_flags(["--a", "1", "--b=2"]) == {"a": "1", "b": "2"}
    with pytest.raises(cli.InputError):
        cli.parse_extra_flags(["--a"])
    assert cli.fmt(0.1) == "0.1" and float(cli.fmt17(1 / 3)) == 1 / 3


def test_console_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "slcalib", "periodicity", "--p", "1", "--q", "3"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[1] == "1,3,-8,3,5,7,15,40,24"
