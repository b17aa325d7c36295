import csv
import subprocess
import sys

import numpy as np
import pytest

from halflap import io
from halflap.cli import run
from halflap.config import ConfigError, parse_ini
from halflap.grid import CylinderDomain, ScalarField, UniformGrid


def write_cfg(tmp_path, text):
    p = tmp_path / "exp.ini"
    p.write_text(text)
    return p


def test_field_dump_round_trip(tmp_path):
    d = CylinderDomain.build(2, 1.0, 0.25, base_shape="ball")
    rng = np.random.default_rng(0)
    fld = ScalarField(d.grid, np.where(d.mask, rng.standard_normal(d.grid.shape), 0.0), d.mask)
    io.dump_field(tmp_path / "f.field", fld)
    back = io.load_field(tmp_path / "f.field")
    assert back.grid == fld.grid
    assert np.array_equal(back.values, fld.values) and np.array_equal(back.mask, fld.mask)


def test_load_field_rejects_foreign_files(tmp_path):
    (tmp_path / "x.field").write_text("something else\n1\n")
    with pytest.raises(ValueError):
        io.load_field(tmp_path / "x.field")


def test_report_round_trip(tmp_path):
    io.write_report(tmp_path / "r.txt", {"a": 0.1, "b": 3, "c": True, "d": "x y"})
    assert io.read_report(tmp_path / "r.txt") == {"a": "0.10000000000000001", "b": "3", "c": "1",
                                                   "d": "x y"}


def test_csv_uses_lf_and_rejects_ragged_rows(tmp_path):
    io.write_csv(tmp_path / "t.csv", ("a", "b"), [(1, 2.5)])
    assert (tmp_path / "t.csv").read_bytes() == b"a,b\n1,2.5\n"
    with pytest.raises(ValueError):
        io.write_csv(tmp_path / "u.csv", ("a", "b"), [(1,)])


def test_config_rejects_unknown_keys_and_sections():
    with pytest.raises(ConfigError):
        parse_ini("[domain]\nradius = 3\n", "layer")
    with pytest.raises(ConfigError):
        parse_ini("[mesh]\nh = 3\n", "layer")
    with pytest.raises(ConfigError):
        parse_ini("[domain]\nradii = 4, 2.5\n", "energy-scan")
    with pytest.raises(ConfigError):
        parse_ini("[solver]\nresidual_tol = -1\n", "minimize")
    cfg = parse_ini("[hhalf]\neps = 0.25, 0.125\n[extend]\nh = 0.02\n", "hhalf")
    assert cfg.eps == [0.25, 0.125] and cfg.extend_h == 0.02


def test_energy_scan_end_to_end(tmp_path):
    assert run(["energy-scan", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "energy.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["R", "dirichlet", "potential", "total", "c_u"]
    assert len(rows) == 5
    rep = io.read_report(tmp_path / "energy_fit.txt")
    assert float(rep["a"]) > 0 and float(rep["r2"]) >= 0.98


def test_outputs_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, "[hhalf]\nh = 0.0078125\neps = 0.25, 0.125, 0.0625, 0.03125\n")
    for sub in ("a", "b"):
        assert run(["hhalf", "--config", str(cfg), "--out", str(tmp_path / sub), "--seed", "3"]) == 0
    for name in ("hhalf.csv", "hhalf_fit.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert run(["energy-scan", "--out", str(tmp_path / "c")]) == 0
    assert run(["energy-scan", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "c" / "energy.csv").read_bytes() == (tmp_path / "d" / "energy.csv").read_bytes()


def test_out_of_scope_eps_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[hhalf]\neps = 0.6, 0.25, 0.125, 0.0625\n")
    assert run(["hhalf", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("halflap: exit=2 reason=validation")


def test_unknown_key_and_bad_usage_exit_2(tmp_path):
    cfg = write_cfg(tmp_path, "[domain]\nhh = 0.1\n")
    assert run(["layer", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert run(["teleport"]) == 2


def test_non_convergence_exits_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[domain]\nR = 3\nh = 0.1\n[solver]\nmax_iter = 2\ninit = zero\n")
    assert run(["minimize", "--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "exit=3" in capsys.readouterr().err
    assert (tmp_path / "last_iterate.field").exists()


def test_trivial_saddle_exits_4(tmp_path):
    cfg = write_cfg(tmp_path, "[nonlinearity]\nname = allen-cahn\n[domain]\nR = 1\nL = 0.5\nh = 0.25\n")
    with pytest.warns(RuntimeWarning):
        assert run(["saddle", "--config", str(cfg), "--out", str(tmp_path)]) == 4


@pytest.mark.parametrize("sub", ["layer", "symmetry", "extend"])
def test_quick_subcommands_succeed(tmp_path, sub):
    text = {"layer": "[domain]\nR = 4\nh = 0.05\n",
            "symmetry": "[domain]\nn = 2\nR = 2\nh = 0.05\n",
            "extend": "[extend]\nhalf_width = 5\nh = 0.02\nlambda_max = 1\n"}[sub]
    assert run([sub, "--config", str(write_cfg(tmp_path, text)), "--out", str(tmp_path)]) == 0


def test_minimize_writes_solution(tmp_path):
    cfg = write_cfg(tmp_path, "[domain]\nR = 4\nh = 0.1\nradii = 2.5, 3, 3.5, 4\n[solver]\ninit = data\n")
    assert run(["minimize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert io.read_report(tmp_path / "solution_report.txt")["status"] == "converged"
    assert io.load_field(tmp_path / "solution.field").grid.ndim == 2


def test_selftest_via_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "halflap.cli", "selftest", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "FAIL" not in proc.stdout


def test_inline_comments_are_ignored():
    cfg = parse_ini("[nonlinearity]\nname = allen-cahn   ; the cubic\n[domain]\nh = 0.1 # coarse\n", "layer")
    assert cfg.nonlinearity == "allen-cahn" and cfg.h == 0.1
