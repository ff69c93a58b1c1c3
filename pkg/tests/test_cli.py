import pytest

from stabfem.cli import main


def test_taus(capsys):
    assert main(["taus", "--h", "0.5", "--c1", "4", "--D", "1", "--U", "1", "--alpha", "10"]) == 0
    out = capsys.readouterr().out
    assert "tau1 = 0.058823529411764" in out and "tau2 = 1" in out
    assert "tau3 = " in out


def test_taus_bad_input(capsys):
    assert main(["taus", "--h", "0", "--mu", "1"]) == 2


def test_converge_writes_outputs(tmp_path, capsys):
    out, md = tmp_path / "t.csv", tmp_path / "t.md"
    code = main(["converge", "--case", "c", "--method", "sgs", "--meshes", "10,20",
                 "--out", str(out), "--markdown", str(md)])
    assert code == 0
    assert len(out.read_text().splitlines()) == 3
    assert "| 20 |" in md.read_text()


def test_invalid_case_exit_code():
    assert main(["converge", "--case", "nope", "--meshes", "10"]) == 2


def test_invalid_ladder_exit_code():
    assert main(["converge", "--meshes", "10,30"]) == 2


def test_unknown_flag_exit_code():
    assert main(["converge", "--frobnicate"]) == 2


def test_solver_failure_exit_code(tmp_path):
    out = tmp_path / "f.csv"
    code = main(["converge", "--case", "a", "--method", "sgs", "--meshes", "10,20", "--solver",
                 "bicgstab", "--max-iter", "1", "--out", str(out)])
    assert code == 1
    assert out.read_text().splitlines() == [out.read_text().splitlines()[0]]


def test_config_file_and_env(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = diffusion_dominated\nmethod = galerkin\nmeshes = 10\n")
    monkeypatch.setenv("STABFEM_METHOD", "sgs")
    assert main(["converge", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "case `diffusion_dominated`" in out and "## sgs" in out and "## galerkin" not in out


def test_solve_with_vtk(tmp_path, capsys):
    vtk = tmp_path / "s.vtk"
    assert main(["solve", "--case", "b", "-n", "6", "--vtk", str(vtk)]) == 0
    text = vtk.read_text()
    for name in ("u1", "u2", "p", "c_galerkin", "c_sgs"):
        assert f"SCALARS {name} double 1" in text
    assert "err_c_h1" in capsys.readouterr().out


def test_help_exit_code():
    assert main(["--help"]) == 0
