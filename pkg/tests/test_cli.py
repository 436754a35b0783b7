import numpy as np
import pytest

from snapmatch.cli import main
from snapmatch.io import read_surface, read_table, surface_text


@pytest.fixture
def bundle(tmp_path):
    d = tmp_path / "bundle"
    assert main(["synth", "--out", str(d), "--shape", "sphere", "--n", "30",
                 "--snapshots", "2", "--magnitude", "0.4", "--seed", "3"]) == 0
    return d


def test_synth_writes_bundle(bundle):
    names = sorted(p.name for p in bundle.iterdir())
    assert names == ["problem.ini", "surface_0.mesh", "surface_1.mesh", "surface_2.mesh",
                     "truth_0.csv", "truth_1.csv", "truth_2.csv"]
    assert read_surface(bundle / "surface_0.mesh").has_mesh


def test_match_outputs(bundle, tmp_path):
    out = tmp_path / "m"
    assert main(["match", "--config", str(bundle / "problem.ini"), "--out", str(out),
                 "--max-iters", "6", "--frozen-u"]) == 0
    header, rows = read_table(out / "history.csv")
    assert header == ["iteration", "cost", "kin", "disp", "hausdorff_1", "hausdorff_2",
                      "consensus_gap", "seconds"]
    assert [int(r[0]) for r in rows] == list(range(1, len(rows) + 1))
    for k in range(3):
        assert len(read_surface(out / f"trajectory_{k}.csv")) == 30
    for k in range(2):
        h, r = read_table(out / f"controls_{k}.csv")
        assert h == ["alpha_x", "alpha_y", "alpha_z"] and len(r) == 30
    assert not (out / "controls_2.csv").exists()


def test_match_history_rows_equal_iterations(bundle, tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["match", "--config", str(bundle / "problem.ini"), "--out", str(out),
                 "--max-iters", "200"]) == 0
    printed = capsys.readouterr().out
    iterations = int(printed.split(" after ")[1].split()[0])
    _, rows = read_table(out / "history.csv")
    assert len(rows) == iterations


def test_targets_equal_initial(tmp_path, rng):
    pts = rng.normal(size=(15, 3))
    for name in ("x0.csv", "y1.csv"):
        (tmp_path / name).write_text(surface_text(pts))
    (tmp_path / "p.ini").write_text("[problem]\nsurfaces = x0.csv, y1.csv\n")
    assert main(["match", "--config", str(tmp_path / "p.ini")]) == 0
    _, rows = read_table(tmp_path / "out" / "history.csv")
    assert len(rows) <= 2 and float(rows[-1][3]) == 0.0
    assert main(["compare", "--config", str(tmp_path / "p.ini"), "--max-iters", "3"]) == 0
    _, rows = read_table(tmp_path / "out" / "compare.csv")
    assert [float(r[1]) for r in rows] == [0.0, 0.0]


def test_missing_surface_names_path(tmp_path, capsys):
    (tmp_path / "p.ini").write_text("[problem]\nsurfaces = gone.csv, y.csv\n")
    assert main(["match", "--config", str(tmp_path / "p.ini")]) == 4
    assert "gone.csv" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    (tmp_path / "p.ini").write_text("[problem]\nsurfaces = a.csv\n")
    assert main(["match", "--config", str(tmp_path / "p.ini")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_quantile_flag(bundle):
    assert main(["compare", "--config", str(bundle / "problem.ini"), "--quantile", "0"]) == 2


def test_numeric_failure_exit_code(bundle, tmp_path, monkeypatch):
    import snapmatch.osa as osa
    from snapmatch.errors import DivergenceError

    def broken(*args, **kwargs):
        raise DivergenceError("forced", iteration=1)

    monkeypatch.setattr(osa, "newton_minimize", broken)
    out = tmp_path / "m"
    assert main(["match", "--config", str(bundle / "problem.ini"), "--out", str(out)]) == 3
    assert (out / "history.csv").exists()


def test_compare_two_rows(bundle, tmp_path):
    out = tmp_path / "c"
    assert main(["compare", "--config", str(bundle / "problem.ini"), "--out", str(out),
                 "--max-iters", "5"]) == 0
    header, rows = read_table(out / "compare.csv")
    assert header == ["method", "robust_hausdorff", "kinetic_energy", "cpu_seconds", "iterations"]
    assert [r[0] for r in rows] == ["OSA", "GD-Armijo baseline"]
    assert all(np.isfinite(float(v)) for r in rows for v in r[1:])
    # the OSA row runs its fixed budget
    assert rows[0][4] == "5"
    for name in ("history_osa.csv", "history_gd.csv"):
        assert (out / name).exists()


def test_strain_from_match_dir(bundle, tmp_path):
    out = tmp_path / "m"
    assert main(["match", "--config", str(bundle / "problem.ini"), "--out", str(out),
                 "--max-iters", "3"]) == 0
    assert main(["strain", "--config", str(bundle / "problem.ini"), "--match-dir", str(out),
                 "--out", str(out)]) == 0
    header, rows = read_table(out / "strain.csv")
    assert header == ["vertex_index", "x", "y", "z", "SI"] and len(rows) == 30
    _, q = read_table(out / "strain_quantiles.csv")
    assert len(q) == 19


def test_strain_uniform_scale(tmp_path):
    mesh = tmp_path / "ref.mesh"
    mesh.write_text("4 2\n0 0 0\n1 0 0\n0 1 0\n1 1 0.5\n0 1 2\n1 3 2\n")
    ref = read_surface(mesh)
    (tmp_path / "def.csv").write_text(surface_text(1.2 * ref.points))
    assert main(["strain", "--reference", str(mesh), "--deformed", str(tmp_path / "def.csv"),
                 "--out", str(tmp_path)]) == 0
    _, rows = read_table(tmp_path / "strain.csv")
    np.testing.assert_allclose([float(r[4]) for r in rows], 0.2, atol=1e-12)
    assert main(["strain", "--reference", str(mesh), "--deformed", str(mesh),
                 "--out", str(tmp_path)]) == 0
    _, rows = read_table(tmp_path / "strain.csv")
    assert all(float(r[4]) == 0.0 for r in rows)


def test_strain_without_mesh(tmp_path, capsys):
    (tmp_path / "a.csv").write_text("x,y,z\n0,0,0\n1,0,0\n0,1,0\n")
    assert main(["strain", "--reference", str(tmp_path / "a.csv"),
                 "--deformed", str(tmp_path / "a.csv"), "--out", str(tmp_path)]) == 2
    assert "mesh" in capsys.readouterr().err


def test_module_entry_point(bundle):
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "snapmatch", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "match" in res.stdout
