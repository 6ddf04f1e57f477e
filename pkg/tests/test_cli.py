import json
import subprocess

import pytest

from conftest import small_pair
from ims.cli import main
from ims.extract import read_map
from ims.mesh.io import write_obj
from ims.pipeline import read_section
from ims.shapes import disk, torus


@pytest.fixture(scope="module")
def meshes(tmp_path_factory):
    d = tmp_path_factory.mktemp("meshes")
    A, B = small_pair(100, 120, seed=3)
    Ac, Bc = small_pair(50, 60, seed=3)
    paths = {}
    for name, m in (("a", A), ("b", B), ("ac", Ac), ("bc", Bc)):
        paths[name] = str(d / ("%s.obj" % name))
        write_obj(paths[name], m.vertices, m.faces)
    paths["torus"] = str(d / "torus.obj")
    write_obj(paths["torus"], *torus())
    paths["disk"] = str(d / "disk.obj")
    V, F = disk(rings=4, sectors=10)
    write_obj(paths["disk"], V, F)
    paths["disk2"] = str(d / "disk2.obj")
    write_obj(paths["disk2"], V * [1.2, 0.9, 1.0], F)
    return paths


@pytest.fixture(scope="module")
def solved(meshes, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    code = main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--anneal", "10,100",
                 "--out", str(out)])
    return code, out


def test_solve_writes_outputs(solved):
    code, out = solved
    assert code == 0
    for name in ("map_ab.txt", "map_ba.txt", "overlay.txt", "edges_a.txt", "edges_b.txt", "section.imsz",
                 "trace.csv", "distortion.csv", "summary.json", "transfer_texture.obj", "transfer_geometry.obj"):
        assert (out / name).is_file(), name
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schedule"] == [10.0, 100.0]
    assert summary["sandwich_ok"] and summary["distortion_ba"]["sandwich_ok"]
    assert summary["max_zero_residual"] < 1e-8
    f, b, multi, n_target = read_map(out / "map_ab.txt")
    assert len(f) == 100 and n_target == 120
    assert f.max() < 2 * 120 - 4
    assert read_section(out / "section.imsz").shape == (100, 120)


def test_solve_prints_summary(meshes, tmp_path, capsys):
    assert main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--out", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert set(printed) == {"multi_zero_percent_ab", "multi_zero_percent_ba", "graph_area", "sandwich_ok"}


def test_extract_reproduces_maps(meshes, solved, tmp_path):
    _, out = solved
    code = main(["extract", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--section",
                 str(out / "section.imsz"), "--out", str(tmp_path)])
    assert code == 0
    for name in ("map_ab.txt", "map_ba.txt", "overlay.txt"):
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes()


def test_solve_is_deterministic(meshes, solved, tmp_path):
    _, out = solved
    code = main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--anneal", "10,100",
                 "--out", str(tmp_path)])
    assert code == 0
    for name in ("map_ab.txt", "map_ba.txt", "section.imsz"):
        assert (out / name).read_bytes() == (tmp_path / name).read_bytes()


def test_extract_truncated_section_is_input_error(meshes, solved, tmp_path):
    _, out = solved
    bad = tmp_path / "bad.imsz"
    bad.write_bytes((out / "section.imsz").read_bytes()[:-5])
    code = main(["extract", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--section", str(bad),
                 "--out", str(tmp_path)])
    assert code == 2


def test_extract_wrong_meshes_is_input_error(meshes, solved, tmp_path):
    _, out = solved
    code = main(["extract", "--mesh-a", meshes["ac"], "--mesh-b", meshes["b"], "--section",
                 str(out / "section.imsz"), "--out", str(tmp_path)])
    assert code == 2


def test_torus_is_topology_error(meshes, tmp_path, capsys):
    code = main(["solve", "--mesh-a", meshes["torus"], "--mesh-b", meshes["b"], "--out", str(tmp_path)])
    assert code == 3
    assert "genus" in capsys.readouterr().err


def test_bad_arguments_are_input_errors(meshes, tmp_path):
    base = ["solve", "--mesh-b", meshes["b"], "--out", str(tmp_path)]
    assert main(base + ["--mesh-a", str(tmp_path / "missing.obj")]) == 2
    assert main(base + ["--mesh-a", meshes["a"], "--anneal", "100,abc"]) == 2
    assert main(base + ["--mesh-a", meshes["a"], "--anneal", "100,10"]) == 2
    assert main(base + ["--mesh-a", meshes["a"], "--sigma-a", "-1"]) == 2
    assert main(base + ["--mesh-a", meshes["a"], "--coarse-a", meshes["ac"]]) == 2
    lm = tmp_path / "lm.txt"
    lm.write_text("0 500\n")
    assert main(base + ["--mesh-a", meshes["a"], "--landmarks", str(lm)]) == 2


def test_check_passes_on_good_meshes(meshes, capsys):
    assert main(["check", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"]]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
    assert any("FEM reduction" in l for l in lines)
    assert any("gradient" in l for l in lines)


def test_check_flags_torus(meshes, capsys):
    assert main(["check", "--mesh-a", meshes["torus"]]) == 3
    assert "FAIL" in capsys.readouterr().out


@pytest.mark.parametrize("connection", ["default", "spin"])
def test_two_level_solve(meshes, tmp_path, connection):
    code = main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--coarse-a", meshes["ac"],
                 "--coarse-b", meshes["bc"], "--connection", connection, "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["vertices"] == [100, 120]
    assert "coarse" in summary["timings"]
    assert summary["multi_zero_percent_ab"] < 5


def test_random_init_and_no_idt(meshes, tmp_path):
    code = main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--random-init", "--seed", "4",
                 "--no-idt", "--anneal", "10,100", "--out", str(tmp_path)])
    assert code == 0
    assert json.loads((tmp_path / "summary.json").read_text())["sandwich_ok"]


def test_disks_are_filled_and_boundaries_pinned(meshes, tmp_path):
    code = main(["solve", "--mesh-a", meshes["disk"], "--mesh-b", meshes["disk2"], "--out", str(tmp_path)])
    assert code == 0
    f, b, multi, n_target = read_map(tmp_path / "map_ab.txt")
    # maps cover the filled meshes: one extra vertex per boundary loop
    assert len(f) == 1 + 10 * 10 + 1


def test_init_map_file(meshes, solved, tmp_path):
    _, out = solved
    f, b, *_ = read_map(out / "map_ab.txt")
    init = tmp_path / "init.txt"
    init.write_text("".join("%d %.17g %.17g %.17g\n" % (ff, *bb) for ff, bb in zip(f, b)))
    code = main(["solve", "--mesh-a", meshes["a"], "--mesh-b", meshes["b"], "--init-map", str(init),
                 "--out", str(tmp_path / "o")])
    assert code == 0


def test_console_script(meshes):
    r = subprocess.run(["ims", "check", "--mesh-a", meshes["a"]], capture_output=True, text=True)
    assert r.returncode == 0
    r = subprocess.run(["ims", "solve", "--mesh-a", meshes["a"]], capture_output=True, text=True)
    assert r.returncode == 2
