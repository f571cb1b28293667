import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import pytest

from densramsey.cli import run
from densramsey.io import read_grid, read_tree


@pytest.fixture
def cli(capsys):
    def call(*argv):
        code = run([str(a) for a in argv])
        out, err = capsys.readouterr()
        return code, out, err

    return call


def gen(cli, tmp_path, name, *argv):
    path = tmp_path / name
    code, _, _ = cli("gen", *argv, "--out", path)
    assert code == 0
    return path


def test_bounds_tmap_prints_64(cli):
    code, out, _ = cli("bounds", "tmap", "--families", "fixed:2", "--eps", "1/2")
    assert (code, out) == (0, "64\n")


def test_bounds_gowers_tower(cli):
    code, out, _ = cli("bounds", "sz", "--k", "3", "--eta", "1/2", "--sz", "gowers")
    assert code == 0 and out == "(A2^3 (A2^2 12))\n"
    code, out, _ = cli("bounds", "fc", "--delta", "1", "--ms", "2", "--json")
    data = json.loads(out)
    assert data["value"] == 1024 and data["compare"] == "less"


def test_bounds_theta_values(cli):
    assert cli("bounds", "theta1", "--k", "2", "--eta", "1", "--sz", "exact")[1] == "1/6\n"
    assert cli("bounds", "theta2", "--families", "fixed:1", "--eps", "1")[1] == "1/16\n"
    assert cli("bounds", "vdelta", "--families", "fixed:2", "--delta", "1")[1] == "1024\n"


def test_gen_tree_counts_and_determinism(cli, tmp_path):
    a = gen(cli, tmp_path, "a.json", "tree", "--seed", 1, "--b", 2, "--height", 4, "--density", "3/4")
    b = gen(cli, tmp_path, "b.json", "tree", "--seed", 1, "--b", 2, "--height", 4, "--density", "3/4")
    assert a.read_bytes() == b.read_bytes()
    A = read_tree(a)
    assert [A.count(n) for n in range(4)] == [math.ceil(Fraction(3, 4) * 2**n) for n in range(4)]
    c = gen(cli, tmp_path, "c.json", "tree", "--seed", 2, "--b", 2, "--height", 4, "--density", "3/4")
    assert c.read_bytes() != a.read_bytes()


def test_gen_grid_is_dense(cli, tmp_path):
    path = gen(cli, tmp_path, "g.json", "grid", "--seed", 5, "--axes", "3,4,2", "--density", "1/2")
    fam = read_grid(path)
    assert fam.violations() == []
    assert all(fam.sets[l].count() == math.ceil(math.prod(fam.dims[:l]) / 2) for l in fam.L)


def test_gen_space(cli, tmp_path):
    path = gen(cli, tmp_path, "s.json", "space", "--seed", 3, "--atoms", 6, "--events", 5, "--density", "2/3")
    data = json.loads(path.read_text())
    assert data["weights"] == ["1/6"] * 6
    assert all(len(v) == 4 for v in data["events"].values())


def test_gen_unsatisfiable_density(cli):
    code, _, err = cli("gen", "tree", "--seed", 1, "--density", "3/2")
    assert code == 2 and "error" in err


def test_malformed_inputs(cli, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"b": 2,\n  oops}')
    code, _, err = cli("tree", "density", "--set-file", bad)
    assert code == 1 and "bad.json:2:" in err
    assert cli("nonsense")[0] == 1
    assert cli("bounds", "tmap", "--eps", "0.5")[0] == 1
    assert cli("--jobs", 0, "bounds", "tmap")[0] == 1


def test_tree_and_convolution(cli, tmp_path):
    path = gen(cli, tmp_path, "t.json", "tree", "--seed", 4, "--height", 4, "--density", "1/2")
    code, out, _ = cli("tree", "density", "--set-file", path)
    assert code == 0 and json.loads(out)["fw_density"] == "5/8"  # level 0 rounds up to its single node
    code, out, _ = cli("convolution", "check", "--levels", "1,3", "--set-file", path)
    data = json.loads(out)
    assert code == 0 and data["averaging_lhs"] == data["averaging_rhs"]
    assert cli("convolution", "check", "--levels", "1,7", "--set-file", path)[0] == 2


def test_families(cli):
    code, out, _ = cli("families", "b", "--family", "fixed:2", "--eps", "1/2")
    data = json.loads(out)
    assert code == 0 and data["b_exact"] == 3 and data["b_upper"] == 4
    code, out, _ = cli("families", "members", "--family", "ap:3", "--lo", 1, "--hi", 5)
    assert sorted(json.loads(out)["members"]) == [[1, 2, 3], [1, 3, 5], [2, 3, 4], [3, 4, 5]]


def test_fw_certificates_roundtrip(cli, tmp_path):
    tree = gen(cli, tmp_path, "t.json", "tree", "--seed", 7, "--height", 5, "--density", "3/4")
    for action, extra in (("extract", ["--k", 2]), ("ufw", ["--k", 2, "--levels", "0,2,4"]),
                          ("drive", ["--delta", "3/4", "--rounds", 2])):
        cert = tmp_path / f"{action}.json"
        code, _, _ = cli("fw", action, "--set-file", tree, *extra, "--out", cert)
        if code == 3:
            assert action == "drive"
        else:
            assert code == 0
        assert cli("certify", "--file", cert)[0] == 0
        assert cli("certify", "--file", cert, "--input-file", tree)[0] == 0
        assert cli("fw", "verify", "--file", cert)[0] == 0


def test_fw_drive_paper_mode_unavailable(cli, tmp_path):
    tree = gen(cli, tmp_path, "t.json", "tree", "--seed", 1, "--height", 4, "--density", "1")
    assert cli("fw", "drive", "--set-file", tree, "--delta", "1", "--mode", "paper")[0] == 3


def test_tampered_and_mismatched_certificates(cli, tmp_path):
    tree = gen(cli, tmp_path, "t.json", "tree", "--seed", 1, "--height", 4, "--density", "1")
    other = gen(cli, tmp_path, "o.json", "tree", "--seed", 2, "--height", 4, "--density", "1/2")
    cert = tmp_path / "c.json"
    assert cli("fw", "extract", "--set-file", tree, "--k", 3, "--out", cert)[0] == 0
    code, out, _ = cli("certify", "--file", cert, "--input-file", other)
    assert code == 4 and json.loads(out)["valid"] is False
    data = json.loads(cert.read_text())
    data["payload"]["level_set"]["step"] = 2
    cert.write_text(json.dumps(data))
    assert cli("certify", "--file", cert)[0] == 4
    assert cli("fw", "verify", "--file", cert)[0] == 4
    data["payload"]["level_set"]["step"] = 1
    data["inputs"]["tree"]["levels"][0] = "00"
    cert.write_text(json.dumps(data))
    code, out, _ = cli("certify", "--file", cert)
    assert code == 4 and any("digest" in p for p in json.loads(out)["problems"])


def test_grid_extract_full_grid_all_least(cli, tmp_path):
    grid = gen(cli, tmp_path, "g.json", "grid", "--seed", 1, "--axes", "3,4", "--density", "1")
    cert = tmp_path / "c.json"
    assert cli("grid", "extract", "--grid-file", grid, "--families", "fixed:2", "--out", cert)[0] == 0
    assert json.loads(cert.read_text())["payload"]["I"] == [[1, 2], [1, 2]]
    assert cli("certify", "--file", cert, "--input-file", grid)[0] == 0


def test_grid_drive_certificate(cli, tmp_path):
    grid = gen(cli, tmp_path, "g.json", "grid", "--seed", 1, "--axes", "2,2,2,2", "--density", "1")
    cert = tmp_path / "c.json"
    code, _, _ = cli("grid", "drive", "--grid-file", grid, "--families", "fixed:1", "--rounds", 2, "--out", cert)
    assert code == 0
    assert cli("certify", "--file", cert)[0] == 0


def test_measure_block_certificate(cli, tmp_path):
    space = tmp_path / "s.json"
    events = {str(l): list(range(8)) if l <= 5 else list(range(8, 16)) for l in range(1, 31)}
    space.write_text(json.dumps({"weights": ["1/16"] * 16, "events": events}))
    cert = tmp_path / "c.json"
    assert cli("measure", "block", "--space-file", space, "--k", 2, "--eta", "1/2", "--out", cert)[0] == 0
    assert json.loads(cert.read_text())["payload"]["rounds"] == 2
    assert cli("certify", "--file", cert, "--input-file", space)[0] == 0


def test_jobs_does_not_change_output(cli, tmp_path):
    tree = gen(cli, tmp_path, "t.json", "tree", "--seed", 9, "--height", 5, "--density", "3/4")
    outs = [cli("--jobs", j, "fw", "extract", "--set-file", tree, "--k", 2)[1] for j in (1, 8)]
    assert outs[0] == outs[1]
    outs = [cli("fw", "extract", "--set-file", tree, "--k", 2, "--jobs", j)[1] for j in (1, 8)]
    assert outs[0] == outs[1]


def test_bit_budget_environment(tmp_path):
    def fc(budget):
        env = dict(os.environ, RF_BIT_BUDGET=str(budget))
        proc = subprocess.run([sys.executable, "-m", "densramsey", "bounds", "fc", "--delta", "1", "--ms", "2"],
                              capture_output=True, text=True, env=env, cwd=tmp_path)
        assert proc.returncode == 0, proc.stderr
        return proc.stdout.strip()

    assert fc(4096) == "1024"
    assert fc(8).startswith("(")
