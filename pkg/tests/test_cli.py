import json

import numpy as np
import pytest

from heatcert import SCHEMA_VERSION
from heatcert.bundle import HermitianBundle, UnitaryConnection, EndomorphismField, dump_bundle
from heatcert.cli import EXIT_INPUT, EXIT_OK, EXIT_VIOLATION, main
from heatcert.graph import dump_graph, make_graph, path_graph, random_graph
from heatcert.heat import dump_kernel, kernel_from_semigroup, load_kernel
from heatcert.operators import assemble_laplacian


@pytest.fixture
def two_vertex_file(tmp_path):
    g = make_graph(["1", "2"], {"1": 1.0, "2": 1.0}, [("1", "2", 1.0)])
    path = tmp_path / "two.json"
    dump_graph(g, path)
    return str(path)


@pytest.fixture
def path_file(tmp_path):
    path = tmp_path / "path.json"
    dump_graph(path_graph(12), path)
    return str(path)


class TestGraphValidate:
    def test_valid_two_vertex_exit_zero(self, two_vertex_file, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["graph", "validate", "--graph", two_vertex_file,
                     "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["pass"] is True
        assert rep["schema_version"] == SCHEMA_VERSION

    def test_disconnected_exit_two(self, tmp_path):
        g = make_graph(["a", "b", "c"], {"a": 1, "b": 1, "c": 1},
                       [("a", "b", 1.0)])
        gpath = tmp_path / "g.json"
        dump_graph(g, gpath)
        assert main(["graph", "validate", "--graph", str(gpath)]) == EXIT_VIOLATION

    def test_missing_file_exit_one(self):
        assert main(["graph", "validate", "--graph", "/nonexistent.json"]) == EXIT_INPUT

    def test_malformed_json_exit_one(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["graph", "validate", "--graph", str(bad)]) == EXIT_INPUT


class TestHeat:
    def test_kernel_roundtrip(self, path_file, tmp_path):
        out = tmp_path / "k.json"
        assert main(["heat", "kernel", "--graph", path_file,
                     "--times", "0.5,1.0", "--out", str(out)]) == EXIT_OK
        k = load_kernel(out)
        assert k.times == (0.5, 1.0)

    def test_verify_clean_graph(self, path_file, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["heat", "verify", "--graph", path_file,
                     "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["axioms"]["pass"] and rep["rho_bound"]["pass"]

    def test_verify_corrupted_kernel_names_a2(self, tmp_path):
        g = path_graph(3)
        k = kernel_from_semigroup(assemble_laplacian(g), (0.5, 1.0))
        kernels = k.kernels.copy()
        kernels[0][0, 1] += 1e-3
        bad = type(k)(k.times, kernels, k.vertices, k.rho)
        kpath = tmp_path / "bad_kernel.json"
        dump_kernel(bad, kpath)
        out = tmp_path / "rep.json"
        assert main(["heat", "verify", "--kernel", str(kpath),
                     "--out", str(out)]) == EXIT_VIOLATION
        rep = json.loads(out.read_text())
        assert rep["axioms"]["A2_max_violation"] > 1e-4
        t, x, y = rep["axioms"]["A2_worst"]
        assert t == 0.5 and {x, y} == {"v0", "v1"}

    def test_minimal_monotone(self, path_file, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["heat", "minimal", "--graph", path_file,
                     "--exhaustion", "root=v0,radii=3,6,11",
                     "--times", "0.5,1.0", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["pass"] is True


class TestControl:
    def test_check_power_family(self, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["control", "check", "--family", "power", "--C", "1.0",
                     "--gamma", "1.0", "--q", "1.0", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["verdict"]["convergent"] is True

    def test_check_divergent_reported(self, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["control", "check", "--family", "power", "--gamma", "5.0",
                     "--q", "1.0", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["verdict"]["convergent"] is False

    def test_fit_graph_family(self, path_file, tmp_path):
        kpath = tmp_path / "k.json"
        main(["heat", "kernel", "--graph", path_file, "--out", str(kpath)])
        out = tmp_path / "rep.json"
        assert main(["control", "fit", "--kernel", str(kpath),
                     "--family", "graph", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["pass"] is True
        assert all(v == 1.0 for v in rep["F1"].values())


class TestDominate:
    def test_magnetic_path(self, tmp_path):
        g = path_graph(6)
        gpath = tmp_path / "g.json"
        dump_graph(g, gpath)
        bundle = HermitianBundle.trivial(g.vertices, 1)
        conn = UnitaryConnection.from_edge_phases(
            g, {(f"v{i}", f"v{i+1}"): 0.4 for i in range(5)})
        bpath = tmp_path / "b.json"
        dump_bundle(bpath, bundle, connection=conn)
        out = tmp_path / "rep.json"
        assert main(["dominate", "check", "--graph", str(gpath),
                     "--bundle", str(bpath), "--times", "0.1,1.0",
                     "--a", "1,2", "--trials", "5", "--seed", "3",
                     "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["pass"] is True
        names = {row["name"] for row in rep["ledger"]}
        assert "kato-domination-semigroup" in names
        assert "kato-domination-resolvent" in names


class TestCompactCertify:
    def test_scalar_potential_path(self, path_file, tmp_path):
        wpath = tmp_path / "w.json"
        wpath.write_text(json.dumps(
            {f"v{j}": 1.0 / (1.0 + j * j) for j in range(12)}))
        out = tmp_path / "rep.json"
        assert main(["compact", "certify", "--graph", path_file,
                     "--potential", str(wpath), "--decomp", "threshold:0.1",
                     "--a", "2.0", "--levels", "root=v0,radii=5,11",
                     "--times", "0.25,0.5,1.0", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["verdict"] == "hypotheses-verified"
        assert rep["pass"] is True


class TestDemo:
    def test_small_run(self, tmp_path):
        out = tmp_path / "rep.json"
        assert main(["demo", "coulomb-lattice", "--n", "40", "--kappa", "1.0",
                     "--theta", "0.3", "--seed", "1", "--out", str(out)]) == EXIT_OK
        rep = json.loads(out.read_text())
        assert rep["pass"] is True
        assert rep["compactness"]["verdict"] == "hypotheses-verified"

    def test_reports_byte_identical_for_same_seed(self, tmp_path):
        out1 = tmp_path / "r1.json"
        out2 = tmp_path / "r2.json"
        args = ["demo", "coulomb-lattice", "--n", "30", "--seed", "7"]
        assert main(args + ["--out", str(out1)]) == EXIT_OK
        assert main(args + ["--out", str(out2)]) == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()

    def test_seed_echoed(self, tmp_path):
        out = tmp_path / "rep.json"
        main(["demo", "coulomb-lattice", "--n", "30", "--seed", "42",
              "--out", str(out)])
        assert json.loads(out.read_text())["seed"] == 42


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert f"schema v{SCHEMA_VERSION}" in capsys.readouterr().out
