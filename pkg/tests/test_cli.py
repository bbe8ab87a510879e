import csv
import json
import subprocess
import sys

import pytest

from fluctlim import cli

MOMENTS = {"kind": "moments", "state": "fock:2", "lambda": 1.0,
           "Ms": {"from": 16, "to": 1024},
           "observable": [{"coef": [1, 0], "word": "ad a"}]}


def write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, cfg, *extra, out="out"):
    path = write(tmp_path, cfg)
    return cli.main(["run", str(path), "--output", str(tmp_path / out), *extra])


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestMoments:
    def test_minimal_config(self, tmp_path, capsys):
        assert run(tmp_path, MOMENTS) == 0
        rows = read_rows(tmp_path / "out" / "results.csv")
        assert rows[0] == cli.COLUMNS
        assert len(rows) == 1 + 1009
        first = dict(zip(rows[0], rows[1]))
        assert first["M"] == "16" and first["two_j"] == "16" and first["status"] == "ok"
        assert float(first["abs_error"]) == pytest.approx(2 / 16, abs=1e-12)
        out = capsys.readouterr().out
        assert out.startswith("PASS") and "slope=-1.0000" in out

    def test_manifest(self, tmp_path):
        run(tmp_path, MOMENTS)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"] == MOMENTS
        assert manifest["config_sha256"] == cli.config_hash(manifest["config"])
        assert manifest["passed"] is True and manifest["error"] is None
        assert manifest["row_status"] == {"ok": 1009}
        assert manifest["version"]

    def test_lambda_zero_is_config_error(self, tmp_path, capsys):
        assert run(tmp_path, dict(MOMENTS, **{"lambda": 0})) == 1
        err = capsys.readouterr().err
        assert "config_error" in err and "(0, 1]" in err
        assert not (tmp_path / "out" / "manifest.json").exists()

    def test_tolerance_failure_exit_code(self, tmp_path):
        cfg = dict(MOMENTS, tolerances={"slope": -2.0, "slope_tol": 0.1})
        assert run(tmp_path, cfg) == 2
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["passed"] is False

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        cfg = dict(MOMENTS, state="fock:5", **{"lambda": 0.5, "Ms": [2, 4, 6, 8, 10]})
        assert run(tmp_path, cfg) == 3
        assert "projection_annihilates" in capsys.readouterr().err

    def test_dmax_from_config(self, tmp_path, capsys):
        cfg = dict(MOMENTS, state="thermal:2:60", D_max=16, Ms=[100, 200, 300, 400])
        assert run(tmp_path, cfg) == 3
        assert "leakage" in capsys.readouterr().err

    def test_dmax_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FLUCTLIM_DMAX", "16")
        cfg = dict(MOMENTS, state="thermal:2:60", Ms=[100, 200, 300, 400])
        assert run(tmp_path, cfg) == 3


class TestDynamics:
    CFG = {"kind": "dynamics", "state": "superposition:1,1", "lambda": 0.5,
           "Ms": {"from": 16, "to": 512}, "observable": "a",
           "hamiltonian": [[0, 0], [0, 0], [1, 0], [0, 0]], "times": [0.01, 0.02]}

    def test_two_reports(self, tmp_path, capsys):
        assert run(tmp_path, self.CFG) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2 and all(ln.startswith("PASS") for ln in lines)

    def test_non_selfadjoint_hamiltonian(self, tmp_path):
        cfg = dict(self.CFG, hamiltonian=[[0, 1], [0, 0], [1, 0], [0, 1]])
        assert run(tmp_path, cfg) == 1

    def test_time_out_of_range(self, tmp_path):
        assert run(tmp_path, dict(self.CFG, times=[0.5])) == 1


class TestBoundsAndDecompose:
    def test_bounds(self, tmp_path, capsys):
        cfg = {"kind": "bounds", "suites": ["beta", "hermite"]}
        assert run(tmp_path, cfg) == 0
        rows = read_rows(tmp_path / "out" / "results.csv")
        assert [r[1] for r in rows[1:]] == ["beta_bound", "hermite_growth"]
        assert float(rows[1][10]) >= 0
        assert "worst slack" in capsys.readouterr().out

    def test_bound_parameters(self, tmp_path):
        cfg = {"kind": "bounds", "suites": ["tail"],
               "params": {"tail": {"c": [[0, 0.5], [0, 0], [0, 0], [0, -0.5]], "t": 0.005,
                                   "Ms": [32, "inf"], "S": [[-1]]}}}
        assert run(tmp_path, cfg) == 0

    def test_unknown_suite(self, tmp_path):
        assert run(tmp_path, {"kind": "bounds", "suites": ["nope"]}) == 1

    def test_decompose(self, tmp_path):
        cfg = {"kind": "decompose", "Ms": [2, 3], "lambdas": [0, 1], "count": 2, "max_degree": 2}
        assert run(tmp_path, cfg, "--seed", "7") == 0
        rows = read_rows(tmp_path / "out" / "results.csv")
        assert len(rows) == 1 + 2 * 2 * 2 * 7
        assert {r[-1] for r in rows[1:]} == {"pass"}

    def test_seed_changes_states(self, tmp_path):
        cfg = {"kind": "decompose", "Ms": [3], "lambdas": [0.5], "count": 1, "max_degree": 1}
        run(tmp_path, cfg, "--seed", "1", out="a")
        run(tmp_path, cfg, "--seed", "2", out="b")
        assert (tmp_path / "a" / "results.csv").read_text() != (tmp_path / "b" / "results.csv").read_text()


class TestRunner:
    def test_refuses_non_empty_output(self, tmp_path):
        (tmp_path / "out").mkdir()
        (tmp_path / "out" / "keep.txt").write_text("x")
        assert run(tmp_path, MOMENTS) == 1
        assert run(tmp_path, MOMENTS, "--force") == 0

    def test_output_from_config(self, tmp_path):
        cfg = dict(MOMENTS, output=str(tmp_path / "cfg_out"))
        assert cli.main(["run", str(write(tmp_path, cfg))]) == 0
        assert (tmp_path / "cfg_out" / "results.csv").exists()

    def test_missing_output(self, tmp_path):
        assert cli.main(["run", str(write(tmp_path, MOMENTS))]) == 1

    @pytest.mark.parametrize("bad", ["{not json", json.dumps({"kind": "other"}),
                                     json.dumps(dict(MOMENTS, Ms=[]))])
    def test_bad_configs(self, tmp_path, bad):
        path = tmp_path / "c.json"
        path.write_text(bad)
        assert cli.main(["run", str(path), "--output", str(tmp_path / "o")]) == 1

    def test_byte_identical_across_threads(self, tmp_path):
        cfg = {"kind": "dynamics", "state": "coherent:0.3,0.1", "lambda": 0.75,
               "Ms": {"from": 16, "to": 300}, "observables": ["a", "ad a", [{"word": "q q"}]],
               "hamiltonian": [[0.1, 0.2], [0.3, 0], [0.5, 0], [0.1, -0.2]], "times": [0.02]}
        run(tmp_path, cfg, "--threads", "1", out="one")
        run(tmp_path, cfg, "--threads", "8", out="eight")
        one = (tmp_path / "one" / "results.csv").read_bytes()
        assert one == (tmp_path / "eight" / "results.csv").read_bytes()

    def test_module_entry_point(self, tmp_path):
        path = write(tmp_path, {"kind": "bounds", "suites": ["beta"]})
        proc = subprocess.run([sys.executable, "-m", "fluctlim", "run", str(path),
                               "--output", str(tmp_path / "o")], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.startswith("PASS bounds beta_bound")
