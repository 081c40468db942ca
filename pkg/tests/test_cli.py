import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pqdual import __version__
from pqdual.cli import fixture_specs, main


@pytest.fixture
def fx(tmp_path):
    assert main(["fixtures", "--dir", str(tmp_path), "--quiet"]) == 0
    return tmp_path


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


class TestFixtures:
    def test_written(self, fx):
        assert sorted(p.name for p in fx.iterdir()) == sorted(fixture_specs())


class TestEval:
    def test_ball_support(self, fx, capsys):
        code, out, _ = run(["eval", "support", str(fx / "disk.json"), str(fx / "directions2.json"),
                            "--no-meta"], capsys)
        assert code == 0
        np.testing.assert_allclose(out["values"], 1.0, rtol=1e-15)
        assert "meta" not in out

    def test_gauss_indices(self, fx, capsys):
        dirs = fx / "d.json"
        dirs.write_text("[[1, 0.1], [0.1, 1], [-1, 0.2], [0.3, -1]]")
        code, out, _ = run(["eval", "gauss", str(fx / "square.json"), str(dirs)], capsys)
        assert code == 0 and out["values"] == [0, 1, 2, 3]
        assert out["meta"]["version"] == __version__

    @pytest.mark.parametrize("body", ["square.json", "cross.json", "ellipse.json", "slab.json"])
    def test_polar_check(self, fx, capsys, body):
        code, out, _ = run(["eval", "polar-check", str(fx / body), str(fx / "directions2.json")], capsys)
        assert code == 0
        assert max(abs(v) for v in out["values"]) <= 1e-12

    def test_radial(self, fx, capsys):
        code, out, _ = run(["eval", "radial", str(fx / "square.json"), str(fx / "directions2.json")],
                           capsys)
        assert out["values"][2] == pytest.approx(2 ** 0.5)

    def test_gauss_needs_polytope(self, fx, capsys):
        code, _, err = run(["eval", "gauss", str(fx / "disk.json"), str(fx / "directions2.json")], capsys)
        assert code == 2 and "polytopal" in err

    def test_malformed_json(self, fx, capsys):
        bad = fx / "bad.json"
        bad.write_text('{"type": "ball",')
        code, _, err = run(["eval", "support", str(bad), str(fx / "directions2.json")], capsys)
        assert code == 2 and "line 1" in err

    def test_missing_file(self, fx, capsys):
        code, _, _ = run(["eval", "support", str(fx / "nope.json"), str(fx / "directions2.json")], capsys)
        assert code == 2


class TestMeasure:
    def test_square(self, fx, capsys):
        code, out, err = run(["measure", "--body", str(fx / "square.json"), "--p", "0", "--q", "2"],
                             capsys)
        assert code == 0
        assert [a["mass"] for a in out["atoms"]] == pytest.approx([1.0] * 4, rel=1e-14)
        assert out["total_mass"] == pytest.approx(4.0, rel=1e-14)
        assert out["dual_quermass"]["value"] == pytest.approx(out["total_mass"], rel=1e-14)
        assert "total mass: 4" in err

    def test_cube(self, fx, capsys):
        code, out, _ = run(["measure", "--body", str(fx / "cube.json"), "--q-body", str(fx / "ball3.json"),
                            "--p", "0", "--q", "3"], capsys)
        assert code == 0
        assert [a["mass"] for a in out["atoms"]] == pytest.approx([4 / 3] * 6, rel=1e-12)
        assert out["total_mass"] == pytest.approx(8.0, rel=1e-12)

    def test_smooth_body_rejected(self, fx, capsys):
        code, _, _ = run(["measure", "--body", str(fx / "disk.json"), "--p", "0", "--q", "2"], capsys)
        assert code == 2


class TestQuermass:
    def test_dual_default_q(self, fx, capsys):
        code, out, _ = run(["quermass", "--kind", "dual", "--body", str(fx / "square.json")], capsys)
        assert code == 0 and out["value"] == pytest.approx(4.0, rel=1e-14)
        assert out["error_estimate"] >= 0

    def test_lp(self, fx, capsys):
        code, out, _ = run(["quermass", "--kind", "lp", "--body", str(fx / "square.json"),
                            "--n-body", str(fx / "ellipse.json"), "--p", "2"], capsys)
        assert out["value"] == pytest.approx(10.0, rel=1e-14)

    def test_routes(self, fx, capsys):
        base = ["quermass", "--body", str(fx / "square.json"), "--n-body", str(fx / "ellipse.json"),
                "--q-body", str(fx / "disk.json"), "--p", "1.5", "--q", "1.2", "--no-meta"]
        _, a, _ = run(base, capsys)
        _, b, _ = run(base + ["--route", "measure"], capsys)
        assert a["value"] == pytest.approx(b["value"], rel=1e-12)


class TestCheckIneq:
    def test_empty(self, capsys):
        code, out, _ = run(["check-ineq", "--theorem", "5.1", "--cases", "0"], capsys)
        assert code == 0
        assert out["groups"] == {} and out["persistent_violations"] == 0

    def test_small_campaign_with_csv(self, tmp_path, capsys):
        path = tmp_path / "slack.csv"
        code, out, _ = run(["check-ineq", "--cases", "16", "--seed", "3", "--emit-csv", str(path),
                            "--quiet"], capsys)
        assert code == 0 and "rows" not in out
        rows = list(csv.DictReader(path.open()))
        assert len(rows) >= 16 and {"slack", "verdict", "region"} <= set(rows[0])

    def test_unknown_theorem(self, capsys):
        code, _, err = run(["check-ineq", "--theorem", "7.7", "--cases", "1"], capsys)
        assert code == 2 and "unknown theorem" in err


class TestSolve:
    def test_square_measure(self, fx, capsys, tmp_path):
        trace = tmp_path / "trace.csv"
        code, out, _ = run(["solve", "--measure", str(fx / "square_measure.json"), "--p", "1",
                            "--q", "2", "--emit-csv", str(trace)], capsys)
        assert code == 0 and out["status"] == "converged"
        assert out["body"]["support"] == pytest.approx([1.0] * 4, rel=1e-10)
        assert out["measure_diagnostics"]["even"]
        assert trace.read_text().startswith("iteration,phi,grad_inf,step")

    def test_rank_deficient(self, tmp_path, capsys):
        m = tmp_path / "m.json"
        m.write_text(json.dumps({"atoms": [{"normal": [1, 0], "mass": 1}, {"normal": [-1, 0], "mass": 1}]}))
        code, _, err = run(["solve", "--measure", str(m), "--p", "1", "--q", "2"], capsys)
        assert code == 2 and "ConcentratedMeasure" in err

    def test_odd_measure(self, tmp_path, capsys):
        m = tmp_path / "m.json"
        atoms = [{"normal": [np.cos(t), np.sin(t)], "mass": 1} for t in (0.0, 2.1, 4.2)]
        m.write_text(json.dumps({"atoms": atoms}))
        code, _, err = run(["solve", "--measure", str(m), "--p", "1", "--q", "2"], capsys)
        assert code == 2 and "NotEvenMeasure" in err
        code, out, _ = run(["solve", "--measure", str(m), "--p", "2", "--q", "3", "--allow-odd"], capsys)
        assert code == 0 and out["max_residual"] <= 1e-6

    def test_unbalanced_surface_measure_has_no_solution(self, tmp_path, capsys):
        # for p = 1, q = n, Q = B a solution needs sum mu_i v_i = 0
        m = tmp_path / "m.json"
        atoms = [{"normal": [np.cos(t), np.sin(t)], "mass": 1} for t in (0.0, 2.1, 4.2)]
        m.write_text(json.dumps({"atoms": atoms}))
        code, out, _ = run(["solve", "--measure", str(m), "--p", "1", "--q", "2", "--allow-odd"], capsys)
        assert code == 1 and out["status"] != "converged"

    def test_non_convergence_exit(self, fx, capsys):
        code, out, _ = run(["solve", "--measure", str(fx / "square_measure.json"), "--p", "2",
                            "--q", "3", "--init", "random", "--seed", "1", "--max-iters", "1"], capsys)
        assert code == 1 and out["status"] == "max-iters"

    def test_round_trip_fixture(self, fx, capsys):
        code, out, err = run(["round-trip", "--body", str(fx / "square.json"), "--p", "1", "--q", "2"],
                             capsys)
        assert code == 0
        assert out["max_residual"] <= 1e-8 and out["support_error"] <= 1e-8
        assert "status: converged" in err

    def test_from_body_needs_file(self, fx, capsys):
        code, _, _ = run(["solve", "--measure", str(fx / "square_measure.json"), "--p", "1", "--q", "2",
                          "--init", "from-body"], capsys)
        assert code == 2


class TestConfigAndDeterminism:
    def test_toml_supplies_required_flags(self, fx, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text('no-meta = true\n[measure]\np = 0.0\nq = 2.0\n')
        code, out, _ = run(["measure", "--config", str(cfg), "--body", str(fx / "square.json")], capsys)
        assert code == 0 and "meta" not in out and out["total_mass"] == pytest.approx(4.0)

    def test_command_line_overrides_toml(self, fx, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[measure]\np = 0.0\nq = 2.0\n')
        _, out, _ = run(["measure", "--config", str(cfg), "--body", str(fx / "square.json"),
                         "--q", "1"], capsys)
        assert out["params"]["q"] == 1.0

    def test_unknown_key(self, fx, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text("colour = 'red'\n")
        code, _, err = run(["measure", "--config", str(cfg), "--body", str(fx / "square.json"),
                            "--p", "0", "--q", "2"], capsys)
        assert code == 2 and "unknown option" in err

    def test_bad_toml(self, fx, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text("p = \n")
        code, _, _ = run(["measure", "--config", str(cfg), "--body", str(fx / "square.json")], capsys)
        assert code == 2

    def test_threads_do_not_change_output(self, tmp_path, monkeypatch):
        outs = []
        for threads in ("1", "4"):
            path = tmp_path / f"out{threads}.json"
            main(["check-ineq", "--cases", "24", "--seed", "5", "--threads", threads, "--no-meta",
                  "--keep-rows", "--out", str(path), "--quiet"])
            outs.append(path.read_bytes())
        monkeypatch.setenv("QUERMASS_THREADS", "3")
        path = tmp_path / "env.json"
        main(["check-ineq", "--cases", "24", "--seed", "5", "--no-meta", "--keep-rows",
              "--out", str(path), "--quiet"])
        outs.append(path.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestEntryPoints:
    def test_module(self):
        res = subprocess.run([sys.executable, "-m", "pqdual", "--version"], capture_output=True, text=True)
        assert res.returncode == 0 and __version__ in res.stdout

    def test_missing_subcommand(self):
        res = subprocess.run([sys.executable, "-m", "pqdual"], capture_output=True, text=True)
        assert res.returncode == 2
