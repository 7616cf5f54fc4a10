import csv

import numpy as np
import pytest

from ssflow import cli, harness
from ssflow import flow_param as fp
from ssflow.geometry import GridField
from ssflow.harness import CheckReport

FAST = """
[perturbed_line]
t_final = 0.02
[shallow_arc]
t_final = 0.02
[graph_arc]
t_final = 0.02
[borderline_start]
t_final = 0.005
"""


class TestInterpolation:
    def test_single_mode_equality(self):
        # one sine mode turns every log-convexity bound into an equality
        u = harness.sine_series([1.0], [3], 2.0, 801)
        l2, _ = harness.check_interpolation(u, 0, 1, 2)
        assert l2.measured == pytest.approx(1.0, abs=1e-4)

    def test_zero_function(self):
        u = GridField(np.zeros(101), 0.01, 0.0)
        for rep in harness.check_interpolation(u, 0, 1, 3):
            assert rep.measured == 0.0 and rep.passed

    def test_rejects_non_hinged(self):
        x = np.linspace(0, 1, 101)
        with pytest.raises(ValueError, match="even derivatives"):
            harness.check_interpolation(GridField(x * (1 - x), 0.01, 0.0), 0, 1, 2)

    def test_rejects_bad_triple(self):
        with pytest.raises(ValueError):
            harness.check_interpolation(harness.sine_series([1.0], [1]), 2, 1, 3)

    def test_sweep(self):
        rep = harness.interpolation_sweep(trials=10)
        assert rep.passed and rep.measured > 0.5


class TestReports:
    def test_status(self):
        assert CheckReport("a", 0.5, 1.0).status == "pass"
        assert CheckReport("a", 2.0, 1.0).status == "fail"
        assert CheckReport("a", 2.0, 1.0, inconclusive=True).status == "inconclusive"
        assert CheckReport("a", 1.0, 1.0).passed

    def test_line_format(self):
        assert CheckReport("x", 0.25, 1.0, "ctx").line().startswith("PASS")

    def test_energy_checks_on_line(self):
        x = np.linspace(0, 2, 41)
        c = harness.perturbed_line(41, eps=0.0, length=2.0)
        tr = fp.evolve(fp.ParamState(c, 1.0), fp.FlowConfig(dt=1e-3, t_final=0.01))
        assert harness.check_energy_bound(tr).measured == pytest.approx(0.0, abs=1e-12)
        assert harness.check_energy_monotone(tr).passed
        assert x[-1] == c.points[-1, 0]

    def test_index_inconclusive_without_flat_tails(self):
        c = harness.shallow_arc(81)
        tr = fp.evolve(fp.ParamState(c, 1.0), fp.FlowConfig(dt=1e-3, t_final=0.005, resample_every=0))
        rep = harness.check_index_invariance(tr)
        assert rep.inconclusive and rep.status == "inconclusive"

    def test_biharm_checks(self):
        reps = harness.check_biharm(mus=(1.0,), grids=(41, 81, 161))
        assert all(r.passed for r in reps)


class TestConfig:
    def test_load(self, tmp_path):
        (tmp_path / "c.ini").write_text(FAST)
        cfg = harness.load_config(tmp_path / "c.ini")
        case = harness.REGISTRY["perturbed_line"].with_overrides(cfg["perturbed_line"])
        assert case.config.t_final == 0.02 and case.config.dt == 1e-3

    def test_override_params(self):
        case = harness.REGISTRY["ladder"].with_overrides({"radii": "8,12", "lambda": "2"})
        assert case.params["radii"] == (8, 12) and case.lam == 2.0

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            harness.load_config(tmp_path / "none.ini")

    def test_unknown_names(self):
        with pytest.raises(ValueError):
            harness.run_benchmarks(suite="nope")
        with pytest.raises(KeyError):
            harness.run_benchmarks(selection=["nope"])


class TestBenchmarks:
    def test_all_pass(self, full_bundle):
        bundle, _ = full_bundle
        failed = [r.line() for r in bundle.reports if r.status == "fail"]
        assert not failed and bundle.all_passed
        assert all(not c.error for c in bundle.cases)

    def test_checks_csv(self, full_bundle):
        bundle, out = full_bundle
        with open(out / "checks.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == ("name", "passed", "measured", "bound", "seed")
        assert len(rows) == len(bundle.reports) + 1
        assert {r[4] for r in rows[1:]} == {str(harness.SEED)}

    def test_summary_and_trajectories(self, full_bundle):
        bundle, out = full_bundle
        text = (out / "summary.txt").read_text()
        assert text.startswith(f"seed = {harness.SEED}")
        assert "fail=0" in text
        assert (out / "ladder" / "r24" / "diagnostics.csv").exists()
        assert (out / "single_loop" / "main" / "curve_0000.csv").exists()

    def test_deterministic(self):
        a = harness.run_benchmarks(selection=["borderline_start"], interp_trials=3)
        b = harness.run_benchmarks(selection=["borderline_start"], interp_trials=3)
        assert [(r.name, r.measured) for r in a.reports] == [(r.name, r.measured) for r in b.reports]

    def test_case_error_isolated(self, monkeypatch):
        def boom(**_):
            raise RuntimeError("builder failed")
        case = harness.REGISTRY["perturbed_line"]
        monkeypatch.setitem(harness.REGISTRY, "perturbed_line", harness.replace(case, builder=boom))
        bundle = harness.run_benchmarks(selection=["perturbed_line"], interp_trials=1)
        assert bundle.cases[0].error and not bundle.all_passed


class TestCli:
    def test_biharm(self, capsys, tmp_path):
        assert cli.main(["biharm", "--mu", "10", "--nodes", "101", "--out", str(tmp_path / "p.csv")]) == 0
        gap = float(capsys.readouterr().out.strip().split("=")[1])
        assert gap < 1e-3
        assert np.loadtxt(tmp_path / "p.csv", delimiter=",", skiprows=1).shape == (101, 2)

    @pytest.mark.parametrize("mode", ["param", "graph"])
    def test_evolve(self, capsys, tmp_path, mode):
        rc = cli.main(["evolve", "--mode", mode, "--t-final", "0.01", "--nodes", "81",
                       "--out", str(tmp_path / "t"), "--svg", str(tmp_path / "t.svg")])
        assert rc == 0
        assert capsys.readouterr().out.startswith("status=")
        d = np.loadtxt(tmp_path / "t" / "diagnostics.csv", delimiter=",", skiprows=1)
        assert d.shape[1] == len(fp.DIAG_COLUMNS)
        assert (tmp_path / "t.svg").read_text().lstrip().startswith("<svg")

    def test_elastica(self, capsys, tmp_path):
        assert cli.main(["elastica", "--lambda", "2", "--out", str(tmp_path / "k.csv")]) == 0
        out = capsys.readouterr().out
        peak = float(out.split()[0].split("=")[1])
        assert peak == pytest.approx(2 * np.sqrt(2), abs=1e-9)

    def test_windowed(self, capsys, tmp_path):
        rc = cli.main(["windowed", "--datum", "bump", "--radii", "8,10", "--compact-N", "4",
                       "--t-final", "0.01", "--h", "0.1", "--out", str(tmp_path / "w")])
        assert rc == 0
        assert "sup_gap=" in capsys.readouterr().out
        assert (tmp_path / "w" / "ladder.csv").exists()

    def test_check_with_config(self, capsys, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text(FAST + "[check]\nworkers = 2\n")
        rc = cli.main(["--config", str(ini), "check", "--out-dir", str(tmp_path / "chk")])
        out = capsys.readouterr().out
        assert rc in (0, 1) and out.startswith("pass=")
        assert (tmp_path / "chk" / "checks.csv").exists()

    def test_bad_config_key(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[biharm]\nbogus = 1\n")
        with pytest.raises(SystemExit):
            cli.main(["--config", str(ini), "biharm"])

    def test_error_exit_code(self, capsys):
        assert cli.main(["biharm", "--mu", "-1"]) == 2
        assert "error" in capsys.readouterr().err
