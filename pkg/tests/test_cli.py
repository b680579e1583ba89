import json

import numpy as np
import pytest

from finsler_twist.chaos import FTLEField
from finsler_twist.cli import main
from finsler_twist.config import ExperimentConfig
from finsler_twist.errors import ConfigError
from finsler_twist.experiments import run_experiment

SMALL = ["--set", "grid.nx=4", "--set", "grid.ny=4", "--set", "n_iter=20"]


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.n_iter == 1000 and cfg.threshold == 0.05
        assert (cfg.grid.nx, cfg.grid.ny) == (256, 256)
        cfg.validate()

    def test_file_and_overrides(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"epsilon": 0.5, "grid": {"nx": 8}}))
        cfg = ExperimentConfig.load(path).with_overrides(["grid.ny=6", "kam.n_iter=2000"])
        assert cfg.epsilon == 0.5 and cfg.grid.nx == 8 and cfg.grid.ny == 6
        assert cfg.kam.n_iter == 2000

    def test_round_trip(self):
        cfg = ExperimentConfig().with_overrides(["epsilon=0.7", "tolerances.flat=1e-9"])
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    @pytest.mark.parametrize("items", [["nosuch=1"], ["grid.nosuch=1"], ["epsilon"],
                                       ["epsilon.x=1"], ["grid.nx=abc"]])
    def test_bad_overrides(self, items):
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(items)

    def test_unreadable_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.load(tmp_path / "missing.json")

    @pytest.mark.parametrize("item", ["epsilon=-1", "tolerances.flat=0", "grid.nx=1",
                                      "threshold=-0.1", "n_iter=0"])
    def test_validation(self, item):
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides([item]).validate()


class TestRun:
    def test_ftle_field_outputs(self, tmp_path, capsys):
        out = tmp_path / "o"
        code = main(["run", "ftle-field", *SMALL, "--set", "epsilon=1.2", "--out", str(out)])
        assert code == 0
        assert "ftle-field: PASS" in capsys.readouterr().out
        report = json.loads((out / "report.json").read_text())
        assert report["files"] == ["field.bin", "field.csv", "report.json"]
        assert "out" not in report["config"] and report["config"]["epsilon"] == 1.2
        fld = FTLEField.from_bin(out / "field.bin")
        assert fld.values.shape == (4, 4) and fld.n_iter == 20
        data = np.loadtxt(out / "field.csv", delimiter=",", skiprows=1)
        assert np.array_equal(data[:, 2], fld.values.ravel())
        assert report["metrics"]["ftle_max"] == fld.values.max()

    def test_reports_are_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            assert main(["run", "island-area", *SMALL, "--set", "epsilon=1.2",
                         "--out", str(tmp_path / name)]) == 0
        for f in ("report.json", "field.bin", "field.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_flat_check_writes_trajectories(self, tmp_path):
        out = tmp_path / "o"
        assert main(["run", "flat-check", "--set", "epsilon=0", "--set", "n_samples=10",
                     "--out", str(out)]) == 0
        lines = (out / "trajectories.csv").read_text().splitlines()
        header = [ln for ln in lines if not ln.startswith("#")][0]
        assert header == "trajectory,t,theta,thetadot"
        assert any(ln.startswith("# method: DOP853") for ln in lines)
        assert json.loads((out / "report.json").read_text())["metrics"][
            "max_residual_vs_shear"] <= 1e-8

    def test_failed_check_exits_one(self, tmp_path, capsys):
        # with a perturbation the return map is not the shear
        code = main(["run", "flat-check", "--set", "epsilon=0.3", "--set", "n_samples=5",
                     "--out", str(tmp_path)])
        assert code == 1
        assert "flat-check: FAIL" in capsys.readouterr().out

    def test_portrait_and_kam_files(self, tmp_path):
        cfg = ExperimentConfig().with_overrides(
            ["epsilon=0", "portrait.n_seeds=2", "portrait.n_iter=5", "kam.n_samples=4"])
        rep = run_experiment("portrait", cfg, str(tmp_path))
        rows = (tmp_path / "portrait.csv").read_text().splitlines()
        assert rows[0] == "seed,n,x,y" and len(rows) == 1 + 2 * 6 and rep["passed"]
        rep = run_experiment("kam-scan", cfg, str(tmp_path))
        rows = (tmp_path / "kam.csv").read_text().splitlines()
        assert rows[0] == "y0,oscillation,max_gap,circle_like" and len(rows) == 5
        assert rep["metrics"]["circle_like_fraction"] == 1.0

    @pytest.mark.parametrize("argv", [
        ["run", "ftle-field", "--set", "grid.nx=1"],
        ["run", "ftle-field", "--set", "nosuch=3"],
        ["run", "ftle-field", "--config", "/nonexistent/config.json"],
        ["run", "kam-scan", "--set", "kam.n_iter=10"],
    ])
    def test_usage_errors_exit_two(self, tmp_path, argv, capsys):
        assert main([*argv, "--out", str(tmp_path)]) == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_unknown_experiment_is_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "nosuch"])
        assert exc.value.code == 2

    def test_numerical_failure_exits_three(self, tmp_path, capsys):
        code = main(["run", "conjugacy", "--set", "epsilon=1.2", "--set", "conj_n=2",
                     "--set", "n_samples=2", "--set", "tolerances.integrator_tol=1e-18",
                     "--out", str(tmp_path)])
        assert code == 3
        assert "numerical error" in capsys.readouterr().err


def test_verify_subset(tmp_path, capsys):
    path = tmp_path / "v.json"
    assert main(["verify", "--only", "1", "5", "--json", str(path)]) == 0
    rows = json.loads(path.read_text())
    assert [r["number"] for r in rows] == [1, 5] and all(r["passed"] for r in rows)
    assert "2/2 criteria passed" in capsys.readouterr().out
