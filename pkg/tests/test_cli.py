import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sqglab import checkpoint
from sqglab.cli import main, parse_overrides
from sqglab.config import ConfigError

SMALL = ["--grid.n", "32", "--grid.box_len", "2*pi", "--recipe.background", "modes"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestOverrides:
    def test_forms(self):
        assert parse_overrides(["--a.b", "1", "--c=x y"]) == {"a.b": "1", "c": "x y"}

    @pytest.mark.parametrize("argv", [["value"], ["--a.b"], ["--"]])
    def test_malformed(self, argv):
        with pytest.raises(ConfigError):
            parse_overrides(argv)


class TestExitCodes:
    def test_unknown_key(self, tmp_path, capsys):
        assert main(["verify-data", "--grid.colour", "red", "--output_dir", str(tmp_path)]) == 3
        assert "grid.colour" in capsys.readouterr().err

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--resume"])
        assert exc.value.code == 3

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "-c", str(tmp_path / "nope.cfg")]) == 3

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "sqglab", "--help"], capture_output=True, text=True)
        assert out.returncode == 0 and "verify-data" in out.stdout


class TestVerifyData:
    def test_pass_and_fail(self, tmp_path):
        args = [*SMALL, "--recipe.modes", "1:0:0.3", "--recipe.g0", "modes", "--recipe.mu", "0.8"]
        assert main(["verify-data", *args, "--recipe.g0_modes", "0:2:1e-3", "--output_dir", str(tmp_path / "a")]) == 0
        cond = json.loads((tmp_path / "a" / "condition.json").read_text())
        assert cond["pass"] is True and {"lhs", "eps", "integrals"} <= cond.keys()
        assert not (tmp_path / "a" / "bounds.json").exists()
        assert main(["verify-data", *args, "--recipe.g0_modes", "0:2:1", "--output_dir", str(tmp_path / "b")]) == 1

    def test_corollary_writes_bounds(self, tmp_path):
        code = main(["verify-data", "--grid.n", "128", "--grid.box_len", "48*pi", "--recipe.delta", "0.1",
                     "--output_dir", str(tmp_path)])
        assert code == 0
        bounds = json.loads((tmp_path / "bounds.json").read_text())
        assert len(bounds["bounds"]) >= 4


class TestSimulate:
    LINEAR = [*SMALL, "--recipe.modes", "", "--recipe.g0", "modes", "--recipe.g0_modes", "2:1:0.1",
              "--recipe.mu", "0.7", "--recipe.alpha", "0.4", "--sim.mode", "perturbation",
              "--sim.linear_only", "true", "--sim.t_end", "1", "--sim.dt_max", "0.01", "--sim.sample_every", "5"]

    def test_linear_run_outputs(self, tmp_path):
        assert main(["simulate", *self.LINEAR, "--output_dir", str(tmp_path)]) == 0
        data = rows(tmp_path / "trajectory.csv")
        assert len(data) == 21
        rate = 0.7 * math.sqrt(5.0) ** 0.8
        l2_0 = 2 * 0.1**2 * (2 * math.pi) ** 2
        for r in data:
            t = float(r["t"])
            assert float(r["l2_g_sq"]) == pytest.approx(l2_0 * math.exp(-2 * rate * t), rel=1e-8)
        meta = json.loads((tmp_path / "run.json").read_text())
        assert meta["steps"] == 100 and meta["mu"] == 0.7 and meta["blowup"] is None
        field, side = checkpoint.load(tmp_path / "final_perturbation_g.sqgf")
        assert side["t"] == pytest.approx(1.0) and side["step"] == 100
        assert field.coeffs[2, 1] == pytest.approx(0.1 * math.exp(-rate), rel=1e-10)

    def test_ledger_command(self, tmp_path, capsys):
        main(["simulate", *self.LINEAR, "--sim.sample_every", "1", "--output_dir", str(tmp_path)])
        capsys.readouterr()
        assert main(["ledger", str(tmp_path), "--tol", "1e-6"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["pass"] and report["max_rel"] <= 1e-6
        assert main(["ledger", str(tmp_path), "--stride", "2"]) == 3  # spacing 0.02 is too coarse

    def test_blowup_exit_and_healthy_checkpoint(self, tmp_path):
        code = main(["simulate", *SMALL, "--recipe.modes", "1:1:0.4, 2:-1:0.3", "--recipe.mu", "0",
                     "--sim.mode", "full", "--sim.blowup_factor", "0.5", "--sim.t_end", "0.1",
                     "--output_dir", str(tmp_path)])
        assert code == 2
        assert (tmp_path / "healthy_full_theta.sqgf").exists()
        assert not (tmp_path / "final_full_theta.sqgf").exists()
        report = json.loads((tmp_path / "blowup.json").read_text())
        assert "sup norm" in report["reason"] and report["checkpoints"] == ["healthy_full_theta.sqgf"]

    def test_resume_matches_uninterrupted(self, tmp_path):
        args = [*SMALL, "--recipe.modes", "1:2:0.3, -2:1:0.2", "--recipe.g0", "random",
                "--recipe.g0_h3_sq", "0.01", "--recipe.g0_kmax", "2.5", "--sim.mode", "paired",
                "--sim.dt_max", "0.01", "--sim.sample_every", "2"]
        assert main(["simulate", *args, "--sim.t_end", "0.2", "--output_dir", str(tmp_path / "full")]) == 0
        assert main(["simulate", *args, "--sim.t_end", "0.1", "--output_dir", str(tmp_path / "part")]) == 0
        assert main(["simulate", *args, "--sim.t_end", "0.2", "--resume", str(tmp_path / "part"),
                     "--output_dir", str(tmp_path / "rest")]) == 0
        for name in ("trajectory.csv", "final_full_theta.sqgf", "final_perturbation_g.sqgf"):
            assert (tmp_path / "full" / name).read_bytes() == (tmp_path / "rest" / name).read_bytes()

    def test_resume_grid_mismatch(self, tmp_path):
        main(["simulate", *self.LINEAR, "--output_dir", str(tmp_path / "a")])
        bad = [a if a != "32" else "64" for a in self.LINEAR]
        assert main(["simulate", *bad, "--resume", str(tmp_path / "a"), "--output_dir", str(tmp_path / "b")]) == 3

    def test_figures(self, tmp_path):
        assert main(["simulate", *self.LINEAR, "--figures", "--output_dir", str(tmp_path)]) == 0
        assert (tmp_path / "trajectory.png").read_bytes()[:4] == b"\x89PNG"


class TestSweepAndLab:
    def test_sweep_condition_only(self, tmp_path):
        spec = tmp_path / "sweep.cfg"
        spec.write_text(
            "grid.n = 32\ngrid.box_len = 2*pi\nrecipe.background = modes\nrecipe.modes = 1:0:0.3\n"
            "recipe.g0 = modes\nrecipe.g0_modes = 0:2:1e-3\n"
            f"output_dir = {tmp_path}/out\nsweep.recipe.mu = 0.5, 1, 2\n"
        )
        assert main(["sweep", str(spec), "--no-simulate"]) == 0
        table = rows(tmp_path / "out" / "sweep.csv")
        assert [r["recipe.mu"] for r in table] == ["0.5", "1.0", "2.0"]
        lhs = [float(r["lhs"]) for r in table]
        assert lhs[0] > lhs[1] > lhs[2]
        assert all(r["error"] == "" for r in table)
        assert (tmp_path / "out" / table[1]["label"] / "condition.json").exists()

    def test_sweep_records_point_errors(self, tmp_path):
        spec = tmp_path / "sweep.cfg"
        spec.write_text(f"output_dir = {tmp_path}/out\ngrid.n = 16\nsweep.recipe.delta = 0.1\n")
        assert main(["sweep", str(spec), "--no-simulate"]) == 1
        assert "ResolutionError" in rows(tmp_path / "out" / "sweep.csv")[0]["error"]

    def test_ineq_lab(self, tmp_path):
        assert main(["ineq-lab", "--kind", "gn", "--trials", "2", "--rescale-check",
                     "--output_dir", str(tmp_path)]) == 0
        table = rows(tmp_path / "ineq_gn.csv")
        assert len(table) == 16
        assert all(np.isfinite(float(r["ratio"])) for r in table)
        assert "gn_grad[0]" in json.loads((tmp_path / "ineq_gn_summary.json").read_text())
