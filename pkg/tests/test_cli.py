import json
import math

import numpy as np
import pytest

from rosochatius.cli import ConfigError, RunConfig, grid_points, main
from rosochatius.dynamics import read_csv


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(tmp_path, command, cfg, *extra, out="out"):
    cfg_path = cfg if isinstance(cfg, str) else write(tmp_path / f"{command}.json", cfg)
    return main([command, "--config", cfg_path, "--out", str(tmp_path / out), *extra])


HARMONIC = {
    "params": {"N": 1, "n": [1], "k": [0.0], "omega": 1.0},
    "system": "reduced",
    "initial_state": {"x": [1.0], "p": [0.0]},
    "integrator": {"method": "Yoshida4", "t_end": 2 * math.pi},
}


class TestSimulate:
    def test_harmonic_matches_cosine(self, tmp_path):
        assert run(tmp_path, "simulate", HARMONIC) == 0
        t, x, p = read_csv(tmp_path / "out" / "trajectory.csv")
        np.testing.assert_allclose(x[:, 0], np.cos(t), atol=1e-6)
        assert (tmp_path / "out" / "trajectory.csv").read_text().startswith("t,x1,p1\n")

    def test_sidecar(self, tmp_path):
        run(tmp_path, "simulate", HARMONIC)
        meta = json.loads((tmp_path / "out" / "run.json").read_text())
        for key in ("params", "method", "dt", "seed", "version", "config"):
            assert key in meta
        assert meta["config"] == HARMONIC
        assert meta["dt"] == pytest.approx(1e-3 * 2 * math.pi)

    def test_full_system_sampler_and_seed_override(self, tmp_path):
        cfg = {"params": {"N": 2, "n": [1, 2], "k": [0, 0], "omega": 1.0}, "system": "full",
               "sampler": {"seed": 1}, "integrator": {"t_end": 0.1}}
        assert run(tmp_path, "simulate", cfg, "--seed", "9") == 0
        meta = json.loads((tmp_path / "out" / "run.json").read_text())
        assert meta["seed"] == 9
        assert meta["config"]["sampler"]["seed"] == 9
        header = (tmp_path / "out" / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,x1,x2,x3,x4,p1,p2,p3,p4"

    def test_oracle_method(self, tmp_path):
        cfg = dict(HARMONIC, integrator={"method": "OracleRK54", "t_end": 1.0})
        assert run(tmp_path, "simulate", cfg) == 0

    def test_missing_config(self, tmp_path, capsys):
        assert run(tmp_path, "simulate", str(tmp_path / "nope.json")) == 3
        assert "nope.json" in capsys.readouterr().err

    def test_singular_crossing(self, tmp_path, capsys):
        cfg = {"params": {"N": 1, "n": [1], "k": [-1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.0], "p": [-1.0]}, "integrator": {"t_end": 10.0}}
        assert run(tmp_path, "simulate", cfg) == 2
        err = capsys.readouterr().err
        assert "t=0.4" in err


class TestConfigErrors:
    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        assert run(tmp_path, "verify", str(path)) == 3

    def test_state_and_sampler(self, tmp_path):
        cfg = dict(HARMONIC, sampler={"seed": 0})
        assert run(tmp_path, "verify", cfg) == 3
        with pytest.raises(ConfigError):
            RunConfig.from_dict(cfg)

    @pytest.mark.parametrize("change", [
        {"params": {"N": 1, "n": [0], "k": [0], "omega": 1}},
        {"system": "medium"},
        {"integrator": {"method": "Euler"}},
        {"integrator": {"dt": -1}},
        {"suites": {"bogus": True}},
        {"thresholds": {"bogus": 1}},
        {"initial_state": {"x": [1.0, 2.0], "p": [0.0, 0.0]}},
    ])
    def test_invalid_fields(self, tmp_path, change):
        assert run(tmp_path, "simulate", {**HARMONIC, **change}) == 3

    def test_unknown_command(self):
        assert main(["explode"]) == 3

    def test_missing_params(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"system": "reduced"})


class TestVerify:
    def test_two_plane_case_passes(self, tmp_path):
        cfg = {"params": {"N": 2, "n": [1, 2], "k": [1.0, 0.0], "omega": 1.0}, "system": "reduced",
               "sampler": {"seed": 0}}
        code = run(tmp_path, "verify", cfg)
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["config"] == cfg
        assert report["checks"]["brackets"] and report["checks"]["rank"] and report["checks"]["period"]
        assert code == 0, report["drifts"]

    def test_three_planes_rank_five(self, tmp_path):
        k = np.random.default_rng(0).uniform(0.1, 2.0, 3).tolist()
        cfg = {"params": {"N": 3, "n": [1, 2, 2], "k": k, "omega": 1.0}, "system": "reduced",
               "sampler": {"seed": 0}}
        code = run(tmp_path, "verify", cfg)
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["rank"]["majority_rank"] == 5
        assert code == 0, report["drifts"]

    def test_corrupted_integral_fails(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.2], "p": [0.3]}, "options": {"perturb_k": 0.05},
               "suites": {"brackets": False, "rank": False, "period": False}}
        assert run(tmp_path, "verify", cfg) == 1
        clean = {**cfg, "options": {}}
        assert run(tmp_path, "verify", clean, out="clean") == 0

    def test_runtime_error_exit(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [-1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.0], "p": [-1.0]}}
        assert run(tmp_path, "verify", cfg) == 2

    def test_byte_identical(self, tmp_path):
        cfg = {"params": {"N": 2, "n": [1, 1], "k": [0.5, 1.0], "omega": 1.0}, "system": "reduced",
               "sampler": {"seed": 4}, "options": {"bracket_samples": 10, "rank_samples": 5}}
        run(tmp_path, "verify", cfg, out="a")
        run(tmp_path, "verify", cfg, out="b")
        assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


class TestReduceCheck:
    def test_passes_within_bound(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.2], "p": [0.3]}, "integrator": {"dt": 1e-3}}
        assert run(tmp_path, "reduce-check", cfg) == 0
        rep = json.loads((tmp_path / "out" / "reduce_report.json").read_text())
        assert rep["max_dev"] < 1e-6
        assert rep["config"] == cfg

    def test_fails_above_bound(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.2], "p": [0.3]}, "integrator": {"dt": 0.1},
               "thresholds": {"reduce_bound": 1e-12}}
        assert run(tmp_path, "reduce-check", cfg) == 1

    def test_needs_reduced_start(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [1.0], "omega": 1.0}, "system": "full",
               "initial_state": {"y": [1.0, 0.0], "phat": [0.0, 1.0]}}
        assert run(tmp_path, "reduce-check", cfg) == 3

    def test_negative_k(self, tmp_path):
        cfg = {"params": {"N": 1, "n": [1], "k": [-1.0], "omega": 1.0}, "system": "reduced",
               "initial_state": {"x": [1.2], "p": [0.3]}}
        assert run(tmp_path, "reduce-check", cfg) == 2


class TestScan:
    def test_grid_product(self):
        points = grid_points({"n": [[1, 1], [1, 2, 3]], "k": [[0.5, 0.5], [1, 1, 1], [0, 0]]})
        assert [(p.n, p.k) for p in points] == [((1, 1), (0.5, 0.5)), ((1, 1), (0.0, 0.0)),
                                               ((1, 2, 3), (1.0, 1.0, 1.0))]

    def test_jsonl_and_summary(self, tmp_path, capsys):
        cfg = {"params": {"N": 1, "n": [1], "k": [1.0], "omega": 1.0}, "system": "reduced",
               "sampler": {"seed": 2},
               "grid": [{"N": 1, "n": [1], "k": [1.0], "omega": 1.0},
                        {"N": 1, "n": [2], "k": [0.5], "omega": 1.0}],
               "options": {"workers": 2, "bracket_samples": 5, "rank_samples": 5}}
        code = run(tmp_path, "scan", cfg)
        lines = (tmp_path / "out" / "scan.jsonl").read_text().splitlines()
        assert len(lines) == 2
        rows = [json.loads(line) for line in lines]
        assert [r["params"]["n"] for r in rows] == [[1], [2]]
        out = capsys.readouterr().out
        assert "points passed" in out
        assert code == (0 if all(r["passed"] for r in rows) else 1)

    def test_needs_grid(self, tmp_path):
        assert run(tmp_path, "scan", HARMONIC) == 3

    def test_bad_grid_point(self, tmp_path):
        assert run(tmp_path, "scan", {**HARMONIC, "grid": [{"N": 1, "n": [0], "k": [0], "omega": 1}]}) == 3
