"""End-to-end checks of the command line interface.

Every test drives main() with a real config file in a temp directory and
inspects the CSV artifacts: file contracts, strict config validation with
the documented exit codes, byte-level determinism, and the closed-form
properties the density tables must reproduce (unit mass, the equal-rate
plateau).
"""

import gzip
import json
import math

import numpy as np
import pytest

from dflasso.cli import main
from dflasso.harness import DgpSpec, simulate_dataset


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def run_cli(command, cfg_path, out, *extra):
    argv = [command, "--config", str(cfg_path), "--out", str(out)]
    return main(argv + [str(a) for a in extra])


def read_table(path):
    with (gzip.open(path, "rt", encoding="utf-8") if path.suffix == ".gz"
          else open(path, encoding="utf-8")) as fh:
        header = fh.readline().strip().split(",")
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, body


def simulate_small(tmp_path, n_times=16, n_coef=2, seed=3):
    cfg = write_cfg(tmp_path, {"dgp": {"n_times": n_times, "n_coef": n_coef}},
                    name="sim.json")
    assert run_cli("simulate", cfg, tmp_path, "--seed", seed) == 0
    return {"y": "y.csv", "design": "F.csv", "truth": "truth.csv"}


class TestSimulate:
    def test_artifacts_round_trip_the_dataset(self, tmp_path):
        cfg = write_cfg(tmp_path, {"dgp": {"n_times": 30, "n_coef": 4}})
        assert run_cli("simulate", cfg, tmp_path, "--seed", 11) == 0
        data = simulate_dataset(DgpSpec(n_times=30, n_coef=4), seed=11)
        hy, y = read_table(tmp_path / "y.csv")
        hf, design = read_table(tmp_path / "F.csv")
        ht, truth_long = read_table(tmp_path / "truth.csv")
        assert hy == ["value"] and y.shape == (30, 1)
        assert hf == ["coef1", "coef2", "coef3", "coef4"]
        assert ht == ["time", "series", "value"]
        assert np.array_equal(y[:, 0], data.y)
        assert np.array_equal(design, data.design)
        assert truth_long.shape == (120, 3)
        rebuilt = np.empty((30, 4))
        rebuilt[truth_long[:, 0].astype(int) - 1,
                truth_long[:, 1].astype(int) - 1] = truth_long[:, 2]
        assert np.array_equal(rebuilt, data.truth)

    def test_line_endings_are_lf(self, tmp_path):
        cfg = write_cfg(tmp_path, {"dgp": {"n_times": 5, "n_coef": 2}})
        assert run_cli("simulate", cfg, tmp_path) == 0
        raw = (tmp_path / "y.csv").read_bytes()
        assert b"\r" not in raw and raw.count(b"\n") == 6

    def test_seed_flag_moves_the_data(self, tmp_path):
        cfg = write_cfg(tmp_path, {"dgp": {"n_times": 10, "n_coef": 2}})
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run_cli("simulate", cfg, out_a, "--seed", 1) == 0
        assert run_cli("simulate", cfg, out_b, "--seed", 2) == 0
        _, ya = read_table(out_a / "y.csv")
        _, yb = read_table(out_b / "y.csv")
        assert not np.array_equal(ya, yb)

    def test_unknown_section_and_key_are_hard_errors(self, tmp_path):
        bad_section = write_cfg(tmp_path, {"dgp": {}, "extra": {}}, "a.json")
        assert run_cli("simulate", bad_section, tmp_path) == 2
        bad_key = write_cfg(tmp_path, {"dgp": {"n_times": 10, "bogus": 1}}, "b.json")
        assert run_cli("simulate", bad_key, tmp_path) == 2


class TestFit:
    def fit_cfg(self, tmp_path, variant, **chain):
        data = simulate_small(tmp_path)
        chain = {"n_sweeps": 80, "n_burn": 20, "thin": 2, **chain}
        return write_cfg(tmp_path, {"data": data,
                                    "model": {"variant": variant},
                                    "chain": chain}, name=f"fit_{variant}.json")

    def test_dfl_artifacts(self, tmp_path):
        cfg = self.fit_cfg(tmp_path, "dfl")
        assert run_cli("fit", cfg, tmp_path / "fit") == 0
        out = tmp_path / "fit"
        for name in ("draws_rate", "draws_noise_var", "draws_ratio",
                     "draws_count_total", "draws_baseline", "draws_states"):
            assert (out / f"{name}.csv").exists()
        assert not (out / "draws_init_rate.csv").exists()
        header, body = read_table(out / "summary.csv")
        assert header == ["time", "series", "mean", "lo95", "hi95",
                          "prob_active", "mean_count"]
        assert body.shape == (16 * 2, 7)
        assert np.all(body[:, 5] >= 0.0) and np.all(body[:, 5] <= 1.0)

    def test_de_summary_has_no_count_columns(self, tmp_path):
        cfg = self.fit_cfg(tmp_path, "de")
        assert run_cli("fit", cfg, tmp_path / "fit") == 0
        out = tmp_path / "fit"
        header, body = read_table(out / "summary.csv")
        assert header == ["time", "series", "mean", "lo95", "hi95"]
        assert (out / "draws_init_rate.csv").exists()
        assert not (out / "draws_ratio.csv").exists()
        assert not (out / "draws_count_total.csv").exists()

    def test_summary_mean_recomputes_from_stored_draws(self, tmp_path):
        cfg = self.fit_cfg(tmp_path, "dfl")
        assert run_cli("fit", cfg, tmp_path / "fit") == 0
        _, long = read_table(tmp_path / "fit" / "draws_states.csv")
        n = int(long[:, 0].max()) + 1
        states = np.empty((n, 16, 2))
        states[long[:, 0].astype(int),
               long[:, 1].astype(int) - 1,
               long[:, 2].astype(int) - 1] = long[:, 3]
        _, summary = read_table(tmp_path / "fit" / "summary.csv")
        mean = states.mean(axis=0)
        for row in summary:
            assert row[2] == mean[int(row[0]) - 1, int(row[1]) - 1]

    def test_gzip_output(self, tmp_path):
        data = simulate_small(tmp_path)
        cfg = write_cfg(tmp_path, {"data": data, "model": {"variant": "de"},
                                   "chain": {"n_sweeps": 40, "n_burn": 10},
                                   "output": {"gzip": True}}, name="gz.json")
        assert run_cli("fit", cfg, tmp_path / "fit") == 0
        gz = tmp_path / "fit" / "draws_rate.csv.gz"
        assert gz.exists()
        header, body = read_table(gz)
        assert header == ["draw", "value"] and body.shape[0] == 6

    def test_empty_chain_is_a_config_error(self, tmp_path, capsys):
        cfg = self.fit_cfg(tmp_path, "dfl", n_sweeps=50, n_burn=50)
        assert run_cli("fit", cfg, tmp_path / "fit") == 2
        assert "empty chain" in capsys.readouterr().err


class TestForecast:
    def forecast_cfg(self, tmp_path, start_time, levels=None):
        data = simulate_small(tmp_path)
        section = {"start_time": start_time}
        if levels is not None:
            section["levels"] = levels
        return write_cfg(tmp_path, {"data": data, "model": {"variant": "de"},
                                    "chain": {"n_sweeps": 60, "n_burn": 20},
                                    "forecast": section}, name="fc.json")

    def test_record_contract(self, tmp_path):
        cfg = self.forecast_cfg(tmp_path, start_time=12)
        assert run_cli("forecast", cfg, tmp_path / "fc") == 0
        header, body = read_table(tmp_path / "fc" / "forecast.csv")
        assert header == ["s", "mean", "lo95", "hi95", "realized"]
        assert body.shape == (4, 5)
        assert np.array_equal(body[:, 0], np.arange(12, 16))
        _, y = read_table(tmp_path / "y.csv")
        assert np.array_equal(body[:, 4], y[12:, 0])

    def test_start_beyond_series_fails(self, tmp_path):
        cfg = self.forecast_cfg(tmp_path, start_time=16)
        assert run_cli("forecast", cfg, tmp_path / "fc") == 2

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        cfg = self.forecast_cfg(tmp_path, start_time=13, levels=[0.95, 0.5])
        assert run_cli("forecast", cfg, tmp_path / "a", "--seed", 7) == 0
        assert run_cli("forecast", cfg, tmp_path / "b", "--seed", 7) == 0
        assert ((tmp_path / "a" / "forecast.csv").read_bytes()
                == (tmp_path / "b" / "forecast.csv").read_bytes())
        header, _ = read_table(tmp_path / "a" / "forecast.csv")
        assert header == ["s", "mean", "lo95", "hi95", "lo50", "hi50", "realized"]


class TestEvaluateAndCompare:
    def test_evaluate_writes_all_metrics(self, tmp_path):
        data = simulate_small(tmp_path, n_times=14)
        cfg = write_cfg(tmp_path, {
            "data": data, "model": {"variant": "dfl"},
            "chain": {"n_sweeps": 60, "n_burn": 20, "thin": 2},
            "origin_chain": {"n_sweeps": 40, "n_burn": 10},
            "forecast": {"start_time": 11}}, name="ev.json")
        assert run_cli("evaluate", cfg, tmp_path / "ev") == 0
        with open(tmp_path / "ev" / "evaluation.csv", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        metrics = {line.split(",")[0]: line.split(",")[1] for line in lines[1:]}
        assert set(metrics) == {"mse_coef1", "mse_coef2", "mse_noise_block",
                                "mse_forecast", "ci_length", "coverage",
                                "degenerate"}
        assert math.isnan(float(metrics["mse_noise_block"]))
        assert 0.0 <= float(metrics["coverage"]) <= 1.0
        assert metrics["degenerate"] == "0"

    def test_compare_table_shape(self, tmp_path):
        data = simulate_small(tmp_path, n_times=14)
        cfg = write_cfg(tmp_path, {
            "data": data,
            "models": {"fused": {"variant": "dfl"}, "walk": {"variant": "de"}},
            "chain": {"n_sweeps": 60, "n_burn": 20, "thin": 2},
            "forecast": {"start_time": 11}}, name="cmp.json")
        assert run_cli("compare", cfg, tmp_path / "cmp") == 0
        with open(tmp_path / "cmp" / "comparison.csv", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        assert lines[0] == ("model,mse_coef1,mse_coef2,mse_forecast,"
                            "ci_length,coverage")
        assert len(lines) == 3
        assert lines[1].startswith("fused,") and lines[2].startswith("walk,")

    def test_bad_model_entry_fails(self, tmp_path):
        data = simulate_small(tmp_path, n_times=14)
        cfg = write_cfg(tmp_path, {
            "data": data, "models": {"fused": {"variant": "dfl", "junk": 1}},
            "chain": {"n_sweeps": 40, "n_burn": 10},
            "forecast": {"start_time": 11}}, name="bad.json")
        assert run_cli("compare", cfg, tmp_path / "cmp") == 2


class TestDensity:
    def test_stationary_and_transition_mass(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "weights": {"rate": 1.0, "ratio": 0.5},
            "grid": {"x_lo": -20.0, "x_hi": 20.0, "x_count": 2001,
                     "x_prev": 1.0, "weight_count": 2001}})
        assert run_cli("density", cfg, tmp_path) == 0
        header, body = read_table(tmp_path / "curves.csv")
        assert header == ["x", "transition", "stationary", "shrink_mean"]
        xs = body[:, 0]
        assert abs(np.trapezoid(body[:, 2], xs) - 1.0) < 1e-3
        assert abs(np.trapezoid(body[:, 1], xs) - 1.0) < 1e-3
        inner = body[xs != 0.0]
        assert np.all((inner[:, 3] > 0.0) & (inner[:, 3] < 1.0))
        assert math.isnan(body[xs == 0.0, 3][0])
        wh, wbody = read_table(tmp_path / "weight.csv")
        assert wh == ["weight", "density"]
        assert np.all(wbody[:, 1] >= 0.0)
        assert abs(np.trapezoid(wbody[:, 1], wbody[:, 0]) - 1.0) < 1e-3

    def test_equal_rate_plateau(self, tmp_path):
        cfg = write_cfg(tmp_path, {
            "weights": {"rate": 1.0, "ratio": 1.0 - 1e-13},
            "grid": {"x_lo": 0.0, "x_hi": 1.0, "x_count": 3, "x_prev": 1.0}})
        assert run_cli("density", cfg, tmp_path) == 0
        _, body = read_table(tmp_path / "curves.csv")
        at_zero, midway, at_prev = body[:, 1]
        assert at_zero == pytest.approx(at_prev, rel=1e-9)
        assert midway == pytest.approx(at_zero, rel=1e-9)

    def test_degenerate_ratios_are_rejected(self, tmp_path):
        for ratio in (0.0, 1.0, -0.2):
            cfg = write_cfg(tmp_path, {"weights": {"rate": 1.0, "ratio": ratio}},
                            name=f"r{ratio}.json")
            assert run_cli("density", cfg, tmp_path) == 2

    def test_unknown_grid_key_fails(self, tmp_path):
        cfg = write_cfg(tmp_path, {"weights": {"rate": 1.0, "ratio": 0.5},
                                   "grid": {"points": 10}})
        assert run_cli("density", cfg, tmp_path) == 2


class TestPlumbing:
    def test_missing_config(self, tmp_path):
        assert run_cli("simulate", tmp_path / "nope.json", tmp_path) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        assert run_cli("simulate", path, tmp_path) == 2

    def test_non_object_root(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        assert run_cli("simulate", path, tmp_path) == 2

    def test_bad_flag_values(self, tmp_path):
        cfg = write_cfg(tmp_path, {"dgp": {}})
        assert run_cli("simulate", cfg, tmp_path, "--seed", -1) == 2
        assert run_cli("simulate", cfg, tmp_path, "--threads", 0) == 2

    def test_unknown_command_exits_two(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["transmogrify", "--config", "x.json"])
        assert err.value.code == 2
