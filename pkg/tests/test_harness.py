import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from shadow_qfi import harness
from shadow_qfi.benchmark import NoiseConfig, build_instance
from shadow_qfi.errors import ConfigError, FitError
from shadow_qfi.estimator import BootstrapConfig
from shadow_qfi.harness import (
    GridSpec,
    fit_decay,
    make_calibration_rows,
    read_runs_csv,
    replicate_seed,
    run_ablation,
    run_grid,
    summarize,
    write_runs_csv,
    write_summary_csv,
)
from shadow_qfi.stopping import StopConfig

BOOT = BootstrapConfig(replicates=60, seed=0)

SMALL_SPEC = GridSpec(
    n_qubits=2,
    p_phi_list=(0.0, 0.24),
    replicates=3,
    rules=("width_only", "component_aware"),
    epsilon=0.2,
    base_seed=424242,
)

SMALL_STOP = StopConfig(epsilon=0.2, k_max=4, m_max=64, k_min_stop=2, m_min_stop=32)


@pytest.fixture(scope="module")
def small_grid():
    return run_grid(SMALL_SPEC, SMALL_STOP, BOOT)


class TestRunGrid:
    def test_one_record_per_cell(self, small_grid):
        records, summaries, trajectories = small_grid
        assert len(records) == 2 * 2 * 3
        assert len(summaries) == 4
        assert len(trajectories) == sum(r.n_eval for r in records)

    def test_false_stop_definition(self, small_grid):
        records, _, _ = small_grid
        for r in records:
            assert r.false_stop == (r.outcome == "success" and r.abs_err > r.epsilon)

    def test_matched_draw_seeding(self):
        assert replicate_seed(1, 0.12, 3) == replicate_seed(1, 0.12, 3)
        assert replicate_seed(1, 0.12, 3) != replicate_seed(1, 0.12, 4)
        assert replicate_seed(1, 0.12, 3) != replicate_seed(2, 0.12, 3)

    def test_rules_share_batches(self, small_grid):
        records, _, _ = small_grid
        by_rule = {}
        for r in records:
            by_rule.setdefault(r.rule, []).append(r)
        for rw, rc in zip(by_rule["width_only"], by_rule["component_aware"]):
            assert rw.seed == rc.seed

    def test_parallel_matches_serial(self):
        serial = run_grid(SMALL_SPEC, SMALL_STOP, BOOT, jobs=1)
        parallel = run_grid(SMALL_SPEC, SMALL_STOP, BOOT, jobs=2)
        assert serial[0] == parallel[0]
        assert serial[1] == parallel[1]


class TestSummaries:
    def test_fsr_identity(self, small_grid):
        _, summaries, _ = small_grid
        for s in summaries:
            assert s.n_false_stop <= s.n_success
            if s.sp is not None:
                assert abs(s.fsr - s.sr * (1 - s.sp)) <= 1e-12
            else:
                assert s.n_success == 0 and s.fsr == 0.0

    def test_wilson_bounds_bracket_rates(self, small_grid):
        _, summaries, _ = small_grid
        for s in summaries:
            assert s.fsr_lo <= s.fsr <= s.fsr_hi
            assert s.sr_lo <= s.sr <= s.sr_hi


class TestCsvRoundTrip:
    def test_runs_csv_round_trip(self, small_grid, tmp_path):
        records, summaries, _ = small_grid
        meta = {"config_hash": "abc", "base_seed": 424242, "version": "0.1.0"}
        path = tmp_path / "runs.csv"
        write_runs_csv(path, records, meta)
        back, meta_back = read_runs_csv(path)
        assert meta_back == {k: str(v) for k, v in meta.items()}
        assert back == records

    def test_summary_recompute_byte_identical(self, small_grid, tmp_path):
        records, summaries, _ = small_grid
        meta = {"config_hash": "abc", "base_seed": 424242, "version": "0.1.0"}
        write_runs_csv(tmp_path / "runs.csv", records, meta)
        write_summary_csv(tmp_path / "summary.csv", summaries, meta)
        back, meta_back = read_runs_csv(tmp_path / "runs.csv")
        write_summary_csv(tmp_path / "summary2.csv", summarize(back), meta_back)
        assert (tmp_path / "summary.csv").read_bytes() == (tmp_path / "summary2.csv").read_bytes()

    def test_grid_byte_determinism(self, tmp_path):
        spec = GridSpec(n_qubits=2, p_phi_list=(0.12,), replicates=2,
                        rules=("width_only",), epsilon=0.2, base_seed=9)
        meta = {"config_hash": "x", "base_seed": 9, "version": "0.1.0"}
        for name in ("a.csv", "b.csv"):
            records, _, _ = run_grid(spec, SMALL_STOP, BOOT)
            write_runs_csv(tmp_path / name, records, meta)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_sentinel_serialized_as_inf_literal(self, small_grid, tmp_path):
        records, _, _ = small_grid
        k1 = [r for r in records if r.k_final == 1]
        write_runs_csv(tmp_path / "runs.csv", records, {})
        text = (tmp_path / "runs.csv").read_text()
        assert "inf" in text or not k1
        back, _ = read_runs_csv(tmp_path / "runs.csv")
        for r in back:
            if r.k_final == 1:
                assert math.isinf(r.d_k)


class TestAblation:
    def test_replay_cells(self):
        spec = GridSpec(n_qubits=2, p_phi_list=(0.12,), replicates=4,
                        rules=("component_aware",), epsilon=0.2, base_seed=77)
        cells = run_ablation(
            spec, SMALL_STOP, BOOT,
            k_min_set=(2, 4), m_min_set=(16, 32), p_set=(1, 2), p_phi=0.12,
        )
        assert len(cells) == 8
        defaults = [c for c in cells if c["is_default"]]
        assert not defaults  # (4,128,2) not in this reduced sweep
        for c in cells:
            assert 0 <= c["fsr"] <= c["sr"] <= 1
            if c["n_success"] == 0:
                assert c["fsr"] == 0.0  # zero numerator by definition


class TestFitDecay:
    def test_exact_exponential(self):
        series = [(k, 2.0 * 0.5**k) for k in range(1, 9)]
        mu, lo, hi = fit_decay(series)
        assert abs(mu - 0.5) <= 1e-10
        assert hi - lo <= 1e-8

    def test_constant_series_flags_divergence(self):
        mu, _, _ = fit_decay([(k, 1.0) for k in range(1, 6)])
        assert abs(mu - 1.0) <= 1e-12
        from shadow_qfi.stopping import k_min_formula

        with pytest.raises(ConfigError):
            k_min_formula(1.0, mu, 0.2)

    def test_nonpositive_dropped_and_too_few(self):
        with pytest.raises(FitError):
            fit_decay([(1, 0.0), (2, -1.0), (3, 0.5), (4, 0.2)])


class TestCalibrationRows:
    def test_row_count_and_full_space_rows(self):
        spec = GridSpec(n_qubits=2, p_phi_list=(0.0, 0.12), replicates=1,
                        epsilon=0.2)
        rows = make_calibration_rows(spec, 4)
        assert len(rows) == 2 * 4
        for r in rows:
            if r["K"] == 4:
                assert r["B_abs"] <= 1e-8

    def test_k12_rel_error_bound_at_paper_point(self):
        spec = GridSpec(n_qubits=4, p_phi_list=(0.03,), replicates=1, epsilon=0.2)
        rows = make_calibration_rows(spec, 12)
        inst = build_instance(NoiseConfig(4, 0.03, 0.03))
        k12 = [r for r in rows if r["K"] == 12][0]
        assert k12["B_abs"] / inst.f_ref >= 0.0224 - 1e-4


class TestEpsilonResolution:
    def test_absolute_passthrough(self):
        spec = GridSpec(epsilon=0.3)
        assert harness.resolve_epsilon(spec, 5.0) == 0.3

    def test_relative_resolution(self):
        spec = GridSpec(epsilon=None, epsilon_rel=0.05)
        assert harness.resolve_epsilon(spec, 4.0) == pytest.approx(0.2)

    def test_exactly_one_mode(self):
        with pytest.raises(ConfigError):
            GridSpec(epsilon=0.2, epsilon_rel=0.05)
        with pytest.raises(ConfigError):
            GridSpec(epsilon=None, epsilon_rel=None)


class TestCli:
    def run_cli(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "shadow_qfi.cli", *args],
            capture_output=True,
            text=True,
        )

    def test_estimate_line(self):
        out = self.run_cli("estimate", "--rule", "width_only", "--eps", "0.2",
                           "--seed", "7", "--n", "2", "--p-phi", "0.12")
        assert out.returncode == 0
        assert out.stdout.startswith("outcome=")

    def test_unknown_subcommand_exits_one(self):
        assert self.run_cli("frobnicate").returncode == 1

    def test_unknown_flag_exits_one(self):
        assert self.run_cli("grid", "--bogus").returncode == 1

    def test_missing_config_exits_one(self):
        assert self.run_cli("grid", "--config", "/nonexistent.json").returncode == 1

    def test_grid_report_round_trip(self, tmp_path):
        cfg = {
            "grid": {"n_qubits": 2, "p_phi_list": [0.12], "replicates": 2,
                      "rules": ["width_only"], "epsilon": 0.2, "base_seed": 5},
            "stop": {"k_max": 4, "m_max": 64, "k_min_stop": 2, "m_min_stop": 32},
            "bootstrap": {"replicates": 60},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out_dir = tmp_path / "out"
        res = self.run_cli("grid", "--config", str(cfg_path), "--out", str(out_dir))
        assert res.returncode == 0, res.stderr
        assert (out_dir / "runs.csv").exists()
        assert (out_dir / "summary.csv").exists()
        rep_dir = tmp_path / "rep"
        res2 = self.run_cli("report", str(out_dir / "runs.csv"), "--out", str(rep_dir))
        assert res2.returncode == 0, res2.stderr
        assert (out_dir / "summary.csv").read_bytes() == (rep_dir / "summary.csv").read_bytes()

    def test_calibrate_writes_rows(self, tmp_path):
        cfg = {"grid": {"n_qubits": 2, "p_phi_list": [0.0, 0.12], "replicates": 1,
                         "epsilon": 0.2}}
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        res = self.run_cli("calibrate", "--config", str(cfg_path),
                           "--out", str(tmp_path), "--k-max", "4")
        assert res.returncode == 0, res.stderr
        rows, _ = harness.read_csv(tmp_path / "calibration.csv")
        assert len(rows) == 8
