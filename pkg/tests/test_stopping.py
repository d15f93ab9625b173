import math

import numpy as np
import pytest

from shadow_qfi.benchmark import NoiseConfig, build_instance
from shadow_qfi.errors import ConfigError, ValidationError
from shadow_qfi.estimator import (
    SENTINEL_STABILITY,
    BootstrapConfig,
    EstimateBundle,
    KrylovShadowEstimator,
)
from shadow_qfi.shadows import draw_snapshots
from shadow_qfi.stopping import (
    CalibrationTable,
    StopConfig,
    alpha_spend,
    component_aware_test,
    envelope_certified,
    error_envelope,
    heldout_certificate,
    k_min_formula,
    m_min_formula,
    patience_model,
    sample_schedule_test,
    width_only_test,
    wilson_interval,
)


def mk_bundle(d_k, width, k=4, m=128):
    return EstimateBundle(
        f_hat=1.0, k=k, m=m, boot_lower=0.9, boot_upper=0.9 + width,
        width=width, d_k=d_k, boot_level=0.9,
    )


class TestWidthOnly:
    def test_sentinel_never_stops(self):
        cfg = StopConfig(epsilon=0.2, rule="width_only")
        assert not width_only_test(mk_bundle(SENTINEL_STABILITY, 0.01, k=1), cfg)

    def test_joint_pass(self):
        cfg = StopConfig(epsilon=0.2, rule="width_only")
        assert width_only_test(mk_bundle(0.05, 0.15), cfg)

    def test_width_gate_fails(self):
        cfg = StopConfig(epsilon=0.2, rule="width_only")
        assert not width_only_test(mk_bundle(0.05, 0.25), cfg)


class TestComponentAware:
    def test_ineligible_at_low_resources(self):
        cfg = StopConfig(epsilon=0.2)
        trace = component_aware_test(mk_bundle(0.05, 0.1, k=2, m=32), cfg, 0)
        assert not trace.eligible_k and not trace.eligible_m
        assert trace.patience_count == 0

    def test_k_max_passes_krylov_gate(self):
        cfg = StopConfig(epsilon=0.2)
        trace = component_aware_test(mk_bundle(0.5, 0.15, k=8, m=512), cfg, 0)
        assert trace.krylov_gate and trace.sampling_gate
        assert trace.patience_count == 1
        trace2 = component_aware_test(mk_bundle(0.5, 0.15, k=8, m=512), cfg, 1)
        assert trace2.patience_count == 2  # success at P=2

    def test_any_failure_resets_patience(self):
        cfg = StopConfig(epsilon=0.2)
        trace = component_aware_test(mk_bundle(0.05, 0.25, k=4, m=128), cfg, 1)
        assert trace.patience_count == 0

    def test_gate_monotone_in_epsilon(self):
        # tightening epsilon can only turn passes into failures
        rng = np.random.default_rng(0)
        for _ in range(200):
            d, w = rng.uniform(0, 0.5, size=2)
            k = int(rng.integers(1, 9))
            m = int(rng.integers(16, 513))
            loose = component_aware_test(
                mk_bundle(d, w, k=k, m=m), StopConfig(epsilon=0.3), 0
            )
            tight = component_aware_test(
                mk_bundle(d, w, k=k, m=m), StopConfig(epsilon=0.1), 0
            )
            assert tight.patience_count <= loose.patience_count

    def test_patience_reset_needs_p_more_passes(self):
        # after a failing step, at least P further passing steps are needed
        cfg = StopConfig(epsilon=0.2, patience=2)
        good = mk_bundle(0.1, 0.1, k=4, m=128)
        bad = mk_bundle(0.5, 0.5, k=4, m=128)
        p = 0
        history = [good, good, bad, good]
        for b in history:
            p = component_aware_test(b, cfg, p).patience_count
        assert p == 1  # one pass since the reset; success needs one more
        p = component_aware_test(good, cfg, p).patience_count
        assert p == 2


class TestSampleSchedule:
    def test_two_consecutive_passes(self):
        cfg = StopConfig(epsilon=0.2, rule="sample_schedule")
        hist = [mk_bundle(0.0, w) for w in (0.30, 0.18, 0.17)]
        assert not sample_schedule_test(hist[:2], cfg, 3)
        assert sample_schedule_test(hist, cfg, 3)

    def test_terminal_final_pass(self):
        cfg = StopConfig(epsilon=0.2, rule="sample_schedule")
        hist = [mk_bundle(0.0, w) for w in (0.30, 0.30, 0.18)]
        assert sample_schedule_test(hist, cfg, 3)

    def test_no_pass(self):
        cfg = StopConfig(epsilon=0.2, rule="sample_schedule")
        hist = [mk_bundle(0.0, w) for w in (0.30, 0.30, 0.25)]
        assert not sample_schedule_test(hist, cfg, 3)


@pytest.fixture(scope="module")
def inst():
    return build_instance(NoiseConfig(2, 0.12, 0.03))


class TestHeldoutCertificate:
    def test_zero_trunc_radius_success(self, inst):
        est = KrylovShadowEstimator.for_instance(inst)
        conf = draw_snapshots(inst.rho, 4096, seed=202)
        calib = CalibrationTable([(2, 0.12, 0.03, 4, 0.0)])
        cfg = StopConfig(epsilon=0.2, rule="heldout_component_aware")
        rec, ok = heldout_certificate(
            4, (2, 0.12, 0.03), calib, conf, est, cfg, BootstrapConfig(seed=1), 1, 5
        )
        assert rec.r_trunc == 0.0
        assert ok == (rec.r_stat <= 0.2)
        assert rec.conf_m == 4096

    def test_large_trunc_radius_always_rejects(self, inst):
        est = KrylovShadowEstimator.for_instance(inst)
        conf = draw_snapshots(inst.rho, 4096, seed=203)
        calib = CalibrationTable([(2, 0.12, 0.03, 4, 0.5)])
        cfg = StopConfig(epsilon=0.2, rule="heldout_component_aware")
        rec, ok = heldout_certificate(
            4, (2, 0.12, 0.03), calib, conf, est, cfg, BootstrapConfig(seed=1), 1, 5
        )
        assert not ok  # r_trunc alone exceeds epsilon

    def test_missing_row_is_config_error(self, inst):
        est = KrylovShadowEstimator.for_instance(inst)
        conf = draw_snapshots(inst.rho, 64, seed=204)
        calib = CalibrationTable([(2, 0.12, 0.03, 3, 0.1)])
        cfg = StopConfig(epsilon=0.2, rule="heldout_component_aware")
        with pytest.raises(ConfigError):
            heldout_certificate(
                4, (2, 0.12, 0.03), calib, conf, est, cfg, BootstrapConfig(seed=1), 1, 5
            )

    def test_bonferroni_spending(self):
        assert alpha_spend(0.1, 3, 5) == pytest.approx(0.02)
        assert alpha_spend(0.1, 1, 5) == pytest.approx(0.02)

    def test_summable_spending(self):
        total = sum(alpha_spend(0.1, j, 10**9, "summable") for j in range(1, 2000))
        assert total <= 0.1


class TestFormulas:
    def test_k_min_hand_example(self):
        assert k_min_formula(2.0, 0.5, 0.2) == 5

    def test_k_min_clamp(self):
        assert k_min_formula(0.05, 0.5, 0.2) == 1  # 2C <= eps

    def test_k_min_divergence(self):
        with pytest.raises(ConfigError):
            k_min_formula(2.0, 1.0, 0.2)
        with pytest.raises(ConfigError):
            k_min_formula(2.0, 1.5, 0.2)

    def test_m_min_worked_example(self):
        assert m_min_formula(0.56, 0.2, 0.1) in range(186, 191)

    def test_m_min_with_sigma_one(self):
        # 8 * log(20) / 0.04 ~= 599 per unit variance
        assert m_min_formula(1.0, 0.2, 0.1) == math.ceil(8 * math.log(20) / 0.04)

    def test_m_min_bias_blocks(self):
        with pytest.raises(ConfigError):
            m_min_formula(0.5, 0.2, 0.1, beta_bar=0.1)

    def test_m_min_monotonicity(self):
        assert m_min_formula(0.5, 0.1, 0.1) >= m_min_formula(0.5, 0.2, 0.1)
        assert m_min_formula(1.0, 0.2, 0.1) >= m_min_formula(0.5, 0.2, 0.1)

    def test_patience_model(self):
        assert patience_model(0.5, 2) == pytest.approx(0.25)
        assert patience_model(0.5, 3) == pytest.approx(0.125)
        assert patience_model(0.3, 1) == pytest.approx(0.3)

    def test_error_envelope(self):
        i_trunc, i_stat = error_envelope(1.0, 0.5, 1.0, 0.0, 3, 599, 0.1)
        assert i_trunc == pytest.approx(0.125)
        assert abs(i_stat - 0.1) <= 2e-4
        assert envelope_certified(0.09, 0.09, 0.2)
        assert not envelope_certified(0.11, 0.09, 0.2)


class TestWilson:
    @pytest.mark.parametrize(
        "s,t,expected",
        [
            (0, 50, (0.00, 0.07)),
            (12, 20, (0.39, 0.78)),
            (34, 50, (0.54, 0.79)),
        ],
    )
    def test_reported_intervals(self, s, t, expected):
        lo, hi = wilson_interval(s, t, 0.95)
        assert abs(lo - expected[0]) <= 0.01
        assert abs(hi - expected[1]) <= 0.01

    def test_zero_case_tight(self):
        lo, hi = wilson_interval(0, 50, 0.95)
        assert abs(lo - 0.0) <= 0.005 and abs(hi - 0.07) <= 0.005

    def test_contains_point_estimate_within_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            t = int(rng.integers(1, 200))
            s = int(rng.integers(0, t + 1))
            lo, hi = wilson_interval(s, t)
            assert 0.0 <= lo <= s / t <= hi <= 1.0

    def test_input_validation(self):
        with pytest.raises(ValidationError):
            wilson_interval(5, 4)
        with pytest.raises(ValidationError):
            wilson_interval(0, 0)


class TestStopConfig:
    def test_rule_validation(self):
        with pytest.raises(ConfigError):
            StopConfig(epsilon=0.2, rule="nope")

    def test_component_gate_consistency(self):
        with pytest.raises(ConfigError):
            StopConfig(epsilon=0.2, rule="component_aware", k_min_stop=9, k_max=8)

    def test_width_only_ignores_gate_consistency(self):
        StopConfig(epsilon=0.2, rule="width_only", k_min_stop=9, k_max=8)

    def test_fixed_k_heldout_locks_order(self):
        with pytest.raises(ConfigError):
            StopConfig(epsilon=0.2, rule="fixedK_heldout", k0=2, k_max=8)
        StopConfig(epsilon=0.2, rule="fixedK_heldout", k0=4, k_max=4, m_min_stop=128)
