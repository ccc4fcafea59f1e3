"""Attack statistics and secret-fraction arithmetic."""

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import entropy as scipy_entropy

from tfqkd.config import default_config
from tfqkd.optics_chain import ConfigError, ReceiverConfig
from tfqkd.pulse_model import PulseParams, WdmShape
from tfqkd.security import (
    AttackReport,
    binary_entropy,
    intercept_resend_stats,
    intercepted_fraction,
    secret_fraction,
    simulate_intercept_resend,
)

from conftest import ideal_config


class TestBinaryEntropy:
    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_maximum(self):
        assert binary_entropy(0.5) == 1.0

    def test_reference_value(self):
        assert binary_entropy(0.07) == pytest.approx(0.36592, abs=1e-5)

    def test_against_scipy_oracle(self):
        for q in np.linspace(0.001, 0.999, 97):
            expected = scipy_entropy([q, 1 - q], base=2)
            assert binary_entropy(q) == pytest.approx(expected, abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for q in rng.uniform(0, 1, size=200):
            assert binary_entropy(q) == pytest.approx(binary_entropy(1 - q), abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.01)
        with pytest.raises(ValueError):
            binary_entropy(1.01)


class TestInterceptResendClosedForm:
    def test_ideal_limit_matches_textbook(self):
        icfg = ideal_config()
        report = intercept_resend_stats(icfg.pulse, icfg.receiver)
        assert report.q_ir == pytest.approx(0.25, abs=1e-9)
        assert report.i_ir == pytest.approx(0.5, abs=1e-9)

    def test_reference_config_within_physical_bounds(self, cfg):
        report = intercept_resend_stats(cfg.pulse, cfg.receiver)
        assert 0.0 < report.q_ir <= 0.25 + 1e-9
        assert 0.0 < report.i_ir <= 1.0

    def test_monte_carlo_agreement_randomized(self):
        rng = np.random.default_rng(2024)
        for trial in range(5):
            pulse = PulseParams(
                sigma_t=rng.uniform(50e-12, 150e-12),
                sigma_w=rng.uniform(2e9, 5e9),
                delta_t=rng.uniform(600e-12, 1500e-12),
                delta_w=rng.uniform(20e9, 50e9),
            )
            rx = ReceiverConfig(
                insertion_loss_db=rng.uniform(0, 4),
                time_window_halfwidth=pulse.delta_t / 2,
                wdm_passband_halfwidth=rng.uniform(4e9, 10e9),
                wdm_shape=WdmShape.RECT,
            )
            closed = intercept_resend_stats(pulse, rx)
            sim = simulate_intercept_resend(pulse, rx, 1_000_000, rng)
            assert abs(sim.q_hat - closed.q_ir) <= 3 * sim.q_se, f"trial {trial}"
            assert abs(sim.i_hat - closed.i_ir) <= max(3 * sim.i_se, 2e-3), f"trial {trial}"


class TestInterceptedFraction:
    def test_no_errors_no_interception(self):
        assert intercepted_fraction(0.0, 0.25) == 0.0

    def test_full_interception(self):
        assert intercepted_fraction(0.25, 0.25) == 1.0

    def test_reference_ratio(self):
        assert intercepted_fraction(0.07, 0.25) == pytest.approx(0.28, rel=1e-12)

    def test_clamps_above_one(self):
        assert intercepted_fraction(0.4, 0.2) == 1.0

    def test_undetectable_attack_flagged(self):
        with pytest.raises(ConfigError):
            intercepted_fraction(0.07, 0.0)
        assert intercepted_fraction(0.0, 0.0) == 0.0

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            intercepted_fraction(0.6, 0.25)


class TestSecretFraction:
    def test_clean_channel_full_rate(self):
        attack = AttackReport(q_ir=0.25, i_ir=0.5)
        assert secret_fraction(0.0, attack, 1.0) == 1.0

    def test_half_error_rate_gives_zero(self):
        attack = AttackReport(q_ir=0.25, i_ir=0.5)
        assert secret_fraction(0.5, attack, 1.0) == 0.0

    def test_reference_arithmetic(self):
        attack = AttackReport(q_ir=0.25, i_ir=0.5)
        value = secret_fraction(0.07, attack, 1.1)
        expected = 1.0 - 1.1 * binary_entropy(0.07) - 0.28 * 0.5
        assert value == pytest.approx(expected, rel=1e-12)
        assert value == pytest.approx(0.4575, abs=1e-4)

    def test_nonincreasing_in_observed_qber(self):
        attack = AttackReport(q_ir=0.22, i_ir=0.55)
        grid = np.linspace(0.0, 0.5, 101)
        values = [secret_fraction(q, attack, 1.1) for q in grid]
        assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))

    def test_f_ec_below_one_rejected(self):
        with pytest.raises(ValueError):
            secret_fraction(0.05, AttackReport(q_ir=0.25, i_ir=0.5), 0.9)


class TestAttackReportValidation:
    def test_ranges(self):
        with pytest.raises(ValueError):
            AttackReport(q_ir=0.6, i_ir=0.5)
        with pytest.raises(ValueError):
            AttackReport(q_ir=0.2, i_ir=1.5)
        with pytest.raises(ValueError):
            AttackReport(q_ir=0.2, i_ir=0.5, zeta=1.5)
