"""Closed-form rate engine: limits, monotonicity, sweeps and calibration."""

import math
from dataclasses import replace

import numpy as np
import pytest

from tfqkd.config import default_config
from tfqkd.optics_chain import ChannelConfig, DetectorConfig
from tfqkd.rate_engine import (
    CalibrationAnchors,
    CalibrationError,
    calibrate,
    calibrated_config,
    expected_rates,
    sweep_gate_width,
)

from conftest import ideal_config


def noiseless(cfg):
    return replace(
        cfg, detector=replace(cfg.detector, dark_rate=0.0, background_rate=0.0)
    )


class TestExpectedRates:
    def test_clean_single_term_limit(self):
        # ideal capture, no noise, no crosstalk: only the exponential survives
        icfg = ideal_config()
        report = expected_rates(icfg)
        mu_eff = icfg.source.mu / 2  # lossless chain, unit efficiency
        expected = icfg.source.rep_rate * -math.expm1(-mu_eff)
        assert report.qber == pytest.approx(0.0, abs=1e-9)
        assert report.sifted_rate == pytest.approx(expected, rel=1e-9)

    def test_noise_dominated_qber_is_half(self, cfg):
        dim = replace(
            cfg,
            source=replace(cfg.source, mu=1e-12),
            detector=replace(cfg.detector, dark_rate=1e5),
        )
        report = expected_rates(dim)
        assert report.qber == pytest.approx(0.5, abs=1e-6)

    def test_components_decompose_qber(self, cfg):
        report = expected_rates(replace(cfg, detector=replace(cfg.detector, dark_rate=8e4)))
        c = report.components
        assert c.crosstalk_error_fraction + c.noise_error_fraction == pytest.approx(
            report.qber, abs=1e-12
        )
        assert c.signal_clicks_per_s + c.noise_clicks_per_s == pytest.approx(
            report.sifted_rate, rel=1e-9
        )

    def test_structural_bounds_random_configs(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            cfg = replace(
                default_config(),
                source=replace(default_config().source, mu=rng.uniform(0.05, 1.0)),
                channel=ChannelConfig(rng.uniform(0.0, 20.0)),
                detector=DetectorConfig(
                    efficiency=rng.uniform(0.05, 1.0),
                    dark_rate=rng.uniform(0.0, 2e5),
                    background_rate=rng.uniform(0.0, 1e5),
                    gate_width=rng.uniform(0.1e-9, 1.5e-9),
                ),
            )
            report = expected_rates(cfg)
            assert 0.0 <= report.qber <= 0.5 + 1e-12
            assert 0.0 <= report.secret_rate <= report.sifted_rate + 1e-9
            assert report.sifted_rate <= cfg.source.rep_rate

    def test_qber_monotone_in_noise_rates(self, cfg):
        for field in ("dark_rate", "background_rate"):
            values = []
            for rate in np.linspace(0.0, 2e5, 12):
                det = replace(cfg.detector, **{field: rate})
                values.append(expected_rates(replace(cfg, detector=det)).qber)
            assert all(b >= a - 1e-15 for a, b in zip(values, values[1:])), field

    def test_attack_constant_across_gate_widths(self, cfg):
        sweep = sweep_gate_width(cfg, [0.2e-9, 0.6e-9, 1.2e-9])
        reports = [r.attack for _, r in sweep]
        assert all(r.q_ir == reports[0].q_ir and r.i_ir == reports[0].i_ir for r in reports)


class TestSweep:
    def test_single_point_equals_expected_rates(self, cfg):
        gate = 0.37e-9
        [(g, report)] = sweep_gate_width(cfg, [gate])
        direct = expected_rates(replace(cfg, detector=replace(cfg.detector, gate_width=gate)))
        assert g == gate
        assert report.sifted_rate == direct.sifted_rate
        assert report.qber == direct.qber
        assert report.secret_rate == direct.secret_rate

    def test_grid_validation(self, cfg):
        with pytest.raises(ValueError):
            sweep_gate_width(cfg, [])
        with pytest.raises(ValueError):
            sweep_gate_width(cfg, [0.5e-9, 0.5e-9])

    def test_deterministic(self, cfg):
        grid = list(np.linspace(0.1e-9, 1.5e-9, 15))
        a = sweep_gate_width(cfg, grid)
        b = sweep_gate_width(cfg, grid)
        assert [(g, r.sifted_rate, r.qber, r.secret_rate) for g, r in a] == [
            (g, r.sifted_rate, r.qber, r.secret_rate) for g, r in b
        ]

    def test_calibrated_peak_location(self, cfg):
        ccfg = calibrated_config(cfg)
        grid = list(np.arange(0.1e-9, 1.501e-9, 0.05e-9))
        sweep = sweep_gate_width(ccfg, grid)
        best_gate, _ = max(sweep, key=lambda item: item[1].secret_rate)
        assert 0.3e-9 <= best_gate <= 0.7e-9


class TestCalibration:
    def test_roundtrip_recovers_known_parameters(self, cfg):
        # generate anchors from a known detector, then fit them back
        true_eta, true_noise = 0.17, 6.5e4
        known = replace(
            cfg,
            detector=DetectorConfig(
                efficiency=true_eta,
                dark_rate=true_noise,
                background_rate=0.0,
                gate_width=0.48e-9,
            ),
        )
        report = expected_rates(known)
        anchors = CalibrationAnchors(
            gate_width=0.48e-9, secret_rate=report.secret_rate, qber=report.qber
        )
        result = calibrate(cfg, anchors)
        assert result.efficiency == pytest.approx(true_eta, rel=1e-2)
        assert result.noise_rate == pytest.approx(true_noise, rel=1e-2)

    def test_reference_anchors_converge(self, cfg):
        result = calibrate(cfg)
        assert result.residual < 0.05
        fitted = expected_rates(
            replace(cfg, detector=replace(result.detector, gate_width=0.48e-9))
        )
        assert fitted.secret_rate == pytest.approx(8.9e3, rel=1e-6)
        assert fitted.qber == pytest.approx(0.07, abs=1e-8)
        assert 0.0 < result.efficiency < 1.0
        assert result.noise_rate > 0.0

    def test_infeasible_anchors_rejected(self, cfg):
        with pytest.raises(CalibrationError):
            calibrate(cfg, CalibrationAnchors(secret_rate=5e7))  # above the pulse rate
        with pytest.raises(CalibrationError):
            calibrate(cfg, CalibrationAnchors(secret_rate=2.9e7))  # below rep rate, unreachable

    def test_calibrated_config_applies_fit(self, cfg):
        ccfg = calibrated_config(cfg)
        result = calibrate(cfg)
        assert ccfg.detector.efficiency == result.efficiency
        assert ccfg.detector.dark_rate == result.noise_rate
