"""Shared configuration builders for the test suite."""

from dataclasses import replace

import pytest

from tfqkd.config import SystemConfig, default_config
from tfqkd.optics_chain import ChannelConfig, DetectorConfig, ReceiverConfig, SourceConfig
from tfqkd.pulse_model import PulseParams, WdmShape


@pytest.fixture
def cfg() -> SystemConfig:
    return default_config()


def ideal_config(seed: int = 1) -> SystemConfig:
    """Perfectly separable symbols behind lossless, everything-capturing filters.

    Narrow widths sit tens of sigma inside their own windows, broad conjugate
    profiles split 50/50 across the two ports of the other basis with
    negligible tails, and the gates cover all arrival times.
    """
    pulse = PulseParams(sigma_t=1e-12, sigma_w=1e9, delta_t=2e-8, delta_w=4e13)
    return SystemConfig(
        pulse=pulse,
        source=SourceConfig(mu=0.5, rep_rate=30e6),
        channel=ChannelConfig(loss_db=0.0),
        receiver=ReceiverConfig(
            insertion_loss_db=0.0,
            time_window_halfwidth=pulse.delta_t / 2.0,
            wdm_passband_halfwidth=pulse.delta_w / 2.0,
            wdm_shape=WdmShape.RECT,
        ),
        detector=DetectorConfig(
            efficiency=1.0,
            dark_rate=0.0,
            background_rate=0.0,
            gate_width=6e-8,
        ),
        seed=seed,
    )


def lossless_config(seed: int = 42, dark_rate: float = 0.0) -> SystemConfig:
    """Reference pulse shapes with a lossless link and ideal detectors.

    High per-pulse detection probability, so short sessions still yield
    thousands of sifted bits.
    """
    base = default_config()
    return replace(
        base,
        channel=ChannelConfig(loss_db=0.0),
        receiver=replace(base.receiver, insertion_loss_db=0.0),
        detector=DetectorConfig(
            efficiency=1.0,
            dark_rate=dark_rate,
            background_rate=0.0,
            gate_width=1.5e-9,
        ),
        seed=seed,
    )
