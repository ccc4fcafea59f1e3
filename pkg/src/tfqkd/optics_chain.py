"""Component models for the transmitter, free-space channel and receiver.

The chain is: weak-coherent source -> scalar-loss link -> receiver insertion
loss -> passive 50/50 basis splitter -> per-arm routing (time windows or
demux passbands) -> gated threshold detectors.  Splitting Poissonian light
on the coupler yields independent Poisson photon numbers in both arms, so
every detector sees an independent Poisson count plus gate noise.

Analytic helpers here are pure; ``sample_detection`` requires an
exclusively owned random generator per simulation stream.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .pulse_model import (
    ALL_SYMBOLS,
    Basis,
    PulseParams,
    Symbol,
    WdmShape,
    gaussian_capture,
    gaussian_filter_capture,
    symbol_pulse,
)

__all__ = [
    "PreparePattern",
    "SourceConfig",
    "ChannelConfig",
    "ReceiverConfig",
    "DetectorConfig",
    "Outcome",
    "DetectionRecord",
    "ConfigError",
    "transmittance",
    "db_to_linear",
    "effective_mean_photons",
    "click_probability",
    "detector_signal_fraction",
    "signal_fraction_matrix",
    "click_probability_matrix",
    "sample_detection",
    "sample_clicks",
    "classify_clicks",
]

N_DETECTORS = 4  # global order: PPM det0, PPM det1, FSK det0, FSK det1


class ConfigError(ValueError):
    """Raised when a configuration violates a physical constraint."""


class PreparePattern(enum.Enum):
    """Symbol choice at the transmitter."""

    ALTERNATING = "alternating"  # fixed 4-symbol cycle, bases alternating
    RANDOM = "random"  # i.i.d. uniform over the 4 symbols


@dataclass(frozen=True)
class SourceConfig:
    mu: float  # mean photons per pulse at the transmitter output
    rep_rate: float  # pulse repetition rate (Hz)
    pattern: PreparePattern = PreparePattern.ALTERNATING

    def __post_init__(self) -> None:
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu!r}")
        if self.rep_rate <= 0:
            raise ConfigError(f"rep_rate must be positive, got {self.rep_rate!r}")


@dataclass(frozen=True)
class ChannelConfig:
    loss_db: float  # scalar free-space link loss (dB, >= 0)

    def __post_init__(self) -> None:
        if self.loss_db < 0 or not math.isfinite(self.loss_db):
            raise ConfigError(f"loss_db must be finite and >= 0, got {self.loss_db!r}")


@dataclass(frozen=True)
class ReceiverConfig:
    insertion_loss_db: float  # filter/demux chain loss before the splitter (dB)
    time_window_halfwidth: float  # time-filter routing window per slot (s)
    wdm_passband_halfwidth: float  # demux port halfwidth (Hz)
    wdm_shape: WdmShape = WdmShape.RECT

    def __post_init__(self) -> None:
        if self.insertion_loss_db < 0:
            raise ConfigError(f"insertion_loss_db must be >= 0, got {self.insertion_loss_db!r}")
        if self.time_window_halfwidth <= 0:
            raise ConfigError("time_window_halfwidth must be positive")
        if self.wdm_passband_halfwidth <= 0:
            raise ConfigError("wdm_passband_halfwidth must be positive")


@dataclass(frozen=True)
class DetectorConfig:
    efficiency: float  # detection efficiency, (0, 1]
    dark_rate: float  # dark counts per second
    background_rate: float  # stray-light counts per second
    gate_width: float  # sensitive window per cycle (s)
    gate_center_offset: float = 0.0  # gate center shift from expected arrival (s)

    def __post_init__(self) -> None:
        if not (0 < self.efficiency <= 1):
            raise ConfigError(f"efficiency must be in (0, 1], got {self.efficiency!r}")
        if self.dark_rate < 0 or self.background_rate < 0:
            raise ConfigError("count rates must be >= 0")
        if self.gate_width <= 0:
            raise ConfigError("gate_width must be positive")
        if self.noise_probability >= 0.5:
            raise ConfigError(
                f"per-gate noise probability {self.noise_probability:g} >= 0.5; "
                "lower the noise rates or the gate width"
            )

    @property
    def noise_probability(self) -> float:
        """Probability of a noise count within one gate."""
        return (self.dark_rate + self.background_rate) * self.gate_width


class Outcome(enum.IntEnum):
    """Per-pulse result on the announced arm."""

    BIT0 = 0
    BIT1 = 1
    DOUBLE_CLICK = 2
    NO_CLICK = 3


@dataclass(frozen=True)
class DetectionRecord:
    """Receiver-side outcome for one pulse; arm is None when nothing clicked."""

    pulse_index: int
    arm: Optional[Basis]
    outcome: Outcome


def db_to_linear(db: float) -> float:
    return 10.0 ** (-db / 10.0)


def transmittance(ch: ChannelConfig) -> float:
    """Linear power transmittance of the link, 10^(-loss_db/10)."""
    if ch.loss_db < 0:
        raise ConfigError(f"loss_db must be >= 0, got {ch.loss_db!r}")
    return db_to_linear(ch.loss_db)


def effective_mean_photons(
    src: SourceConfig,
    ch: ChannelConfig,
    rx: ReceiverConfig,
    det: DetectorConfig,
    basis: Optional[Basis] = None,
) -> float:
    """Mean detected photon number per pulse arriving in one basis arm.

    Chain: source mu, link transmittance, receiver insertion loss, the 1/2
    of the passive basis splitter, and detector efficiency.  Both arms are
    symmetric, so ``basis`` does not change the value.
    """
    del basis  # arms are symmetric
    return (
        src.mu
        * transmittance(ch)
        * db_to_linear(rx.insertion_loss_db)
        * 0.5
        * det.efficiency
    )


def click_probability(mu_on_detector: float, det: DetectorConfig) -> float:
    """Threshold-detector click probability for a given mean photon number.

    p = 1 - (1 - p_noise) * exp(-mu), with p_noise the per-gate noise
    probability.  No photon-number resolution, afterpulsing or dead time.
    """
    if mu_on_detector < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu_on_detector!r}")
    p_noise = det.noise_probability
    if p_noise >= 1.0:
        raise ConfigError(f"per-gate noise probability {p_noise:g} >= 1")
    return p_noise + (1.0 - p_noise) * (-math.expm1(-mu_on_detector))


def _gate_window(center: float, det: DetectorConfig) -> tuple[float, float]:
    c = center + det.gate_center_offset
    return (c - 0.5 * det.gate_width, c + 0.5 * det.gate_width)


def detector_signal_fraction(
    sym: Symbol,
    p: PulseParams,
    rx: ReceiverConfig,
    det: DetectorConfig,
    basis: Basis,
    detector_index: int,
) -> float:
    """Probability that a signal photon of ``sym`` lands on one detector.

    For the time arm the routing window and the detector gate are both time
    filters, so the capture is taken over their intersection (the gate is
    centered on the detector's expected slot arrival).  For the frequency
    arm the passband capture and the time-gate capture factorize; the gate
    there is centered on the slot center where both broad and narrow-tone
    profiles peak.
    """
    if detector_index not in (0, 1):
        raise ValueError(f"detector_index must be 0 or 1, got {detector_index!r}")
    desc = symbol_pulse(sym, p)
    if basis == Basis.PPM:
        slot = (detector_index - 0.5) * p.delta_t
        w_lo = slot - rx.time_window_halfwidth
        w_hi = slot + rx.time_window_halfwidth
        g_lo, g_hi = _gate_window(slot, det)
        lo, hi = max(w_lo, g_lo), min(w_hi, g_hi)
        if lo >= hi:
            return 0.0
        return gaussian_capture(desc.time_center, desc.time_sigma, (lo, hi))

    tone = (detector_index - 0.5) * p.delta_w
    if rx.wdm_shape == WdmShape.GAUSSIAN:
        freq_part = gaussian_filter_capture(
            desc.freq_center, desc.freq_sigma, tone, rx.wdm_passband_halfwidth
        )
    else:
        freq_part = gaussian_capture(
            desc.freq_center,
            desc.freq_sigma,
            (tone - rx.wdm_passband_halfwidth, tone + rx.wdm_passband_halfwidth),
        )
    time_part = gaussian_capture(desc.time_center, desc.time_sigma, _gate_window(0.0, det))
    return freq_part * time_part


@lru_cache(maxsize=512)
def signal_fraction_matrix(
    p: PulseParams, rx: ReceiverConfig, det: DetectorConfig
) -> np.ndarray:
    """(4 symbols x 4 detectors) signal routing fractions, gates included.

    Rows follow the canonical symbol order (PPM0, PPM1, FSK0, FSK1), columns
    the global detector order (PPM0, PPM1, FSK0, FSK1).
    """
    out = np.empty((4, N_DETECTORS))
    for sym in ALL_SYMBOLS:
        for arm in (Basis.PPM, Basis.FSK):
            for d in (0, 1):
                out[sym.index, 2 * int(arm) + d] = detector_signal_fraction(
                    sym, p, rx, det, arm, d
                )
    out.flags.writeable = False
    return out


def click_probability_matrix(cfg) -> np.ndarray:
    """(4 symbols x 4 detectors) per-pulse click probabilities.

    ``cfg`` is a system configuration exposing pulse/source/channel/
    receiver/detector components.  Each detector clicks independently:
    Poisson signal thinned by its routing fraction, plus gate noise.
    """
    mu_eff = effective_mean_photons(cfg.source, cfg.channel, cfg.receiver, cfg.detector)
    fractions = signal_fraction_matrix(cfg.pulse, cfg.receiver, cfg.detector)
    p_noise = cfg.detector.noise_probability
    if p_noise >= 1.0:
        raise ConfigError(f"per-gate noise probability {p_noise:g} >= 1")
    probs = p_noise + (1.0 - p_noise) * (-np.expm1(-mu_eff * fractions))
    probs.flags.writeable = False
    return probs


def sample_clicks(symbol_ids: np.ndarray, cfg, rng: np.random.Generator) -> np.ndarray:
    """Sample the (n x 4) boolean click pattern for a batch of pulses."""
    probs = click_probability_matrix(cfg)
    u = rng.random((len(symbol_ids), N_DETECTORS))
    return u < probs[symbol_ids]


def classify_clicks(
    clicks: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reduce raw click patterns to announced (index, arm, outcome) triples.

    Returns (pulse positions with >=1 click, announced arm per detection,
    outcome code per detection).  When both arms click in the same pulse the
    announced arm is drawn uniformly; within the announced arm, two clicks
    give DOUBLE_CLICK, one click gives its bit.
    """
    ppm_any = clicks[:, 0] | clicks[:, 1]
    fsk_any = clicks[:, 2] | clicks[:, 3]
    detected = np.nonzero(ppm_any | fsk_any)[0]
    arm = np.where(fsk_any[detected], 1, 0).astype(np.uint8)
    both = ppm_any[detected] & fsk_any[detected]
    n_both = int(both.sum())
    if n_both:
        arm[both] = rng.integers(0, 2, size=n_both, dtype=np.uint8)
    d0 = clicks[detected, 2 * arm]
    d1 = clicks[detected, 2 * arm + 1]
    outcome = np.where(d0 & d1, int(Outcome.DOUBLE_CLICK), np.where(d1, 1, 0)).astype(np.uint8)
    return detected, arm, outcome


def sample_detection(
    sym: Symbol, cfg, rng: np.random.Generator, pulse_index: int = 0
) -> DetectionRecord:
    """Monte Carlo counterpart of the analytic chain for a single pulse."""
    clicks = sample_clicks(np.array([sym.index]), cfg, rng)
    detected, arm, outcome = classify_clicks(clicks, rng)
    if len(detected) == 0:
        return DetectionRecord(pulse_index=pulse_index, arm=None, outcome=Outcome.NO_CLICK)
    return DetectionRecord(
        pulse_index=pulse_index, arm=Basis(int(arm[0])), outcome=Outcome(int(outcome[0]))
    )
