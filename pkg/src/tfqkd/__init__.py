"""Time-frequency QKD link simulator and key-distillation stack.

Pulse-position and frequency-shift symbol alphabets, a component-level
optical chain with gated threshold detectors, closed-form and Monte Carlo
rate analysis under an intercept/resend attack estimate, and a two-party
classical postprocessing protocol that distills identical secret keys over
an in-process or TCP link.
"""

from .config import SystemConfig, config_digest, default_config, parse_config_file
from .optics_chain import (
    Basis,
    ChannelConfig,
    ConfigError,
    DetectionRecord,
    DetectorConfig,
    Outcome,
    PreparePattern,
    ReceiverConfig,
    SourceConfig,
    click_probability,
    detector_signal_fraction,
    effective_mean_photons,
    sample_detection,
    transmittance,
)
from .postprocessing import PAParameters, ec_leakage, key_confirm, pa_output_length, toeplitz_hash
from .pulse_model import (
    ALL_SYMBOLS,
    PulseDescriptor,
    PulseParams,
    Symbol,
    WdmShape,
    conjugate_width,
    crosstalk_probs,
    gaussian_capture,
    symbol_pulse,
)
from .rate_engine import (
    CalibrationAnchors,
    CalibrationError,
    CalibrationResult,
    RateReport,
    calibrate,
    calibrated_config,
    expected_rates,
    sweep_gate_width,
)
from .security import (
    AttackReport,
    binary_entropy,
    intercept_resend_stats,
    intercepted_fraction,
    secret_fraction,
    simulate_intercept_resend,
)
from .session import (
    AliceSession,
    BobSession,
    SessionAborted,
    SessionResult,
    SiftedKey,
    alice_prepare,
    estimate_qber,
    run_in_process,
    run_quantum_phase,
    sift,
)

__version__ = "0.1.0"
