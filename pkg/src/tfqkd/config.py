"""System configuration: aggregate type, defaults, file format and digest.

The config file is a flat ``key = value`` text format with ``#`` comments.
Unknown keys are errors so that experiment records stay diffable and typo-
proof.  Values use SI base units throughout (seconds, hertz, dB, counts/s).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .optics_chain import (
    ChannelConfig,
    ConfigError,
    DetectorConfig,
    PreparePattern,
    ReceiverConfig,
    SourceConfig,
)
from .pulse_model import PulseParams, WdmShape

__all__ = [
    "SystemConfig",
    "default_config",
    "parse_config_file",
    "parse_config_text",
    "format_config",
    "config_digest",
    "ConfigError",
]

# Documented defaults: reference hardware pulse table, mu 0.5 at 30 MHz,
# 13 dB link (sweep midpoint), 2 dB receiver insertion loss.  Detector
# efficiency and noise rate are placeholders pending rate_engine.calibrate.
DEFAULT_SIGMA_T = 97e-12
DEFAULT_SIGMA_W = 1.0 / 281e-12  # narrow tone, 281 ps wide in time
DEFAULT_DELTA_T = 977e-12
DEFAULT_DELTA_W = 35.7e9


@dataclass(frozen=True)
class SystemConfig:
    """Single input to all rate math and protocol sessions."""

    pulse: PulseParams = field(
        default_factory=lambda: PulseParams(
            sigma_t=DEFAULT_SIGMA_T,
            sigma_w=DEFAULT_SIGMA_W,
            delta_t=DEFAULT_DELTA_T,
            delta_w=DEFAULT_DELTA_W,
        )
    )
    source: SourceConfig = field(
        default_factory=lambda: SourceConfig(
            mu=0.5, rep_rate=30e6, pattern=PreparePattern.ALTERNATING
        )
    )
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig(loss_db=13.0))
    receiver: ReceiverConfig = field(
        default_factory=lambda: ReceiverConfig(
            insertion_loss_db=2.0,
            time_window_halfwidth=DEFAULT_DELTA_T / 2.0,
            wdm_passband_halfwidth=6.25e9,
            wdm_shape=WdmShape.RECT,
        )
    )
    detector: DetectorConfig = field(
        default_factory=lambda: DetectorConfig(
            efficiency=0.15,
            dark_rate=5e3,
            background_rate=0.0,
            gate_width=0.48e-9,
            gate_center_offset=0.0,
        )
    )
    f_ec: float = 1.1  # error-correction inefficiency factor
    sample_fraction: float = 0.1  # sifted-key fraction disclosed for QBER estimation
    abort_qber: float = 0.25  # abort above the full-interception error rate
    pa_margin_bits: int = 64  # confirmation + safety margin subtracted before hashing
    n_pulses: int = 100_000  # session length for serve/connect runs
    seed: int = 1  # root seed; all session randomness derives from it

    def __post_init__(self) -> None:
        if self.f_ec < 1.0:
            raise ConfigError(f"f_ec must be >= 1, got {self.f_ec!r}")
        if not (0.0 < self.sample_fraction < 1.0):
            raise ConfigError(f"sample_fraction must be in (0, 1), got {self.sample_fraction!r}")
        if not (0.0 < self.abort_qber <= 0.5):
            raise ConfigError(f"abort_qber must be in (0, 0.5], got {self.abort_qber!r}")
        if self.pa_margin_bits < 0:
            raise ConfigError("pa_margin_bits must be >= 0")
        if self.n_pulses < 1:
            raise ConfigError("n_pulses must be >= 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in 64 bits")


def default_config() -> SystemConfig:
    return SystemConfig()


# key -> (section attribute, field name, parser, formatter)
def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    return int(s, 0)


def _pattern(s: str) -> PreparePattern:
    try:
        return PreparePattern(s.strip().lower())
    except ValueError:
        raise ConfigError(f"source.pattern must be 'alternating' or 'random', got {s!r}") from None


def _wdm_shape(s: str) -> WdmShape:
    try:
        return WdmShape(s.strip().lower())
    except ValueError:
        raise ConfigError(f"receiver.wdm_shape must be 'rect' or 'gaussian', got {s!r}") from None


_SCHEMA: dict[str, tuple[str, str, object]] = {
    "pulse.sigma_t": ("pulse", "sigma_t", _float),
    "pulse.sigma_w": ("pulse", "sigma_w", _float),
    "pulse.delta_t": ("pulse", "delta_t", _float),
    "pulse.delta_w": ("pulse", "delta_w", _float),
    "source.mu": ("source", "mu", _float),
    "source.rep_rate": ("source", "rep_rate", _float),
    "source.pattern": ("source", "pattern", _pattern),
    "channel.loss_db": ("channel", "loss_db", _float),
    "receiver.insertion_loss_db": ("receiver", "insertion_loss_db", _float),
    "receiver.time_window_halfwidth": ("receiver", "time_window_halfwidth", _float),
    "receiver.wdm_passband_halfwidth": ("receiver", "wdm_passband_halfwidth", _float),
    "receiver.wdm_shape": ("receiver", "wdm_shape", _wdm_shape),
    "detector.efficiency": ("detector", "efficiency", _float),
    "detector.dark_rate": ("detector", "dark_rate", _float),
    "detector.background_rate": ("detector", "background_rate", _float),
    "detector.gate_width": ("detector", "gate_width", _float),
    "detector.gate_center_offset": ("detector", "gate_center_offset", _float),
    "protocol.f_ec": ("", "f_ec", _float),
    "protocol.sample_fraction": ("", "sample_fraction", _float),
    "protocol.abort_qber": ("", "abort_qber", _float),
    "protocol.pa_margin_bits": ("", "pa_margin_bits", _int),
    "protocol.n_pulses": ("", "n_pulses", _int),
    "seed": ("", "seed", _int),
}


def parse_config_text(text: str, source: str = "<string>") -> SystemConfig:
    """Parse the flat key=value format; unknown keys and bad values raise."""
    overrides: dict[str, dict[str, object]] = {"pulse": {}, "source": {}, "channel": {}, "receiver": {}, "detector": {}, "": {}}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        section, fieldname, parser = _SCHEMA[key]
        try:
            overrides[section][fieldname] = parser(value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None

    base = default_config()
    try:
        cfg = SystemConfig(
            pulse=replace(base.pulse, **overrides["pulse"]),
            source=replace(base.source, **overrides["source"]),
            channel=replace(base.channel, **overrides["channel"]),
            receiver=replace(base.receiver, **overrides["receiver"]),
            detector=replace(base.detector, **overrides["detector"]),
            **overrides[""],
        )
    except ValueError as exc:  # component validation
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def parse_config_file(path: str) -> SystemConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def _value_str(value: object) -> str:
    if isinstance(value, PreparePattern) or isinstance(value, WdmShape):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _items(cfg: SystemConfig) -> list[tuple[str, object]]:
    out = []
    for key, (section, fieldname, _) in _SCHEMA.items():
        obj = getattr(cfg, section) if section else cfg
        out.append((key, getattr(obj, fieldname)))
    return out


def format_config(cfg: SystemConfig) -> str:
    """Render a config as parseable key=value text (round-trips exactly)."""
    lines = [f"{key} = {_value_str(value)}" for key, value in _items(cfg)]
    return "\n".join(lines) + "\n"


def config_digest(cfg: SystemConfig) -> bytes:
    """32-byte digest over the canonical serialization.

    Both parties must run the same physics to agree on sifting semantics,
    so the handshake compares this digest.
    """
    canonical = "\n".join(
        f"{key}={_value_str(value)}" for key, value in sorted(_items(cfg))
    )
    return hashlib.sha256(canonical.encode("ascii")).digest()
