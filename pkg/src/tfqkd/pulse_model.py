"""Gaussian pulse mathematics for the two time-frequency encoding bases.

Symbols are Gaussian pulses that are narrow in one domain and, being
Fourier-limited, broad in the conjugate domain.  The pulse-position (PPM)
basis places a narrow time pulse at one of two slots; the frequency-shift
(FSK) basis places a narrow spectral pulse at one of two tones.  Widths in
the conjugate domain follow the reciprocal convention

    conjugate_width(sigma) = 1 / sigma

which reproduces the reference hardware parameters exactly.  All capture
probabilities integrate the unit-normalized Gaussian *intensity* profile
with the quoted sigma.

Coordinates are symbol-slot relative: time is measured from the slot
center, frequency from the optical carrier.  PPM slots sit at +-delta_t/2,
FSK tones at +-delta_w/2.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Basis",
    "Symbol",
    "ALL_SYMBOLS",
    "PulseParams",
    "PulseDescriptor",
    "WdmShape",
    "RoutingMatrices",
    "conjugate_width",
    "symbol_pulse",
    "gaussian_capture",
    "gaussian_filter_capture",
    "crosstalk_probs",
]

_SQRT2 = math.sqrt(2.0)


class Basis(enum.IntEnum):
    """Encoding/measurement basis: pulse position (time) or frequency shift."""

    PPM = 0
    FSK = 1


class WdmShape(enum.Enum):
    """Passband shape of the frequency demultiplexer ports."""

    RECT = "rect"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class Symbol:
    """One of the four transmittable symbols: a (basis, bit) pair."""

    basis: Basis
    bit: int

    def __post_init__(self) -> None:
        if self.bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.bit!r}")

    @property
    def index(self) -> int:
        """Canonical symbol index: PPM0=0, PPM1=1, FSK0=2, FSK1=3."""
        return 2 * int(self.basis) + self.bit


ALL_SYMBOLS: tuple[Symbol, ...] = (
    Symbol(Basis.PPM, 0),
    Symbol(Basis.PPM, 1),
    Symbol(Basis.FSK, 0),
    Symbol(Basis.FSK, 1),
)


def conjugate_width(sigma: float) -> float:
    """Width of a Fourier-limited pulse in the conjugate domain, 1/sigma.

    Accepts a time width in seconds and returns Hz, or vice versa.
    """
    if sigma <= 0:
        raise ValueError(f"width must be positive, got {sigma!r}")
    return 1.0 / sigma


@dataclass(frozen=True)
class PulseParams:
    """Widths and separations defining both symbol alphabets.

    sigma_t: time-domain width of a PPM pulse (s)
    sigma_w: frequency-domain width of an FSK pulse (Hz)
    delta_t: separation of the two PPM slots (s)
    delta_w: separation of the two FSK tones (Hz)

    The conjugate widths (PPM spectral width, FSK temporal width) are
    derived reciprocals, not stored.
    """

    sigma_t: float
    sigma_w: float
    delta_t: float
    delta_w: float

    def __post_init__(self) -> None:
        for name in ("sigma_t", "sigma_w", "delta_t", "delta_w"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        # Symbols of one basis must be separable, otherwise routing is ambiguous.
        if self.delta_t <= 2.0 * self.sigma_t:
            warnings.warn(
                f"PPM slots are not well separated: delta_t={self.delta_t:g} <= "
                f"2*sigma_t={2 * self.sigma_t:g}",
                stacklevel=2,
            )
        if self.delta_w <= 2.0 * self.sigma_w:
            warnings.warn(
                f"FSK tones are not well separated: delta_w={self.delta_w:g} <= "
                f"2*sigma_w={2 * self.sigma_w:g}",
                stacklevel=2,
            )

    @property
    def ppm_freq_sigma(self) -> float:
        """Spectral width of a PPM pulse (Hz)."""
        return conjugate_width(self.sigma_t)

    @property
    def fsk_time_sigma(self) -> float:
        """Temporal width of an FSK pulse (s)."""
        return conjugate_width(self.sigma_w)


@dataclass(frozen=True)
class PulseDescriptor:
    """Gaussian intensity profile of one symbol in both domains."""

    time_center: float
    time_sigma: float
    freq_center: float
    freq_sigma: float

    def __post_init__(self) -> None:
        if self.time_sigma <= 0 or self.freq_sigma <= 0:
            raise ValueError("pulse widths must be positive")


def symbol_pulse(sym: Symbol, p: PulseParams) -> PulseDescriptor:
    """Time/frequency profile of a symbol, slot-relative coordinates.

    PPM bit b sits at time (b - 1/2)*delta_t on the carrier; FSK bit b sits
    at frequency offset (b - 1/2)*delta_w at the slot center.  The profile
    in the domain where the symbol is broad is a single Gaussian of the
    conjugate width centered at 0.
    """
    offset = sym.bit - 0.5
    if sym.basis == Basis.PPM:
        return PulseDescriptor(
            time_center=offset * p.delta_t,
            time_sigma=p.sigma_t,
            freq_center=0.0,
            freq_sigma=p.ppm_freq_sigma,
        )
    return PulseDescriptor(
        time_center=0.0,
        time_sigma=p.fsk_time_sigma,
        freq_center=offset * p.delta_w,
        freq_sigma=p.sigma_w,
    )


def _phi(z: float) -> float:
    """Standard normal CDF; exact at +-inf."""
    return 0.5 * (1.0 + math.erf(z / _SQRT2))


def gaussian_capture(center: float, sigma: float, window: tuple[float, float]) -> float:
    """Probability mass of a Gaussian intensity profile inside a window.

    Integrates the unit-normalized Gaussian with the given center and sigma
    over [lo, hi].  Infinite bounds are allowed; a degenerate window
    (lo == hi) captures nothing.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    lo, hi = window
    if lo > hi:
        raise ValueError(f"window reversed: [{lo!r}, {hi!r}]")
    if lo == hi:
        return 0.0
    value = 0.5 * (math.erf((hi - center) / (sigma * _SQRT2)) - math.erf((lo - center) / (sigma * _SQRT2)))
    return min(max(value, 0.0), 1.0)


def gaussian_filter_capture(
    center: float, sigma: float, filter_center: float, filter_halfwidth: float
) -> float:
    """Capture of a Gaussian profile through a Gaussian passband.

    The passband transmits 1 at filter_center and 1/2 at +-filter_halfwidth
    (half-maximum convention).  Closed form of the Gaussian-times-Gaussian
    overlap integral.
    """
    if sigma <= 0 or filter_halfwidth <= 0:
        raise ValueError("sigma and filter_halfwidth must be positive")
    a = math.log(2.0) / (filter_halfwidth * filter_halfwidth)
    s2 = 2.0 * a * sigma * sigma
    return math.exp(-a * (center - filter_center) ** 2 / (1.0 + s2)) / math.sqrt(1.0 + s2)


@dataclass(frozen=True, eq=False)
class RoutingMatrices:
    """Per-arm 2x2 photon routing probabilities, indexed [bit, detector].

    ``*_same`` holds symbols prepared in the arm's own basis, ``*_cross``
    symbols prepared in the other basis (broad conjugate profile).  Rows sum
    to <= 1; the remainder is filtered out.
    """

    ppm_same: np.ndarray
    ppm_cross: np.ndarray
    fsk_same: np.ndarray
    fsk_cross: np.ndarray

    def routing(self, prep: Basis, meas: Basis) -> np.ndarray:
        if meas == Basis.PPM:
            return self.ppm_same if prep == Basis.PPM else self.ppm_cross
        return self.fsk_same if prep == Basis.FSK else self.fsk_cross


def _time_window(p: PulseParams, halfwidth: float, detector: int) -> tuple[float, float]:
    slot = (detector - 0.5) * p.delta_t
    return (slot - halfwidth, slot + halfwidth)


def _passband_capture(
    center: float,
    sigma: float,
    p: PulseParams,
    halfwidth: float,
    shape: WdmShape,
    detector: int,
) -> float:
    tone = (detector - 0.5) * p.delta_w
    if shape == WdmShape.GAUSSIAN:
        return gaussian_filter_capture(center, sigma, tone, halfwidth)
    return gaussian_capture(center, sigma, (tone - halfwidth, tone + halfwidth))


def crosstalk_probs(p: PulseParams, rx) -> RoutingMatrices:
    """Routing matrices of the two measurement arms for all four symbols.

    ``rx`` is any receiver configuration carrying ``time_window_halfwidth``,
    ``wdm_passband_halfwidth`` and ``wdm_shape``.  The time arm routes by
    per-slot windows, the frequency arm by demultiplexer passbands.  A
    wrong-basis symbol enters an arm with its broad conjugate profile
    centered at 0, so residual distinguishability shows up as crosstalk.
    Detector gates are not applied here; see
    ``optics_chain.detector_signal_fraction``.
    """
    w = rx.time_window_halfwidth
    h = rx.wdm_passband_halfwidth
    shape = rx.wdm_shape

    ppm_same = np.empty((2, 2))
    ppm_cross = np.empty((2, 2))
    fsk_same = np.empty((2, 2))
    fsk_cross = np.empty((2, 2))
    for bit in (0, 1):
        ppm = symbol_pulse(Symbol(Basis.PPM, bit), p)
        fsk = symbol_pulse(Symbol(Basis.FSK, bit), p)
        for det in (0, 1):
            window = _time_window(p, w, det)
            ppm_same[bit, det] = gaussian_capture(ppm.time_center, ppm.time_sigma, window)
            ppm_cross[bit, det] = gaussian_capture(fsk.time_center, fsk.time_sigma, window)
            fsk_same[bit, det] = _passband_capture(fsk.freq_center, fsk.freq_sigma, p, h, shape, det)
            fsk_cross[bit, det] = _passband_capture(ppm.freq_center, ppm.freq_sigma, p, h, shape, det)
    for m in (ppm_same, ppm_cross, fsk_same, fsk_cross):
        m.flags.writeable = False
    return RoutingMatrices(ppm_same=ppm_same, ppm_cross=ppm_cross, fsk_same=fsk_same, fsk_cross=fsk_cross)
