"""Intercept/resend attack model and secret-key-fraction arithmetic.

The eavesdropper measures every pulse in a uniformly random basis through
basis filters equivalent to the receiver's (time-window router or
frequency demultiplexer) and resends the ideal symbol for the port that
fired.  She is granted ideal detection: her inferred bit follows the
port-routing probabilities renormalized over her two ports.  Error and
information statistics are then taken over the events the legitimate
receiver detects in the matched basis arm, using the same gate-free
routing matrices; statistics are therefore a pure function of the filter
geometry at the single-photon level.

No general security proof backs this protocol, so every secret-rate figure
derived here is an intercept/resend *estimate*, not a proven-secure rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .optics_chain import ConfigError, ReceiverConfig
from .pulse_model import Basis, PulseParams, crosstalk_probs

__all__ = [
    "AttackReport",
    "AttackSimResult",
    "binary_entropy",
    "attack_routing_matrix",
    "intercept_resend_stats",
    "simulate_intercept_resend",
    "intercepted_fraction",
    "secret_fraction",
]


def binary_entropy(q: float) -> float:
    """Binary entropy h(q) in bits, with 0*log2(0) := 0."""
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"probability out of range: {q!r}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


@dataclass(frozen=True)
class AttackReport:
    """Full-interception statistics and (optionally) the inferred fraction.

    q_ir: error rate induced among matched-basis detections under full
        interception.
    i_ir: eavesdropper information per sifted bit (mutual information with
        the transmitted bit, conditioned on the announced basis), in bits.
    zeta: inferred intercepted fraction once an observed QBER is attributed;
        None until attribution is performed.
    """

    q_ir: float
    i_ir: float
    zeta: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.q_ir <= 0.5):
            raise ValueError(f"q_ir out of range: {self.q_ir!r}")
        if not (0.0 <= self.i_ir <= 1.0):
            raise ValueError(f"i_ir out of range: {self.i_ir!r}")
        if self.zeta is not None and not (0.0 <= self.zeta <= 1.0):
            raise ValueError(f"zeta out of range: {self.zeta!r}")


def _mutual_information_bits(joint: np.ndarray) -> float:
    """Mutual information of an (unnormalized) 2D joint table, in bits."""
    total = joint.sum()
    if total <= 0:
        return 0.0
    p = joint / total
    pa = p.sum(axis=1, keepdims=True)
    pe = p.sum(axis=0, keepdims=True)
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / (pa @ pe)[mask])))


@lru_cache(maxsize=256)
def attack_routing_matrix(p: PulseParams, rx: ReceiverConfig) -> np.ndarray:
    """(4 symbols x 4 detectors) gate-free routing fractions.

    Rows follow the canonical symbol order (PPM0, PPM1, FSK0, FSK1), columns
    the global detector order (PPM0, PPM1, FSK0, FSK1).
    """
    matrices = crosstalk_probs(p, rx)
    out = np.empty((4, 4))
    for s in range(4):
        prep = Basis(s >> 1)
        bit = s & 1
        for arm in (Basis.PPM, Basis.FSK):
            routing = matrices.routing(prep, arm)
            out[s, 2 * int(arm)] = routing[bit, 0]
            out[s, 2 * int(arm) + 1] = routing[bit, 1]
    out.flags.writeable = False
    return out


def _eve_inference(fractions: np.ndarray, s: int, eve_basis: int) -> tuple[float, float]:
    """Port probabilities of an ideal-detection attacker, renormalized."""
    f0 = fractions[s, 2 * eve_basis]
    f1 = fractions[s, 2 * eve_basis + 1]
    total = f0 + f1
    if total <= 0.0:
        return 0.5, 0.5  # nothing reaches either port; she can only guess
    return f0 / total, f1 / total


@lru_cache(maxsize=256)
def intercept_resend_stats(p: PulseParams, rx: ReceiverConfig) -> AttackReport:
    """Closed-form q_ir and i_ir for full interception.

    Enumerates the 16 (symbol, attacker basis, attacker port) branches.
    Each branch carries the attacker's renormalized port probability times
    the probability that the resent symbol is routed to either detector of
    the matched arm; the error share within a branch is the wrong-detector
    routing fraction.  In the ideal-separation, lossless-filter limit this
    reduces to the textbook intercept/resend values q_ir = 1/4, i_ir = 1/2.
    """
    fractions = attack_routing_matrix(p, rx)
    err_weight = 0.0
    det_weight = 0.0
    i_num = 0.0
    block_total = 0.0
    for alice_basis in (0, 1):
        # joint over (alice bit, attacker outcome) within this announced basis
        joint = np.zeros((2, 4))
        for bit in (0, 1):
            s = 2 * alice_basis + bit
            for eve_basis in (0, 1):
                ports = _eve_inference(fractions, s, eve_basis)
                for d in (0, 1):
                    p_eve = 0.5 * ports[d]
                    if p_eve == 0.0:
                        continue
                    resent = 2 * eve_basis + d
                    detect = (
                        fractions[resent, 2 * alice_basis]
                        + fractions[resent, 2 * alice_basis + 1]
                    )
                    wrong = fractions[resent, 2 * alice_basis + (1 - bit)]
                    err_weight += 0.25 * p_eve * wrong
                    det_weight += 0.25 * p_eve * detect
                    joint[bit, 2 * eve_basis + d] += p_eve * detect
        block = joint.sum()
        if block > 0:
            i_num += block * _mutual_information_bits(joint)
            block_total += block
    if det_weight <= 0:
        raise ConfigError("configuration yields no detectable events; attack statistics undefined")
    return AttackReport(q_ir=err_weight / det_weight, i_ir=i_num / block_total)


@dataclass(frozen=True)
class AttackSimResult:
    """Monte Carlo estimates with delta-method standard errors."""

    q_hat: float
    q_se: float
    i_hat: float
    i_se: float
    n_sifted: int


def simulate_intercept_resend(
    p: PulseParams,
    rx: ReceiverConfig,
    n_pulses: int,
    rng: np.random.Generator,
) -> AttackSimResult:
    """Sampled counterpart of ``intercept_resend_stats``.

    Draws the attacker's port from her renormalized inference, routes the
    resent symbol through the receiver's gate-free filters, and keeps the
    events detected in the matched arm.  Returns empirical q_ir and i_ir
    with standard errors (binomial for q, plug-in delta method for the
    mutual information).
    """
    fractions = attack_routing_matrix(p, rx)
    sym = rng.integers(0, 4, size=n_pulses)
    eve_basis = rng.integers(0, 2, size=n_pulses)

    f0 = fractions[sym, 2 * eve_basis]
    f1 = fractions[sym, 2 * eve_basis + 1]
    total = f0 + f1
    p_port1 = np.where(total > 0, f1 / np.where(total > 0, total, 1.0), 0.5)
    eve_port = (rng.random(n_pulses) < p_port1).astype(np.int64)

    resent = 2 * eve_basis + eve_port
    bob_arm = rng.integers(0, 2, size=n_pulses)
    v = rng.random(n_pulses)
    b0 = fractions[resent, 2 * bob_arm]
    b1 = fractions[resent, 2 * bob_arm + 1]
    bob_det = np.where(v < b0, 0, np.where(v < b0 + b1, 1, -1))

    alice_basis = sym >> 1
    alice_bit = sym & 1
    sifted = (bob_arm == alice_basis) & (bob_det >= 0)
    n_sifted = int(sifted.sum())
    if n_sifted == 0:
        raise ConfigError("attack simulation produced no sifted events")
    errors = int(((bob_det != alice_bit) & sifted).sum())
    q_hat = errors / n_sifted
    q_se = math.sqrt(max(q_hat * (1.0 - q_hat), 1e-300) / n_sifted)

    # blockwise plug-in mutual information over (bit, attacker outcome)
    i_hat = 0.0
    var_sum = 0.0
    for basis in (0, 1):
        mask = sifted & (alice_basis == basis)
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        cell = 4 * alice_bit[mask] + (2 * eve_basis[mask] + eve_port[mask])
        counts = np.bincount(cell, minlength=8).reshape(2, 4).astype(float)
        pij = counts / n_b
        mi = _mutual_information_bits(counts)
        pa = pij.sum(axis=1, keepdims=True)
        pe = pij.sum(axis=0, keepdims=True)
        nz = pij > 0
        log_ratio = np.zeros_like(pij)
        log_ratio[nz] = np.log2(pij[nz] / (pa @ pe)[nz])
        var_b = float(np.sum(pij * log_ratio**2) - mi**2)
        w = n_b / n_sifted
        i_hat += w * mi
        var_sum += w * w * max(var_b, 0.0) / n_b
    return AttackSimResult(
        q_hat=q_hat, q_se=q_se, i_hat=i_hat, i_se=math.sqrt(var_sum), n_sifted=n_sifted
    )


def intercepted_fraction(q_obs: float, q_ir: float) -> float:
    """Fraction of pulses that must have been intercepted to explain q_obs.

    Attributes the whole observed error rate to interception (no baseline
    subtraction), clamped to [0, 1].
    """
    if not (0.0 <= q_obs <= 0.5):
        raise ValueError(f"observed QBER out of range: {q_obs!r}")
    if q_ir <= 0.0:
        if q_obs > 0.0:
            raise ConfigError(
                "interception induces no errors in this configuration; "
                "the attack is undetectable and no rate can be claimed"
            )
        return 0.0
    return min(q_obs / q_ir, 1.0)


def secret_fraction(q_obs: float, attack: AttackReport, f_ec: float) -> float:
    """Secret bits per sifted bit under the intercept/resend estimate.

    r = max(0, 1 - f_ec * h(q_obs) - zeta * i_ir), where zeta is the
    inferred intercepted fraction.  This is an attack-specific estimate,
    not a proven-secure rate.
    """
    if f_ec < 1.0:
        raise ValueError(f"f_ec must be >= 1, got {f_ec!r}")
    zeta = intercepted_fraction(q_obs, attack.q_ir)
    return max(0.0, 1.0 - f_ec * binary_entropy(q_obs) - zeta * attack.i_ir)
