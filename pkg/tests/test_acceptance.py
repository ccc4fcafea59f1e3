"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are fixed here and nowhere else.
"""

import math
import threading
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from tfqkd.cli import CSV_HEADER, main
from tfqkd.config import default_config, format_config
from tfqkd.link import Frame, LinkDown, MessageType, decode_frame, encode_frame
from tfqkd.optics_chain import (
    ChannelConfig,
    DetectorConfig,
    click_probability_matrix,
)
from tfqkd.postprocessing import PAParameters, pa_output_length, toeplitz_hash
from tfqkd.rate_engine import calibrate, calibrated_config, expected_rates, sweep_gate_width
from tfqkd.security import intercept_resend_stats, simulate_intercept_resend
from tfqkd.session import run_connector, run_in_process, run_listener

from conftest import ideal_config, lossless_config


def _report(criterion: int, text: str) -> None:
    print(f"ACCEPTANCE CRITERION {criterion}: {text} ... PASS")


@pytest.fixture(scope="module")
def calibrated():
    return calibrated_config(default_config())


def test_criterion_1_sweep_shape(calibrated):
    """Gate-width sweep: sifted monotone, QBER rising past the knee, interior peak."""
    grid = [round(0.1 + 0.1 * i, 10) * 1e-9 for i in range(15)]
    start = time.perf_counter()
    sweep = sweep_gate_width(calibrated, grid)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0, f"analytic sweep took {elapsed:.3f} s"

    sifted = [r.sifted_rate for _, r in sweep]
    qber = [r.qber for _, r in sweep]
    secret = [r.secret_rate for _, r in sweep]

    # (a) sifted rate never decreases with a wider gate
    assert all(b >= a - 1e-9 for a, b in zip(sifted, sifted[1:]))

    # (b) QBER strictly increases once the narrow-pulse capture has saturated
    knee = 2.0 * 2.58 * calibrated.pulse.sigma_t  # ~99% time-capture width
    past_knee = [q for g, q in zip(grid, qber) if g >= knee]
    assert all(b > a for a, b in zip(past_knee, past_knee[1:]))

    # (c) unique interior maximum of the secret-rate estimate
    peak = int(np.argmax(secret))
    assert 0 < peak < len(secret) - 1
    assert all(b >= a for a, b in zip(secret[: peak + 1], secret[1 : peak + 1]))
    assert all(b <= a for a, b in zip(secret[peak:], secret[peak + 1 :]))
    _report(1, f"sweep shape reproduced in {elapsed * 1e3:.0f} ms, peak at {grid[peak] * 1e9:.1f} ns")


def test_criterion_2_anchor_reproduction(calibrated):
    """Calibration reproduces the published operating point and error floor."""
    fit = calibrate(default_config())
    assert fit.residual < 0.05

    at_anchor = expected_rates(
        replace(calibrated, detector=replace(calibrated.detector, gate_width=0.48e-9))
    )
    assert abs(at_anchor.secret_rate - 8.9e3) <= 0.2 * 8.9e3
    assert abs(at_anchor.qber - 0.07) <= 0.01

    grid = [round(0.1 + 0.1 * i, 10) * 1e-9 for i in range(15)]
    min_qber = min(r.qber for _, r in sweep_gate_width(calibrated, grid))
    assert min_qber <= 0.05
    _report(
        2,
        f"anchor secret {at_anchor.secret_rate:.0f} bit/s at QBER {at_anchor.qber:.3f}, "
        f"min sweep QBER {min_qber:.3f}, residual {fit.residual:.1e}",
    )


def test_criterion_3_uncalibrated_order_of_magnitude():
    """Default link budget alone puts the sifted rate in the kbit/s range."""
    report = expected_rates(default_config())
    assert 1e3 <= report.sifted_rate <= 1e5
    _report(3, f"default config sifted rate {report.sifted_rate:.0f} bit/s")


def test_criterion_4_monte_carlo_equivalence():
    """Closed forms match 1e6-pulse sessions within 3 sigma, 5 random configs."""
    rng = np.random.default_rng(20250607)
    start = time.perf_counter()
    base = default_config()
    for trial in range(5):
        cfg = replace(
            base,
            source=replace(base.source, mu=rng.uniform(0.2, 0.8)),
            channel=ChannelConfig(rng.uniform(2.0, 8.0)),
            detector=DetectorConfig(
                efficiency=rng.uniform(0.2, 0.6),
                dark_rate=rng.uniform(1e4, 2e5),
                background_rate=0.0,
                gate_width=rng.uniform(0.3e-9, 1.2e-9),
            ),
            sample_fraction=0.2,
            seed=int(rng.integers(0, 2**32)),
        )
        n = 1_000_000
        run = run_in_process(cfg, n_pulses=n)
        bob = run.bob

        probs = click_probability_matrix(cfg)
        per_det = probs.mean(axis=0)  # alternating pattern averages the symbols
        for d in range(4):
            expected = n * per_det[d]
            sigma = math.sqrt(n * per_det[d] * (1 - per_det[d]))
            assert abs(bob.detector_counts[d] - expected) <= 3 * sigma, (trial, d)

        analytic = expected_rates(cfg)
        w = analytic.sifted_rate / cfg.source.rep_rate
        assert abs(bob.n_sifted - n * w) <= 3 * math.sqrt(n * w * (1 - w)), trial
        q_sigma = math.sqrt(analytic.qber * (1 - analytic.qber) / bob.n_sifted)
        assert abs(bob.ground_truth_qber - analytic.qber) <= 3 * q_sigma, trial
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report(4, f"5 randomized configs matched in {elapsed:.1f} s")


def test_criterion_5_intercept_resend_limit():
    """Ideal separation recovers the textbook attack statistics."""
    icfg = ideal_config()
    closed = intercept_resend_stats(icfg.pulse, icfg.receiver)
    assert abs(closed.q_ir - 0.25) < 1e-9
    assert abs(closed.i_ir - 0.5) < 1e-9

    sim = simulate_intercept_resend(
        icfg.pulse, icfg.receiver, 1_000_000, np.random.default_rng(55)
    )
    assert abs(sim.q_hat - 0.25) <= 3 * sim.q_se
    assert abs(sim.i_hat - 0.5) <= 3 * sim.i_se
    _report(5, f"q_ir mc {sim.q_hat:.4f}, i_ir mc {sim.i_hat:.4f} over {sim.n_sifted} events")


def test_criterion_6_gaussian_machinery():
    """Window captures agree with adaptive quadrature to 1e-9 on 1000 cases."""
    from tfqkd.pulse_model import gaussian_capture

    rng = np.random.default_rng(424242)
    worst = 0.0
    for _ in range(1000):
        center = rng.uniform(-5, 5)
        sigma = rng.uniform(0.05, 4.0)
        lo, hi = np.sort(rng.uniform(-12, 12, size=2))
        oracle, _ = integrate.quad(
            lambda x: math.exp(-0.5 * ((x - center) / sigma) ** 2)
            / (sigma * math.sqrt(2 * math.pi)),
            lo,
            hi,
            limit=200,
        )
        worst = max(worst, abs(gaussian_capture(center, sigma, (lo, hi)) - oracle))
    assert worst < 1e-9
    _report(6, f"worst quadrature deviation {worst:.2e}")


def test_criterion_7_end_to_end_key_agreement():
    """Identical confirmed keys over both transports; exact length budget with noise."""
    cfg = lossless_config(seed=77)
    in_proc = run_in_process(cfg, n_pulses=100_000)
    assert in_proc.alice.confirmed and in_proc.bob.confirmed
    assert in_proc.alice.qber_estimate == 0.0
    assert in_proc.alice.final_key_hex == in_proc.bob.final_key_hex

    port = _free_port()
    results = {}

    def serve():
        results["bob"] = run_listener(cfg, ("127.0.0.1", port), n_pulses=100_000, timeout=60.0)

    thread = threading.Thread(target=serve)
    thread.start()
    alice = None
    deadline = time.time() + 60.0
    while alice is None:
        try:
            alice = run_connector(cfg, ("127.0.0.1", port), n_pulses=100_000, timeout=5.0)
        except LinkDown:
            if time.time() > deadline:
                raise
            time.sleep(0.05)
    thread.join()
    assert alice.confirmed and results["bob"].confirmed
    assert alice.final_key_hex == in_proc.alice.final_key_hex
    assert results["bob"].final_key_hex == in_proc.bob.final_key_hex

    # noisy variant: confirmation survives idealized correction, length exact
    noisy = _config_with_qber(0.07, seed=78)
    run = run_in_process(noisy, n_pulses=100_000)
    assert run.alice.confirmed and run.bob.confirmed
    attack = intercept_resend_stats(noisy.pulse, noisy.receiver)
    expected_len = pa_output_length(
        run.alice.pa_input_len, run.alice.qber_estimate, attack, noisy.f_ec, noisy.pa_margin_bits
    )
    assert run.alice.pa_output_len == expected_len
    assert run.bob.pa_output_len == expected_len
    _report(
        7,
        f"transports agree on {in_proc.alice.pa_output_len} bits; "
        f"noisy run ({run.bob.ground_truth_qber:.3f} true QBER) confirmed at {expected_len} bits",
    )


def test_criterion_8_toeplitz_hashing():
    """Dense-matrix oracle equivalence and the two-universal collision bound."""
    from test_postprocessing import dense_toeplitz_oracle

    rng = np.random.default_rng(31415)
    for _ in range(100):
        n = int(rng.integers(8, 129))
        m = int(rng.integers(1, min(n, 64) + 1))
        p = PAParameters(
            input_len=n, output_len=m, seed=rng.integers(0, 2, size=n + m - 1, dtype=np.uint8)
        )
        key = rng.integers(0, 2, size=n, dtype=np.uint8)
        np.testing.assert_array_equal(toeplitz_hash(key, p), dense_toeplitz_oracle(key, p))

    for out_len in (8, 10, 12):
        collisions = 0
        trials = 10_000
        for _ in range(trials):
            a = rng.integers(0, 2, size=48, dtype=np.uint8)
            b = rng.integers(0, 2, size=48, dtype=np.uint8)
            if np.array_equal(a, b):
                continue
            p = PAParameters(
                input_len=48,
                output_len=out_len,
                seed=rng.integers(0, 2, size=47 + out_len, dtype=np.uint8),
            )
            if np.array_equal(toeplitz_hash(a, p), toeplitz_hash(b, p)):
                collisions += 1
        assert collisions / trials <= 3 * 2.0**-out_len, out_len
    _report(8, "oracle equivalence on 100 instances, collision bound at k=8,10,12")


def test_criterion_9_wire_protocol():
    """Random frame round-trips plus the two pinned example encodings."""
    assert encode_frame(Frame(MessageType.HELLO, b"")) == bytes.fromhex("0000000101")
    assert encode_frame(Frame(MessageType.QBER_REPORT, b"\xab\xcd")) == bytes.fromhex(
        "0000000306abcd"
    )

    rng = np.random.default_rng(999)
    types = list(MessageType)
    for _ in range(10_000):
        frame = Frame(types[int(rng.integers(0, len(types)))], rng.bytes(int(rng.integers(0, 128))))
        decoded, _ = decode_frame(encode_frame(frame))
        assert decoded == frame
    _report(9, "10000 random frames round-tripped bit-exact")


def _free_port() -> int:
    import socket

    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def _config_with_qber(target: float, seed: int):
    """Lossless config with the noise rate tuned so the analytic QBER hits target."""
    from scipy.optimize import brentq

    base = lossless_config(seed=seed)

    def qber_of(noise):
        det = replace(base.detector, dark_rate=noise)
        return expected_rates(replace(base, detector=det)).qber - target

    noise = brentq(qber_of, 0.0, 0.3 / base.detector.gate_width, xtol=1e-3)
    return replace(base, detector=replace(base.detector, dark_rate=noise))
