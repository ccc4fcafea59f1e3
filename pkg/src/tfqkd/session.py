"""Two-party protocol execution: preparation, detection, sifting, estimation.

Alice and Bob are independent sequential state machines that interact only
through classical-link frames, so a session runs identically whether the
parties share a process or talk over TCP.  The quantum phase is co-simulated
on both sides from a dedicated random stream derived from the shared config
seed (the handshake digest guarantees both sides use the same physics and
seed); each party's protocol logic then touches only its legitimate view of
that phase — Alice her prepared symbols, Bob his detection records.

Frame order of a session (A = initiator, B = responder):

    A>HELLO  B>HELLO  B>DETECTION_ANNOUNCE  A>SIFT_ACCEPT
    A>SAMPLE_INDICES  B>SAMPLE_BITS  A>QBER_REPORT  A>PA_PARAMS
    A>KEY_CONFIRM(challenge)  B>KEY_CONFIRM(response)

Reconciliation is idealized: Bob repairs his post-estimation key from the
co-simulated ground truth while the leakage a real reconciliation would
have disclosed is charged inside the privacy-amplification output length.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .config import SystemConfig, config_digest
from .link import (
    Frame,
    Link,
    LinkDown,
    MessageType,
    PROTOCOL_VERSION,
    ProtocolError,
    open_inprocess,
    open_socket,
    pack_bits,
    pack_index_list,
    pack_u64,
    unpack_bits,
    unpack_index_list,
    unpack_u64,
)
from .optics_chain import (
    Basis,
    DetectionRecord,
    Outcome,
    PreparePattern,
    SourceConfig,
    classify_clicks,
    sample_clicks,
)
from .postprocessing import (
    PAParameters,
    ec_leakage,
    key_confirm,
    pa_output_length,
    toeplitz_hash,
)
from .security import intercept_resend_stats

__all__ = [
    "PreparationRecord",
    "SiftedKey",
    "SessionResult",
    "SessionAborted",
    "DigestMismatch",
    "InsufficientSampleError",
    "AbortCode",
    "RNG_ALGORITHM",
    "derive_streams",
    "alice_prepare",
    "prepare_symbol_ids",
    "run_quantum_phase",
    "detect_batch",
    "sift",
    "estimate_qber",
    "AliceSession",
    "BobSession",
    "run_in_process",
    "run_listener",
    "run_connector",
]

RNG_ALGORITHM = "numpy-pcg64"
MIN_SAMPLE_BITS = 100

# symbol ids in preparation-cycle order: bases alternate, both bits appear
_CYCLE = np.array([0, 2, 1, 3], dtype=np.uint8)  # PPM0, FSK0, PPM1, FSK1


class AbortCode(enum.IntEnum):
    PROTOCOL = 1
    DIGEST_MISMATCH = 2
    QBER_TOO_HIGH = 3
    INSUFFICIENT_SAMPLE = 4


class SessionAborted(RuntimeError):
    def __init__(self, code: AbortCode, reason: str):
        super().__init__(f"session aborted ({code.name}): {reason}")
        self.code = code
        self.reason = reason


class DigestMismatch(SessionAborted):
    def __init__(self, reason: str = "configuration digests differ"):
        super().__init__(AbortCode.DIGEST_MISMATCH, reason)


class InsufficientSampleError(SessionAborted):
    def __init__(self, reason: str):
        super().__init__(AbortCode.INSUFFICIENT_SAMPLE, reason)


@dataclass(frozen=True)
class PreparationRecord:
    pulse_index: int
    symbol_id: int  # canonical symbol index, 0..3

    @property
    def basis(self) -> Basis:
        return Basis(self.symbol_id >> 1)

    @property
    def bit(self) -> int:
        return self.symbol_id & 1


@dataclass(frozen=True, eq=False)
class SiftedKey:
    """Bit values plus the pulse indices they came from."""

    bits: np.ndarray
    source_indices: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.uint8)
        idx = np.asarray(self.source_indices, dtype=np.uint64)
        if bits.shape != idx.shape or bits.ndim != 1:
            raise ValueError("bits and source_indices must be equal-length 1D arrays")
        if len(idx) > 1 and not np.all(idx[1:] > idx[:-1]):
            raise ValueError("source indices must be strictly increasing")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "source_indices", idx)

    def __len__(self) -> int:
        return len(self.bits)


def derive_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Three independent generators (quantum phase, Alice, Bob) from one seed."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def prepare_symbol_ids(n: int, src: SourceConfig, rng: np.random.Generator) -> np.ndarray:
    """Symbol choice per pulse as canonical symbol ids."""
    if n <= 0:
        raise ValueError(f"pulse count must be positive, got {n!r}")
    if src.pattern == PreparePattern.ALTERNATING:
        reps = -(-n // len(_CYCLE))
        return np.tile(_CYCLE, reps)[:n]
    return rng.integers(0, 4, size=n, dtype=np.uint8)


def alice_prepare(n: int, src: SourceConfig, rng: np.random.Generator) -> list[PreparationRecord]:
    """Preparation records for n pulses (deterministic cycle or i.i.d. uniform)."""
    ids = prepare_symbol_ids(n, src, rng)
    return [PreparationRecord(i, int(s)) for i, s in enumerate(ids)]


@dataclass(frozen=True, eq=False)
class DetectionArrays:
    """Vectorized view of the clicked pulses of one quantum phase."""

    indices: np.ndarray  # pulse indices with >= 1 click, ascending
    arms: np.ndarray  # announced arm per detection (0=PPM, 1=FSK)
    outcomes: np.ndarray  # 0/1 bit or Outcome.DOUBLE_CLICK per detection
    detector_counts: np.ndarray  # total clicks per detector (ppm0, ppm1, fsk0, fsk1)
    n_pulses: int


def _as_symbol_ids(alice: Union[np.ndarray, Sequence[PreparationRecord]]) -> np.ndarray:
    if isinstance(alice, np.ndarray):
        return alice
    return np.array([r.symbol_id for r in alice], dtype=np.uint8)


def detect_batch(
    alice: Union[np.ndarray, Sequence[PreparationRecord]],
    cfg: SystemConfig,
    rng: np.random.Generator,
) -> DetectionArrays:
    """Sample the whole quantum phase for a pulse train."""
    ids = _as_symbol_ids(alice)
    clicks = sample_clicks(ids, cfg, rng)
    detected, arms, outcomes = classify_clicks(clicks, rng)
    return DetectionArrays(
        indices=detected.astype(np.uint64),
        arms=arms,
        outcomes=outcomes,
        detector_counts=clicks.sum(axis=0),
        n_pulses=len(ids),
    )


def run_quantum_phase(
    alice: Union[np.ndarray, Sequence[PreparationRecord]],
    cfg: SystemConfig,
    rng: np.random.Generator,
) -> list[DetectionRecord]:
    """Per-pulse detection sampling; only pulses that clicked are returned."""
    arrays = detect_batch(alice, cfg, rng)
    return [
        DetectionRecord(int(i), Basis(int(a)), Outcome(int(o)))
        for i, a, o in zip(arrays.indices, arrays.arms, arrays.outcomes)
    ]


def _resolve_bits(outcomes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Outcome codes to bits; double clicks become seeded random bits."""
    bits = outcomes.astype(np.uint8).copy()
    double = outcomes == int(Outcome.DOUBLE_CLICK)
    n_double = int(double.sum())
    if n_double:
        bits[double] = rng.integers(0, 2, size=n_double, dtype=np.uint8)
    return bits


def sift(
    alice: Union[np.ndarray, Sequence[PreparationRecord]],
    detections: Union[DetectionArrays, Sequence[DetectionRecord]],
    rng: np.random.Generator,
) -> tuple[SiftedKey, SiftedKey]:
    """Keep detections whose measured arm equals the prepared basis.

    Pure apart from the double-click tiebreak, which is a deterministic
    function of ``rng``; both returned keys share identical source indices.
    """
    ids = _as_symbol_ids(alice)
    if isinstance(detections, DetectionArrays):
        indices, arms, outcomes = detections.indices, detections.arms, detections.outcomes
    else:
        clicked = [d for d in detections if d.outcome != Outcome.NO_CLICK]
        indices = np.array([d.pulse_index for d in clicked], dtype=np.uint64)
        arms = np.array([int(d.arm) for d in clicked], dtype=np.uint8)
        outcomes = np.array([int(d.outcome) for d in clicked], dtype=np.uint8)
    if len(indices) > 1 and not np.all(indices[1:] > indices[:-1]):
        raise ProtocolError("detection indices must be strictly increasing")
    if len(indices) and int(indices[-1]) >= len(ids):
        raise ProtocolError("detection index beyond the prepared pulse train")

    bases = ids[indices.astype(np.int64)] >> 1
    keep = arms == bases
    kept = indices[keep]
    alice_bits = (ids[kept.astype(np.int64)] & 1).astype(np.uint8)
    bob_bits = _resolve_bits(outcomes[keep], rng)
    return (
        SiftedKey(bits=alice_bits, source_indices=kept),
        SiftedKey(bits=bob_bits, source_indices=kept),
    )


def _draw_sample_positions(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    k = int(math.floor(n * fraction))
    if k < MIN_SAMPLE_BITS:
        raise InsufficientSampleError(
            f"estimation needs >= {MIN_SAMPLE_BITS} sampled bits, would get {k}"
        )
    return np.sort(rng.choice(n, size=k, replace=False))


def estimate_qber(
    alice_key: SiftedKey,
    bob_key: SiftedKey,
    sample_fraction: float,
    rng: np.random.Generator,
) -> tuple[float, SiftedKey, SiftedKey, int]:
    """Disclose a random subset, estimate the error rate, drop the subset."""
    if not (0.0 < sample_fraction < 1.0):
        raise ValueError(f"sample_fraction must be in (0, 1), got {sample_fraction!r}")
    if not np.array_equal(alice_key.source_indices, bob_key.source_indices):
        raise ProtocolError("sifted keys must share identical source indices")
    positions = _draw_sample_positions(len(alice_key), sample_fraction, rng)
    mismatches = int(np.sum(alice_key.bits[positions] != bob_key.bits[positions]))
    estimate = mismatches / len(positions)
    mask = np.ones(len(alice_key), dtype=bool)
    mask[positions] = False
    trimmed_a = SiftedKey(alice_key.bits[mask], alice_key.source_indices[mask])
    trimmed_b = SiftedKey(bob_key.bits[mask], bob_key.source_indices[mask])
    return estimate, trimmed_a, trimmed_b, len(positions)


# --- session results ---------------------------------------------------------


@dataclass
class SessionResult:
    role: str
    n_pulses: int
    n_detections: int
    n_sifted: int
    sample_size: int
    qber_estimate: float
    ec_leakage_bits: int
    pa_input_len: int
    pa_output_len: int
    final_key: np.ndarray
    confirmed: bool
    seed: int
    rng_algorithm: str = RNG_ALGORITHM
    detector_counts: Optional[tuple[int, int, int, int]] = None  # receiver side only
    ground_truth_qber: Optional[float] = None  # receiver side only (pre-correction)
    n_corrected: Optional[int] = None  # receiver side only

    @property
    def final_key_hex(self) -> str:
        if len(self.final_key) == 0:
            return ""
        return np.packbits(self.final_key).tobytes().hex()


# --- frame helpers -----------------------------------------------------------


def _send_abort(link: Link, code: AbortCode, reason: str) -> None:
    try:
        link.send_frame(Frame(MessageType.ABORT, bytes([code]) + reason.encode("utf-8")))
    except LinkDown:
        pass  # peer already gone; the local error still propagates


def _raise_abort(frame: Frame) -> None:
    if len(frame.payload) < 1:
        raise ProtocolError("abort frame without a code")
    code = AbortCode(frame.payload[0]) if frame.payload[0] in AbortCode._value2member_map_ else AbortCode.PROTOCOL
    reason = frame.payload[1:].decode("utf-8", errors="replace")
    if code == AbortCode.DIGEST_MISMATCH:
        raise DigestMismatch(reason)
    if code == AbortCode.INSUFFICIENT_SAMPLE:
        raise InsufficientSampleError(reason)
    raise SessionAborted(code, reason)


def _expect(link: Link, msg_type: MessageType) -> Frame:
    frame = link.recv_frame()
    if frame.msg_type == MessageType.ABORT:
        _raise_abort(frame)
    if frame.msg_type != msg_type:
        raise ProtocolError(
            f"expected {msg_type.name}, received {MessageType(frame.msg_type).name}"
        )
    return frame


def _hello_payload(cfg: SystemConfig) -> bytes:
    return bytes([PROTOCOL_VERSION]) + config_digest(cfg)


def _check_hello(frame: Frame, cfg: SystemConfig, link: Link) -> None:
    if len(frame.payload) != 33:
        raise ProtocolError(f"hello payload must be 33 bytes, got {len(frame.payload)}")
    if frame.payload[0] != PROTOCOL_VERSION:
        _send_abort(link, AbortCode.PROTOCOL, "protocol version mismatch")
        raise ProtocolError(f"unsupported protocol version {frame.payload[0]}")
    if frame.payload[1:] != config_digest(cfg):
        _send_abort(link, AbortCode.DIGEST_MISMATCH, "configuration digests differ")
        raise DigestMismatch()


_ANNOUNCE_DTYPE = np.dtype([("idx", ">u8"), ("arm", "u1")])


def _pack_announce(indices: np.ndarray, arms: np.ndarray) -> bytes:
    rec = np.empty(len(indices), dtype=_ANNOUNCE_DTYPE)
    rec["idx"] = indices
    rec["arm"] = arms
    return pack_u64(len(indices)) + rec.tobytes()


def _unpack_announce(payload: bytes) -> tuple[np.ndarray, np.ndarray]:
    count, offset = unpack_u64(payload)
    if len(payload) != offset + count * _ANNOUNCE_DTYPE.itemsize:
        raise ProtocolError("detection announcement has a malformed length")
    rec = np.frombuffer(payload, dtype=_ANNOUNCE_DTYPE, count=count, offset=offset)
    indices = rec["idx"].astype(np.uint64)
    arms = rec["arm"].astype(np.uint8)
    if len(indices) > 1 and not np.all(indices[1:] > indices[:-1]):
        raise ProtocolError("announced indices must be strictly ascending")
    if len(arms) and arms.max() > 1:
        raise ProtocolError("announced arm must be 0 or 1")
    return indices, arms


# --- parties -----------------------------------------------------------------


class AliceSession:
    """Transmitter-side state machine (session initiator)."""

    def __init__(self, cfg: SystemConfig, n_pulses: Optional[int] = None):
        self.cfg = cfg
        self.n_pulses = n_pulses if n_pulses is not None else cfg.n_pulses

    def run(self, link: Link) -> SessionResult:
        cfg = self.cfg
        quantum_rng, rng, _ = derive_streams(cfg.seed)
        symbol_ids = prepare_symbol_ids(self.n_pulses, cfg.source, quantum_rng)

        link.send_frame(Frame(MessageType.HELLO, _hello_payload(cfg)))
        hello = link.recv_frame()
        if hello.msg_type == MessageType.ABORT:
            _raise_abort(hello)
        if hello.msg_type != MessageType.HELLO:
            raise ProtocolError("peer did not answer the handshake")
        _check_hello(hello, cfg, link)

        announce = _expect(link, MessageType.DETECTION_ANNOUNCE)
        indices, arms = _unpack_announce(announce.payload)
        if len(indices) and int(indices[-1]) >= self.n_pulses:
            raise ProtocolError("announced index beyond the agreed pulse train")

        bases = symbol_ids[indices.astype(np.int64)] >> 1
        kept = indices[arms == bases]
        link.send_frame(Frame(MessageType.SIFT_ACCEPT, pack_index_list(kept)))
        key_bits = (symbol_ids[kept.astype(np.int64)] & 1).astype(np.uint8)

        try:
            positions = _draw_sample_positions(len(kept), cfg.sample_fraction, rng)
        except InsufficientSampleError as exc:
            _send_abort(link, AbortCode.INSUFFICIENT_SAMPLE, exc.reason)
            raise
        sample_indices = kept[positions]
        link.send_frame(Frame(MessageType.SAMPLE_INDICES, pack_index_list(sample_indices)))
        sample_frame = _expect(link, MessageType.SAMPLE_BITS)
        bob_bits, _ = unpack_bits(sample_frame.payload)
        if len(bob_bits) != len(positions):
            raise ProtocolError("sample reply has the wrong number of bits")

        mismatches = int(np.sum(key_bits[positions] != bob_bits))
        estimate = mismatches / len(positions)
        link.send_frame(
            Frame(MessageType.QBER_REPORT, pack_u64(mismatches) + pack_u64(len(positions)))
        )
        if estimate > cfg.abort_qber:
            reason = f"estimated QBER {estimate:.4f} above abort threshold {cfg.abort_qber:g}"
            _send_abort(link, AbortCode.QBER_TOO_HIGH, reason)
            raise SessionAborted(AbortCode.QBER_TOO_HIGH, reason)

        mask = np.ones(len(kept), dtype=bool)
        mask[positions] = False
        secret_input = key_bits[mask]
        n_input = len(secret_input)

        attack = intercept_resend_stats(cfg.pulse, cfg.receiver)
        out_len = pa_output_length(n_input, estimate, attack, cfg.f_ec, cfg.pa_margin_bits)
        seed_bits = (
            rng.integers(0, 2, size=n_input + out_len - 1, dtype=np.uint8)
            if out_len
            else np.zeros(0, dtype=np.uint8)
        )
        link.send_frame(
            Frame(
                MessageType.PA_PARAMS,
                pack_u64(n_input) + pack_u64(out_len) + pack_bits(seed_bits),
            )
        )
        if out_len:
            final = toeplitz_hash(
                secret_input, PAParameters(input_len=n_input, output_len=out_len, seed=seed_bits)
            )
        else:
            final = np.zeros(0, dtype=np.uint8)
        confirmed = key_confirm(final, link, rng, initiator=True)

        return SessionResult(
            role="alice",
            n_pulses=self.n_pulses,
            n_detections=len(indices),
            n_sifted=len(kept),
            sample_size=len(positions),
            qber_estimate=estimate,
            ec_leakage_bits=ec_leakage(estimate, n_input, cfg.f_ec),
            pa_input_len=n_input,
            pa_output_len=out_len,
            final_key=final,
            confirmed=confirmed,
            seed=cfg.seed,
        )


class BobSession:
    """Receiver-side state machine (session responder)."""

    def __init__(self, cfg: SystemConfig, n_pulses: Optional[int] = None):
        self.cfg = cfg
        self.n_pulses = n_pulses if n_pulses is not None else cfg.n_pulses

    def run(self, link: Link) -> SessionResult:
        cfg = self.cfg
        quantum_rng, _, rng = derive_streams(cfg.seed)

        hello = link.recv_frame()
        if hello.msg_type == MessageType.ABORT:
            _raise_abort(hello)
        if hello.msg_type != MessageType.HELLO:
            raise ProtocolError("peer did not open with a handshake")
        _check_hello(hello, cfg, link)
        link.send_frame(Frame(MessageType.HELLO, _hello_payload(cfg)))

        # co-simulated quantum phase; protocol logic below only uses detections
        symbol_ids = prepare_symbol_ids(self.n_pulses, cfg.source, quantum_rng)
        detections = detect_batch(symbol_ids, cfg, quantum_rng)

        link.send_frame(
            Frame(
                MessageType.DETECTION_ANNOUNCE,
                _pack_announce(detections.indices, detections.arms),
            )
        )
        accept = _expect(link, MessageType.SIFT_ACCEPT)
        kept, _ = unpack_index_list(accept.payload)
        pos_in_detections = np.searchsorted(detections.indices, kept)
        if np.any(pos_in_detections >= len(detections.indices)) or not np.array_equal(
            detections.indices[pos_in_detections], kept
        ):
            raise ProtocolError("sift acceptance references unannounced indices")
        key_bits = _resolve_bits(detections.outcomes[pos_in_detections], rng)

        # ground truth for diagnostics only (available through the co-simulation)
        truth_bits = (symbol_ids[kept.astype(np.int64)] & 1).astype(np.uint8)
        ground_truth_qber = (
            float(np.mean(key_bits != truth_bits)) if len(kept) else 0.0
        )

        sample_frame = _expect(link, MessageType.SAMPLE_INDICES)
        sample_indices, _ = unpack_index_list(sample_frame.payload)
        positions = np.searchsorted(kept, sample_indices)
        if np.any(positions >= len(kept)) or not np.array_equal(kept[positions], sample_indices):
            raise ProtocolError("sample indices are not part of the sifted key")
        link.send_frame(Frame(MessageType.SAMPLE_BITS, pack_bits(key_bits[positions])))

        report = _expect(link, MessageType.QBER_REPORT)
        mismatches, offset = unpack_u64(report.payload)
        sample_size, _ = unpack_u64(report.payload, offset)
        if sample_size != len(positions):
            raise ProtocolError("error report does not match the disclosed sample")
        estimate = mismatches / sample_size if sample_size else 0.0
        if estimate > cfg.abort_qber:
            _raise_abort(_expect(link, MessageType.ABORT))

        mask = np.ones(len(kept), dtype=bool)
        mask[positions] = False
        remaining_idx = kept[mask]
        bob_remaining = key_bits[mask]
        # idealized reconciliation: repair against the co-simulated truth and
        # charge the corresponding leakage in the output-length budget
        alice_remaining = (symbol_ids[remaining_idx.astype(np.int64)] & 1).astype(np.uint8)
        n_corrected = int(np.sum(bob_remaining != alice_remaining))
        secret_input = alice_remaining
        n_input = len(secret_input)
        leakage = ec_leakage(estimate, n_input, cfg.f_ec)

        pa_frame = _expect(link, MessageType.PA_PARAMS)
        in_len, offset = unpack_u64(pa_frame.payload)
        out_len, offset = unpack_u64(pa_frame.payload, offset)
        seed_bits, _ = unpack_bits(pa_frame.payload, offset)
        if in_len != n_input:
            raise ProtocolError(
                f"peer compresses {in_len} bits but this side holds {n_input}"
            )
        attack = intercept_resend_stats(cfg.pulse, cfg.receiver)
        expected_out = pa_output_length(n_input, estimate, attack, cfg.f_ec, cfg.pa_margin_bits)
        if out_len != expected_out:
            raise ProtocolError(
                f"peer requested {out_len} output bits, local budget allows {expected_out}"
            )
        if out_len:
            final = toeplitz_hash(
                secret_input, PAParameters(input_len=n_input, output_len=out_len, seed=seed_bits)
            )
        else:
            if len(seed_bits):
                raise ProtocolError("seed bits present for an empty output key")
            final = np.zeros(0, dtype=np.uint8)
        confirmed = key_confirm(final, link, initiator=False)

        return SessionResult(
            role="bob",
            n_pulses=self.n_pulses,
            n_detections=len(detections.indices),
            n_sifted=len(kept),
            sample_size=int(sample_size),
            qber_estimate=estimate,
            ec_leakage_bits=leakage,
            pa_input_len=n_input,
            pa_output_len=out_len,
            final_key=final,
            confirmed=confirmed,
            seed=cfg.seed,
            detector_counts=tuple(int(c) for c in detections.detector_counts),
            ground_truth_qber=ground_truth_qber,
            n_corrected=n_corrected,
        )


# --- runners -----------------------------------------------------------------


@dataclass
class InProcessRun:
    alice: SessionResult
    bob: SessionResult
    alice_transcript: list[tuple[str, Frame]]
    bob_transcript: list[tuple[str, Frame]]


def _run_party(session, link: Link, box: dict, key: str) -> None:
    try:
        box[key] = session.run(link)
    except BaseException as exc:  # re-raised by the caller
        box[key + "_error"] = exc


def run_in_process(
    cfg: SystemConfig, n_pulses: Optional[int] = None, record_transcript: bool = False
) -> InProcessRun:
    """Run both parties over an in-process transport; Bob runs on a thread."""
    alice_link, bob_link = open_inprocess(record_transcript=record_transcript)
    box: dict = {}
    bob_thread = threading.Thread(
        target=_run_party,
        args=(BobSession(cfg, n_pulses), bob_link, box, "bob"),
        daemon=True,
    )
    bob_thread.start()
    try:
        _run_party(AliceSession(cfg, n_pulses), alice_link, box, "alice")
    finally:
        alice_link.close()
        bob_thread.join(timeout=60.0)
        bob_link.close()
    if "alice_error" in box:
        raise box["alice_error"]
    if "bob_error" in box:
        raise box["bob_error"]
    return InProcessRun(
        alice=box["alice"],
        bob=box["bob"],
        alice_transcript=alice_link.transcript,
        bob_transcript=bob_link.transcript,
    )


def run_listener(
    cfg: SystemConfig,
    address: tuple[str, int],
    n_pulses: Optional[int] = None,
    timeout: Optional[float] = None,
    record_transcript: bool = False,
) -> SessionResult:
    """Serve one session as the receiver party over TCP."""
    link = open_socket(address, "listen", record_transcript=record_transcript, timeout=timeout)
    try:
        return BobSession(cfg, n_pulses).run(link)
    finally:
        link.close()


def run_connector(
    cfg: SystemConfig,
    address: tuple[str, int],
    n_pulses: Optional[int] = None,
    timeout: Optional[float] = None,
    record_transcript: bool = False,
) -> SessionResult:
    """Run one session as the transmitter party over TCP."""
    link = open_socket(address, "connect", record_transcript=record_transcript, timeout=timeout)
    try:
        return AliceSession(cfg, n_pulses).run(link)
    finally:
        link.close()
