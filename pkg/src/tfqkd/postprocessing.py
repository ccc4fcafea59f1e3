"""Leakage accounting, Toeplitz privacy amplification and key confirmation.

Reconciliation itself is modeled, not executed: an idealized oracle repairs
the receiver's sifted key while the leakage it would have cost is charged
against the privacy-amplification output length.  Compression uses a fully
pinned Toeplitz matrix over GF(2) so independent implementations produce
identical keys from identical seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .link import Frame, Link, MessageType, ProtocolError, pack_bits, unpack_bits
from .security import AttackReport, binary_entropy, secret_fraction

__all__ = [
    "PAParameters",
    "ec_leakage",
    "pa_output_length",
    "toeplitz_hash",
    "key_confirm",
    "CONFIRM_HASH_BITS",
]

CONFIRM_HASH_BITS = 64


@dataclass(frozen=True, eq=False)
class PAParameters:
    """Toeplitz compression parameters.

    ``seed`` holds input_len + output_len - 1 bits; matrix entry
    T[i][j] = seed[i - j + input_len - 1].
    """

    input_len: int
    output_len: int
    seed: np.ndarray

    def __post_init__(self) -> None:
        if not (0 < self.output_len <= self.input_len):
            raise ValueError(
                f"need 0 < output_len <= input_len, got {self.output_len}/{self.input_len}"
            )
        seed = np.asarray(self.seed, dtype=np.uint8)
        expected = self.input_len + self.output_len - 1
        if seed.ndim != 1 or len(seed) != expected:
            raise ValueError(f"seed must hold exactly {expected} bits, got {seed.shape}")
        if seed.size and seed.max() > 1:
            raise ValueError("seed bits must be 0 or 1")
        object.__setattr__(self, "seed", seed)


def ec_leakage(q: float, n: int, f_ec: float) -> int:
    """Bits disclosed by (modeled) reconciliation at error rate q."""
    if n < 0:
        raise ValueError(f"key length must be >= 0, got {n!r}")
    return math.ceil(f_ec * binary_entropy(q) * n)


def pa_output_length(
    n: int, q: float, attack: AttackReport, f_ec: float, margin: int = 64
) -> int:
    """Secret bits extractable from n sifted bits, after margin; floored at 0."""
    if n < 0 or margin < 0:
        raise ValueError("lengths must be >= 0")
    return max(0, math.floor(n * secret_fraction(q, attack, f_ec)) - margin)


def toeplitz_hash(key: np.ndarray, p: PAParameters) -> np.ndarray:
    """Compress ``key`` with the Toeplitz matrix defined by ``p.seed``.

    Output bit i is the GF(2) inner product of matrix row i with the key,
    where T[i][j] = seed[i - j + input_len - 1].  Computed as a binary
    convolution: out[i] = conv(key, seed)[input_len - 1 + i] mod 2.
    """
    bits = np.asarray(key, dtype=np.uint8)
    if bits.ndim != 1 or len(bits) != p.input_len:
        raise ValueError(f"key must hold exactly {p.input_len} bits, got {bits.shape}")
    if bits.size and bits.max() > 1:
        raise ValueError("key bits must be 0 or 1")
    conv = np.convolve(bits.astype(np.int64), p.seed.astype(np.int64))
    return (conv[p.input_len - 1 : p.input_len - 1 + p.output_len] & 1).astype(np.uint8)


def _confirm_hash(key: np.ndarray, seed: np.ndarray) -> np.ndarray:
    n = len(key)
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    out_len = min(CONFIRM_HASH_BITS, n)
    return toeplitz_hash(key, PAParameters(input_len=n, output_len=out_len, seed=seed))


def confirm_seed_length(key_len: int) -> int:
    return key_len + min(CONFIRM_HASH_BITS, key_len) - 1 if key_len else 0


def key_confirm(
    key: np.ndarray, link: Link, rng: np.random.Generator | None = None, initiator: bool = True
) -> bool:
    """One challenge/response round comparing universal hashes of the key.

    The initiator draws a fresh Toeplitz seed, sends it with its own hash,
    and the responder answers with its hash over the same seed.  Both sides
    return True iff the hashes match; a single differing key bit escapes
    detection with probability 2^-64 (less for keys shorter than 64 bits).
    Empty keys confirm vacuously.
    """
    key = np.asarray(key, dtype=np.uint8)
    if initiator:
        if rng is None:
            raise ValueError("initiator needs a random generator for the challenge seed")
        seed = rng.integers(0, 2, size=confirm_seed_length(len(key)), dtype=np.uint8)
        mine = _confirm_hash(key, seed)
        link.send_frame(
            Frame(MessageType.KEY_CONFIRM, bytes([0]) + pack_bits(seed) + pack_bits(mine))
        )
        reply = link.recv_frame()
        if reply.msg_type != MessageType.KEY_CONFIRM or reply.payload[:1] != b"\x01":
            raise ProtocolError("expected a confirmation response")
        theirs, _ = unpack_bits(reply.payload, 1)
        return len(theirs) == len(mine) and bool(np.array_equal(theirs, mine))

    challenge = link.recv_frame()
    if challenge.msg_type != MessageType.KEY_CONFIRM or challenge.payload[:1] != b"\x00":
        raise ProtocolError("expected a confirmation challenge")
    offset = 1
    seed, offset = unpack_bits(challenge.payload, offset)
    theirs, offset = unpack_bits(challenge.payload, offset)
    if len(seed) != confirm_seed_length(len(key)):
        raise ProtocolError("confirmation seed length does not match the key length")
    mine = _confirm_hash(key, seed)
    link.send_frame(Frame(MessageType.KEY_CONFIRM, bytes([1]) + pack_bits(mine)))
    return len(theirs) == len(mine) and bool(np.array_equal(theirs, mine))
