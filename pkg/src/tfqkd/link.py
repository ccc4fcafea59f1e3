"""Framed classical channel: wire format, codecs and byte-stream transports.

Wire layout of one frame (all integers big-endian):

    u32 length L   covers the type byte plus payload, so L >= 1
    u8  type       one of MessageType
    L-1 bytes      payload

Payload conventions: counts, indices and bit lengths are fixed-width u64;
index lists are sorted strictly ascending; bitstrings are packed most-
significant-bit first, the final partial byte zero-padded, and preceded by
a u64 bit-length field.  These rules are normative so independent
implementations interoperate bit-for-bit; the protocol version travels in
the HELLO frame.

Transports expose an ordered, reliable, bidirectional byte stream with
identical observable semantics whether the peers share a process
(socketpair) or talk over TCP.
"""

from __future__ import annotations

import enum
import socket
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "MessageType",
    "Frame",
    "ProtocolError",
    "NeedMoreData",
    "LinkDown",
    "encode_frame",
    "decode_frame",
    "FrameDecoder",
    "Link",
    "open_inprocess",
    "open_socket",
    "pack_u64",
    "unpack_u64",
    "pack_index_list",
    "unpack_index_list",
    "pack_bits",
    "unpack_bits",
]

PROTOCOL_VERSION = 1
HEADER_SIZE = 4
MAX_PAYLOAD = 2**32 - 2  # payload length must stay below 2^32 - 1


class ProtocolError(RuntimeError):
    """Malformed frame or payload that violates the wire contract."""


class NeedMoreData(Exception):
    """A complete frame is not yet available in the buffered stream."""


class LinkDown(RuntimeError):
    """The underlying byte stream failed or the peer went away."""


class MessageType(enum.IntEnum):
    HELLO = 0x01  # protocol version + config digest
    DETECTION_ANNOUNCE = 0x02  # detected pulse indices + measurement arms
    SIFT_ACCEPT = 0x03  # indices kept after basis comparison
    SAMPLE_INDICES = 0x04  # disclosed subset for error estimation
    SAMPLE_BITS = 0x05  # receiver bits at the disclosed subset
    QBER_REPORT = 0x06  # mismatch count + sample size
    PA_PARAMS = 0x07  # hash input/output lengths + seed bits
    KEY_CONFIRM = 0x08  # confirmation challenge/response
    ABORT = 0x09  # abort code + reason


@dataclass(frozen=True)
class Frame:
    msg_type: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if self.msg_type not in MessageType.__members__.values():
            raise ProtocolError(f"unknown message type 0x{self.msg_type:02x}")
        if len(self.payload) > MAX_PAYLOAD:
            raise ProtocolError(f"payload too large: {len(self.payload)} bytes")


def encode_frame(frame: Frame) -> bytes:
    return struct.pack(">IB", len(frame.payload) + 1, frame.msg_type) + frame.payload


def decode_frame(buf: bytes) -> tuple[Frame, int]:
    """Decode one frame from the head of ``buf``; returns (frame, consumed).

    Raises NeedMoreData on a truncated stream and ProtocolError on a zero
    length or unknown type.
    """
    if len(buf) < HEADER_SIZE:
        raise NeedMoreData(f"have {len(buf)} of {HEADER_SIZE} header bytes")
    (length,) = struct.unpack(">I", buf[:HEADER_SIZE])
    if length == 0:
        raise ProtocolError("zero-length frame")
    total = HEADER_SIZE + length
    if len(buf) < total:
        raise NeedMoreData(f"have {len(buf)} of {total} frame bytes")
    msg_type = buf[HEADER_SIZE]
    if msg_type not in MessageType.__members__.values():
        raise ProtocolError(f"unknown message type 0x{msg_type:02x}")
    return Frame(msg_type=msg_type, payload=bytes(buf[HEADER_SIZE + 1 : total])), total


class FrameDecoder:
    """Incremental stream-to-frame state machine."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> None:
        self._buf.extend(data)

    def next_frame(self) -> Optional[Frame]:
        """Pop one frame if complete, else None; malformed input raises."""
        try:
            frame, consumed = decode_frame(self._buf)
        except NeedMoreData:
            return None
        del self._buf[:consumed]
        return frame

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


# --- payload primitives ---------------------------------------------------


def pack_u64(value: int) -> bytes:
    if not (0 <= value < 2**64):
        raise ProtocolError(f"u64 out of range: {value!r}")
    return struct.pack(">Q", value)


def unpack_u64(buf: bytes, offset: int = 0) -> tuple[int, int]:
    if len(buf) < offset + 8:
        raise ProtocolError("truncated u64")
    return struct.unpack_from(">Q", buf, offset)[0], offset + 8


def pack_index_list(indices: np.ndarray) -> bytes:
    """u64 count followed by strictly ascending u64 indices."""
    arr = np.asarray(indices, dtype=np.uint64)
    if arr.ndim != 1:
        raise ProtocolError("index list must be one-dimensional")
    if len(arr) > 1 and not np.all(arr[1:] > arr[:-1]):
        raise ProtocolError("index list must be strictly ascending")
    return pack_u64(len(arr)) + arr.astype(">u8").tobytes()


def unpack_index_list(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    count, offset = unpack_u64(buf, offset)
    end = offset + 8 * count
    if len(buf) < end:
        raise ProtocolError("truncated index list")
    arr = np.frombuffer(buf, dtype=">u8", count=count, offset=offset).astype(np.uint64)
    if len(arr) > 1 and not np.all(arr[1:] > arr[:-1]):
        raise ProtocolError("duplicate or unsorted indices")
    return arr, end


def pack_bits(bits: np.ndarray) -> bytes:
    """u64 bit length + MSB-first packed bytes, final byte zero-padded."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ProtocolError("bitstring must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ProtocolError("bitstring values must be 0 or 1")
    return pack_u64(len(arr)) + np.packbits(arr).tobytes()


def unpack_bits(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    n_bits, offset = unpack_u64(buf, offset)
    n_bytes = (n_bits + 7) // 8
    end = offset + n_bytes
    if len(buf) < end:
        raise ProtocolError("truncated bitstring")
    packed = np.frombuffer(buf, dtype=np.uint8, count=n_bytes, offset=offset)
    bits = np.unpackbits(packed)[:n_bits]
    if n_bits % 8 and np.any(np.unpackbits(packed)[n_bits:]):
        raise ProtocolError("nonzero padding in final bitstring byte")
    return bits.copy(), end


# --- transports -------------------------------------------------------------

_RECV_CHUNK = 1 << 16


class _SocketTransport:
    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock

    def send_all(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise LinkDown(f"send failed: {exc}") from exc

    def recv_some(self) -> bytes:
        """Blocking read; returns b'' on orderly close."""
        try:
            return self._sock.recv(_RECV_CHUNK)
        except OSError as exc:
            raise LinkDown(f"receive failed: {exc}") from exc

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


@dataclass
class Link:
    """Frame-level endpoint over a byte-stream transport.

    One session per link; frames are read strictly in order.  When
    ``record_transcript`` is set, every frame sent or received is appended
    to ``transcript`` as ('>' or '<', Frame) for replay comparison.
    """

    transport: _SocketTransport
    record_transcript: bool = False
    transcript: list[tuple[str, Frame]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._decoder = FrameDecoder()

    def send_frame(self, frame: Frame) -> None:
        if self.record_transcript:
            self.transcript.append((">", frame))
        self.transport.send_all(encode_frame(frame))

    def recv_frame(self) -> Frame:
        while True:
            frame = self._decoder.next_frame()
            if frame is not None:
                if self.record_transcript:
                    self.transcript.append(("<", frame))
                return frame
            data = self.transport.recv_some()
            if not data:
                raise LinkDown("peer closed the connection mid-session")
            self._decoder.feed(data)

    def close(self) -> None:
        self.transport.close()


def open_inprocess(record_transcript: bool = False) -> tuple[Link, Link]:
    """Connected in-process link pair with byte-stream semantics."""
    a, b = socket.socketpair()
    return (
        Link(_SocketTransport(a), record_transcript=record_transcript),
        Link(_SocketTransport(b), record_transcript=record_transcript),
    )


def open_socket(
    address: tuple[str, int],
    role: str,
    record_transcript: bool = False,
    timeout: Optional[float] = None,
) -> Link:
    """TCP transport; ``role`` is 'listen' (one peer) or 'connect'.

    Connection failures surface as LinkDown.
    """
    if role == "listen":
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind(address)
            server.listen(1)
            if timeout is not None:
                server.settimeout(timeout)
            conn, _ = server.accept()
            conn.settimeout(None)
        except OSError as exc:
            server.close()
            raise LinkDown(f"listen on {address} failed: {exc}") from exc
        server.close()
        return Link(_SocketTransport(conn), record_transcript=record_transcript)
    if role == "connect":
        try:
            sock = socket.create_connection(address, timeout=timeout)
            sock.settimeout(None)
        except OSError as exc:
            raise LinkDown(f"connect to {address} failed: {exc}") from exc
        return Link(_SocketTransport(sock), record_transcript=record_transcript)
    raise ValueError(f"role must be 'listen' or 'connect', got {role!r}")
