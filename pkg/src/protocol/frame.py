"""On-air frame format.

Header (10 bytes, big-endian)::

    byte 0     version (high nibble) | kind (low nibble)
    byte 1     source node id
    byte 2     destination node id (255 = broadcast)
    byte 3     reserved, always 0
    bytes 4-5  message id (per-source counter, wraps at 65536)
    bytes 6-7  fragment index
    bytes 8-9  fragment total

Data-kind bodies carry a slice of the base64 text of the whole payload.
"""

import base64
import binascii
import math
import struct
from dataclasses import dataclass
from enum import IntEnum

PROTOCOL_VERSION = 1
HEADER_FORMAT = ">BBBBHHH"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
MAX_FRAME_SIZE = 252
MAX_BODY_SIZE = MAX_FRAME_SIZE - HEADER_SIZE
BROADCAST = 255
DEFAULT_MAX_MESSAGE_SIZE = 1 << 20
MAX_NACK_INDICES = MAX_BODY_SIZE // 2

_B64_ALPHABET = frozenset(
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/="
)


class FrameError(ValueError):
    pass


class FrameKind(IntEnum):
    DATA = 0
    ACK = 1
    NACK = 2
    HEARTBEAT = 3
    BUNDLE_DATA = 4
    METRICS_DATA = 5

    @property
    def is_data(self) -> bool:
        return self in DATA_KINDS


DATA_KINDS = frozenset({FrameKind.DATA, FrameKind.BUNDLE_DATA, FrameKind.METRICS_DATA})


@dataclass(frozen=True)
class FrameHeader:
    kind: FrameKind
    source: int
    dest: int
    message_id: int
    fragment_index: int = 0
    fragment_total: int = 1
    version: int = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        if not 0 <= self.version <= 0xF:
            raise FrameError(f"version {self.version} does not fit 4 bits")
        for name in ("source", "dest"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFF:
                raise FrameError(f"{name} {value} does not fit 8 bits")
        for name in ("message_id", "fragment_index", "fragment_total"):
            value = getattr(self, name)
            if not 0 <= value <= 0xFFFF:
                raise FrameError(f"{name} {value} does not fit 16 bits")
        if self.fragment_total < 1:
            raise FrameError("fragment_total must be at least 1")
        if self.fragment_index >= self.fragment_total:
            raise FrameError(
                f"fragment_index {self.fragment_index} >= fragment_total {self.fragment_total}"
            )

    def pack(self) -> bytes:
        return struct.pack(
            HEADER_FORMAT,
            (self.version << 4) | int(self.kind),
            self.source,
            self.dest,
            0,
            self.message_id,
            self.fragment_index,
            self.fragment_total,
        )


@dataclass(frozen=True)
class Frame:
    header: FrameHeader
    body: bytes = b""

    def __post_init__(self) -> None:
        if len(self.body) > MAX_BODY_SIZE:
            raise FrameError(f"body of {len(self.body)} bytes exceeds {MAX_BODY_SIZE}")
        if self.header.kind in DATA_KINDS and not _B64_ALPHABET.issuperset(self.body):
            raise FrameError("data frame body contains non-base64 bytes")

    @property
    def kind(self) -> FrameKind:
        return self.header.kind

    @property
    def key(self) -> tuple[int, int]:
        return (self.header.source, self.header.message_id)

    def encode(self) -> bytes:
        return self.header.pack() + self.body


def fragment_count(payload_len: int) -> int:
    b64_len = 4 * math.ceil(payload_len / 3)
    return max(1, math.ceil(b64_len / MAX_BODY_SIZE))


def encode_message(
    kind: FrameKind,
    source: int,
    dest: int,
    message_id: int,
    payload: bytes,
    max_message_size: int = DEFAULT_MAX_MESSAGE_SIZE,
) -> list[Frame]:
    """Base64-encode the whole payload, then slice it into frame bodies."""
    if len(payload) > max_message_size:
        raise FrameError(
            f"message of {len(payload)} bytes exceeds the {max_message_size}-byte limit"
        )
    text = base64.b64encode(payload)
    chunks = [text[i:i + MAX_BODY_SIZE] for i in range(0, len(text), MAX_BODY_SIZE)] or [b""]
    if len(chunks) > 0xFFFF:
        raise FrameError(f"message needs {len(chunks)} fragments, limit is 65535")
    message_id &= 0xFFFF
    return [
        Frame(
            FrameHeader(
                kind=FrameKind(kind),
                source=source,
                dest=dest,
                message_id=message_id,
                fragment_index=i,
                fragment_total=len(chunks),
            ),
            chunk,
        )
        for i, chunk in enumerate(chunks)
    ]


def decode_payload(bodies: list[bytes]) -> bytes:
    try:
        return base64.b64decode(b"".join(bodies), validate=True)
    except binascii.Error as e:
        raise FrameError(f"reassembled payload is not valid base64: {e}") from None


def decode_frame(wire: bytes) -> Frame:
    if len(wire) < HEADER_SIZE:
        raise FrameError(f"frame of {len(wire)} bytes is shorter than the {HEADER_SIZE}-byte header")
    if len(wire) > MAX_FRAME_SIZE:
        raise FrameError(f"frame of {len(wire)} bytes exceeds {MAX_FRAME_SIZE}")
    first, source, dest, reserved, message_id, index, total = struct.unpack(
        HEADER_FORMAT, wire[:HEADER_SIZE]
    )
    version, kind_value = first >> 4, first & 0xF
    if version != PROTOCOL_VERSION:
        raise FrameError(f"protocol version {version}, expected {PROTOCOL_VERSION}")
    if reserved != 0:
        raise FrameError(f"reserved header byte is {reserved:#04x}")
    try:
        kind = FrameKind(kind_value)
    except ValueError:
        raise FrameError(f"unknown frame kind {kind_value}") from None
    header = FrameHeader(kind, source, dest, message_id, index, total, version)
    return Frame(header, bytes(wire[HEADER_SIZE:]))


def encode_nack_body(indices: list[int]) -> bytes:
    if len(indices) > MAX_NACK_INDICES:
        raise FrameError(f"NACK carries at most {MAX_NACK_INDICES} indices")
    return struct.pack(f">{len(indices)}H", *indices)


def decode_nack_body(body: bytes) -> list[int]:
    if len(body) % 2:
        raise FrameError("NACK body length must be even")
    return list(struct.unpack(f">{len(body) // 2}H", body))
