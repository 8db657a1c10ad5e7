import base64

import pytest

from src.protocol.frame import (
    BROADCAST,
    HEADER_SIZE,
    MAX_BODY_SIZE,
    MAX_NACK_INDICES,
    Frame,
    FrameError,
    FrameHeader,
    FrameKind,
    decode_frame,
    decode_nack_body,
    decode_payload,
    encode_message,
    encode_nack_body,
    fragment_count,
)


def test_header_layout():
    header = FrameHeader(FrameKind.METRICS_DATA, source=3, dest=2, message_id=0x1234,
                         fragment_index=1, fragment_total=4)
    assert header.pack() == bytes([0x15, 3, 2, 0, 0x12, 0x34, 0x00, 0x01, 0x00, 0x04])
    assert HEADER_SIZE == 10
    assert MAX_BODY_SIZE == 242


@pytest.mark.parametrize("size,frames", [(0, 1), (1, 1), (180, 1), (181, 2), (512, 3), (1000, 6), (10240, 57)])
def test_fragment_count(size, frames):
    assert fragment_count(size) == frames
    assert len(encode_message(FrameKind.DATA, 1, 2, 0, b"\x00" * size)) == frames


def test_metrics_payload_frame_sizes():
    frames = encode_message(FrameKind.METRICS_DATA, 1, 2, 7, b"m" * 512)
    assert [len(f.encode()) for f in frames] == [252, 252, 210]
    assert all(f.header.fragment_total == 3 for f in frames)
    assert [f.header.fragment_index for f in frames] == [0, 1, 2]


def test_bodies_are_slices_of_the_base64_text():
    payload = bytes(range(256)) * 3
    frames = encode_message(FrameKind.BUNDLE_DATA, 4, 1, 9, payload)
    assert b"".join(f.body for f in frames) == base64.b64encode(payload)
    assert decode_payload([f.body for f in frames]) == payload


def test_decode_frame_restores_header_and_body():
    frame = encode_message(FrameKind.DATA, 5, BROADCAST, 65537, b"hello")[0]
    assert frame.header.message_id == 1
    decoded = decode_frame(frame.encode())
    assert decoded == frame
    assert decoded.key == (5, 1)


def test_oversize_message_rejected():
    with pytest.raises(FrameError):
        encode_message(FrameKind.DATA, 1, 2, 0, b"x" * 101, max_message_size=100)


@pytest.mark.parametrize(
    "wire,reason",
    [
        (b"\x10\x01\x02", "shorter"),
        (bytes([0x20, 1, 2, 0, 0, 0, 0, 0, 0, 1]), "version"),
        (bytes([0x10, 1, 2, 7, 0, 0, 0, 0, 0, 1]), "reserved"),
        (bytes([0x1F, 1, 2, 0, 0, 0, 0, 0, 0, 1]), "kind"),
        (bytes([0x10, 1, 2, 0, 0, 0, 0, 3, 0, 2]), "fragment_index"),
        (bytes([0x10, 1, 2, 0, 0, 0, 0, 0, 0, 1]) + b"!!!!", "base64"),
        (bytes([0x11, 1, 2, 0, 0, 0, 0, 0, 0, 1]) + b"x" * 243, "exceeds"),
    ],
)
def test_decode_frame_rejects_malformed(wire, reason):
    with pytest.raises(FrameError, match=reason):
        decode_frame(wire)


def test_fragment_total_zero_rejected():
    with pytest.raises(FrameError):
        FrameHeader(FrameKind.DATA, 1, 2, 0, fragment_index=0, fragment_total=0)


def test_control_frames_carry_raw_bodies():
    frame = Frame(FrameHeader(FrameKind.HEARTBEAT, 1, BROADCAST, 3), b"grafana@0")
    assert decode_frame(frame.encode()).body == b"grafana@0"
    assert not FrameKind.HEARTBEAT.is_data
    assert FrameKind.METRICS_DATA.is_data


def test_nack_body():
    body = encode_nack_body([2, 5])
    assert body == b"\x00\x02\x00\x05"
    assert decode_nack_body(body) == [2, 5]
    assert MAX_NACK_INDICES == 121
    with pytest.raises(FrameError):
        encode_nack_body(list(range(122)))
    with pytest.raises(FrameError):
        decode_nack_body(b"\x00")
