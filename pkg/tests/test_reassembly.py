import pytest

from src.protocol.frame import Frame, FrameHeader, FrameKind, encode_message
from src.protocol.reassembly import FragmentStatus, ReassemblyError, ReassemblySet


def _frames(payload=b"p" * 1000, mid=4):
    return encode_message(FrameKind.DATA, 1, 2, mid, payload)


def test_out_of_order_fragments_reassemble():
    frames = _frames()
    rs = ReassemblySet()
    order = [5, 0, 3, 1, 4]
    for t, i in enumerate(order):
        result = rs.accept_fragment(frames[i], t)
        assert result.status is FragmentStatus.INCOMPLETE
    assert rs.missing_fragments((1, 4)) == [2]

    result = rs.accept_fragment(frames[2], 10)
    assert result.status is FragmentStatus.COMPLETE
    assert result.payload == b"p" * 1000
    assert (1, 4) not in rs


def test_duplicate_fragment_is_reported_and_ignored():
    frames = _frames()
    rs = ReassemblySet()
    rs.accept_fragment(frames[0], 0)
    result = rs.accept_fragment(frames[0], 1)
    assert result.status is FragmentStatus.DUPLICATE
    assert result.missing == 5
    assert rs.get((1, 4)).received_count == 1


def test_missing_list_after_gaps():
    frames = _frames()
    rs = ReassemblySet()
    for i in (0, 1, 3, 4):
        rs.accept_fragment(frames[i], 0)
    assert rs.missing_fragments((1, 4)) == [2, 5]


def test_total_mismatch_raises():
    rs = ReassemblySet()
    rs.accept_fragment(_frames()[0], 0)
    other = Frame(FrameHeader(FrameKind.DATA, 1, 2, 4, fragment_index=1, fragment_total=3), b"AAAA")
    with pytest.raises(ReassemblyError):
        rs.accept_fragment(other, 1)


def test_control_frames_are_not_fragments():
    with pytest.raises(ReassemblyError):
        ReassemblySet().accept_fragment(Frame(FrameHeader(FrameKind.ACK, 2, 1, 0)), 0)


def test_unknown_key_has_no_missing_list():
    with pytest.raises(ReassemblyError):
        ReassemblySet().missing_fragments((9, 9))


def test_idle_buffers_expire():
    rs = ReassemblySet(idle_timeout=100)
    rs.accept_fragment(_frames(mid=1)[0], 0)
    rs.accept_fragment(_frames(mid=2)[0], 50)

    assert rs.expire_buffers(120) == [(1, 1)]
    assert len(rs) == 1
    assert rs.expire_buffers(150) == [(1, 2)]


def test_corrupt_base64_on_completion_raises():
    rs = ReassemblySet()
    # "A" alone is not a valid base64 quantum
    frame = Frame(FrameHeader(FrameKind.DATA, 1, 2, 0), b"A")
    with pytest.raises(ReassemblyError):
        rs.accept_fragment(frame, 0)
