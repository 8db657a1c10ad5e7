from fractions import Fraction

import pytest

from src.protocol.frame import (
    BROADCAST,
    Frame,
    FrameHeader,
    FrameKind,
    decode_frame,
    encode_message,
    encode_nack_body,
)
from src.protocol.gate import RadioAccessGate
from src.protocol.transport import TransferError, TransferState
from src.sim.kernel import US_PER_S, Simulator

from .conftest import TransportNet, make_medium


def _drop_once(net, predicate):
    """Drop the first delivery of every frame matching ``predicate(frame, receiver)``."""
    dropped = set()

    def loss(rec, receiver):
        frame = decode_frame(rec.wire)
        if not predicate(frame, receiver):
            return False
        key = (frame.kind, frame.header.fragment_index, receiver)
        if key in dropped:
            return False
        dropped.add(key)
        return True

    net.medium.loss_filter = loss
    return dropped


# -- gate ---------------------------------------------------------------------

def test_gate_sends_back_to_back():
    sim = Simulator(seed=1)
    medium = make_medium(sim)
    gate = RadioAccessGate(sim, medium, 1)
    sent = []
    air = medium.airtime(100)

    assert gate.gate_acquire(b"a" * 100, 0, lambda s, e: sent.append((s, e))) == 0
    assert gate.gate_acquire(b"b" * 100, 0, lambda s, e: sent.append((s, e))) == air
    sim.run_until(10 * US_PER_S)

    assert sent == [(0, air), (air, 2 * air)]
    assert gate.frames_sent == 2


def test_gate_waits_for_duty_budget():
    sim = Simulator(seed=1)
    medium = make_medium(sim, duty_budget=Fraction(1, 1000))
    gate = RadioAccessGate(sim, medium, 1)
    starts = [gate.gate_acquire(b"z" * 252, 0) for _ in range(10)]
    sim.run_until(3_600 * US_PER_S)

    ends = [r.end for r in medium.records]
    assert len(medium.records) == 10
    assert starts == [r.start for r in medium.records]
    assert medium.records[-1].start > ends[-2]
    assert gate.deferrals == 1


def test_gate_shutdown_drops_queue():
    sim = Simulator(seed=1)
    gate = RadioAccessGate(sim, make_medium(sim), 1)
    gate.gate_acquire(b"a", 0)
    gate.gate_acquire(b"b", 0)
    assert gate.shutdown() == 2
    assert gate.gate_acquire(b"c", 0) is None
    sim.run_until(US_PER_S)
    assert gate.frames_sent == 0


# -- reliable transfer --------------------------------------------------------

def test_clean_transfer_delivers_once_with_one_ack(net, sim):
    payload = bytes(range(200)) * 5
    done = []
    transfer = net[1].send_reliable(2, FrameKind.DATA, payload, 0, on_complete=lambda x, t: done.append(t))
    sim.run_until(60 * US_PER_S)

    assert transfer.state is TransferState.COMPLETED
    assert transfer.fragment_total == 6
    assert [d.payload for d in net.inbox[2]] == [payload]
    assert net.inbox[2][0].source == 1
    assert net.inbox[3] == []
    assert net[2].acks_sent == 1
    assert net[1].retransmissions == 0
    assert done == [transfer.finished_at]


def test_missing_fragments_are_nacked_and_resent(net, sim):
    _drop_once(net, lambda f, r: r == 2 and f.kind is FrameKind.DATA and f.header.fragment_index in (2, 5))
    payload = b"q" * 1000
    transfer = net[1].send_reliable(2, FrameKind.DATA, payload, 0)
    sim.run_until(120 * US_PER_S)

    assert transfer.state is TransferState.COMPLETED
    assert net[2].nacks_sent == 1
    assert net[1].retransmissions == 2
    assert transfer.retransmissions == 2
    assert [d.payload for d in net.inbox[2]] == [payload]


def test_lost_ack_triggers_resend_and_reack_without_duplicate_delivery(net, sim):
    _drop_once(net, lambda f, r: r == 1 and f.kind is FrameKind.ACK)
    transfer = net[1].send_reliable(2, FrameKind.METRICS_DATA, b"small", 0)
    sim.run_until(120 * US_PER_S)

    assert transfer.state is TransferState.COMPLETED
    assert net[1].retransmissions == 1
    assert net[2].acks_sent == 2
    assert len(net.inbox[2]) == 1
    assert net.inbox[2][0].kind is FrameKind.METRICS_DATA


def test_transfer_fails_after_retry_budget(net, sim):
    net[2].shutdown()
    failed = []
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"x", 0, on_failed=lambda x, t: failed.append(x))
    sim.run_until(300 * US_PER_S)

    assert transfer.state is TransferState.FAILED
    assert failed == [transfer]
    assert transfer.attempts == [6]
    assert net[1].retransmissions == 5
    assert net[1].transfers_failed == 1
    assert "exhausted" in transfer.failure_reason


@pytest.mark.parametrize(
    "dest,kind,payload",
    [
        (1, FrameKind.DATA, b"x"),
        (BROADCAST, FrameKind.DATA, b"x"),
        (2, FrameKind.ACK, b""),
        (2, FrameKind.DATA, b"x" * 2000),
    ],
)
def test_send_reliable_rejects(dest, kind, payload):
    sim = Simulator(seed=1)
    net = TransportNet(sim, make_medium(sim))
    net.add(1, max_message_size=1024)
    with pytest.raises(TransferError):
        net[1].send_reliable(dest, kind, payload, 0)


def test_offline_node_cannot_send(net):
    net[1].shutdown()
    with pytest.raises(TransferError):
        net[1].send_reliable(2, FrameKind.DATA, b"x", 0)
    assert net[1].send_best_effort(BROADCAST, FrameKind.HEARTBEAT, b"", 0) is None


def test_shutdown_fails_active_transfers(net):
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"x" * 500, 0)
    net[1].shutdown()
    assert transfer.state is TransferState.FAILED
    assert transfer.failure_reason == "node offline"
    assert net[1].active_transfers() == []


def test_best_effort_broadcast_reaches_everyone_without_acks(net, sim):
    net[1].send_best_effort(BROADCAST, FrameKind.DATA, b"hi", 0)
    net[1].send_best_effort(BROADCAST, FrameKind.HEARTBEAT, b"grafana@0", 0)
    sim.run_until(10 * US_PER_S)

    for node in (2, 3):
        assert [(d.kind, d.payload) for d in net.inbox[node]] == [
            (FrameKind.DATA, b"hi"),
            (FrameKind.HEARTBEAT, b"grafana@0"),
        ]
    assert net[2].acks_sent == net[3].acks_sent == 0


def test_best_effort_data_must_fit_one_fragment(net):
    with pytest.raises(TransferError):
        net[1].send_best_effort(2, FrameKind.DATA, b"x" * 500, 0)


def test_frames_for_other_nodes_still_count_as_heard(net, sim):
    heard = []
    net[3].on_frame_heard = lambda source, t: heard.append(source)
    net[1].send_reliable(2, FrameKind.DATA, b"x", 0)
    sim.run_until(10 * US_PER_S)

    assert 1 in heard and 2 in heard
    assert net.inbox[3] == []


def test_malformed_wire_counts_as_protocol_error(net):
    net[2].handle_wire(b"\x00", 0)
    assert net[2].protocol_errors == 1


def test_stray_ack_is_ignored(net):
    net[1].on_frame_received(Frame(FrameHeader(FrameKind.ACK, 2, 1, 99)), 0)
    assert net[1].transfers_completed == 0


def test_truncated_nack_only_confirms_below_highest_listed(net):
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"\x00" * 30_000, 0)
    assert transfer.fragment_total == 166
    listed = list(range(10, 131))
    nack = Frame(FrameHeader(FrameKind.NACK, 2, 1, transfer.key[1]), encode_nack_body(listed))

    net[1].on_frame_received(nack, 0)

    assert transfer.unacked_indices() == list(range(10, 166))


def test_full_nack_confirms_everything_unlisted(net):
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"q" * 1000, 0)
    nack = Frame(FrameHeader(FrameKind.NACK, 2, 1, transfer.key[1]), encode_nack_body([2, 5]))
    net[1].on_frame_received(nack, 0)
    assert transfer.unacked_indices() == [2, 5]


def test_gap_timeout_floor_and_scaling(net):
    air = net[1].full_frame_airtime()
    assert net[1].gap_timeout(1) == 2 * US_PER_S
    assert net[1].gap_timeout(6) == 12 * air


def test_idle_reassembly_buffers_expire(net, sim):
    net[1].shutdown()
    # lone first fragment of a three-fragment message whose sender is gone
    first = encode_message(FrameKind.DATA, 1, 2, 0, b"m" * 512)[0]
    net[2].handle_wire(first.encode(), 0)
    assert (1, 0) in net[2].reassembly

    sim.run_until(11 * 60 * US_PER_S)

    assert (1, 0) not in net[2].reassembly
    assert net[2].expired_messages == 1
    assert net[2].nacks_sent == 6


def test_nack_relisting_confirmed_fragments_marks_them_unacked_again(net):
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"q" * 1000, 0)
    mid = transfer.key[1]
    for missing in ([4, 5], [0, 1, 2, 3]):
        nack = Frame(FrameHeader(FrameKind.NACK, 2, 1, mid), encode_nack_body(missing))
        net[1].on_frame_received(nack, 0)
    assert transfer.unacked_indices() == [0, 1, 2, 3]


def test_transfer_terminates_after_disjoint_nack_rounds(net, sim):
    net[2].shutdown()
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"q" * 1000, 0)
    mid = transfer.key[1]
    for missing in ([4, 5], [0, 1, 2, 3]):
        nack = Frame(FrameHeader(FrameKind.NACK, 2, 1, mid), encode_nack_body(missing))
        net[1].on_frame_received(nack, 0)
    sim.run_until(6 * 3_600 * US_PER_S)

    assert transfer.state is TransferState.FAILED
    air = net[1].full_frame_airtime()
    per_round = 2 * net[1].gap_timeout(6) + 2 * air + 6 * air
    assert transfer.finished_at <= (transfer.max_retries + 1) * per_round


def test_fully_confirmed_transfer_without_ack_resends_last_fragment(net, sim):
    net[2].shutdown()
    transfer = net[1].send_reliable(2, FrameKind.DATA, b"q" * 1000, 0)
    transfer.unacked = 0
    sim.run_until(6 * 3_600 * US_PER_S)

    assert transfer.state is TransferState.FAILED
    assert transfer.attempts == [1, 1, 1, 1, 1, 6]


def test_duplicate_fragments_queue_a_single_ack(net, sim):
    wire = encode_message(FrameKind.DATA, 1, 2, 0, b"hello")[0].encode()
    for _ in range(3):
        net[2].handle_wire(wire, 0)
    assert net[2].acks_sent == 1
    assert net[2].gate.queued == 1

    sim.run_until(10 * US_PER_S)
    net[2].handle_wire(wire, sim.now)
    assert net[2].acks_sent == 2
    assert len(net.inbox[2]) == 1
