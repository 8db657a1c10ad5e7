import pytest

from src.metrics.git_sync import (
    FULL_BASE,
    GENESIS_VERSION,
    ApplyOutcome,
    Bundle,
    BundleError,
    GitSyncManager,
    NodeFileState,
    apply_bundle,
    make_bundle,
    next_version,
)
from src.protocol.frame import FrameKind
from src.protocol.transport import ReliableTransport
from src.sim.kernel import US_PER_S, Simulator

from .conftest import make_medium

V1 = next_version(GENESIS_VERSION, 1)
V2 = next_version(V1, 2)


class SyncCluster:
    """Node 2 publishes, nodes 1 and 3 follow."""

    def __init__(self):
        self.sim = Simulator(seed=3)
        self.medium = make_medium(self.sim)
        self.journal = {}
        self.transports = {}
        self.syncs = {}
        for n in (1, 2, 3):
            transport = ReliableTransport(
                self.sim, self.medium, n, on_deliver=lambda k, s, p, t, n=n: self._deliver(n, k, s, p, t)
            )
            self.medium.attach(n, lambda w, r, pw, tr=transport: tr.handle_wire(w, self.sim.now))
            self.transports[n] = transport
            self.syncs[n] = GitSyncManager(
                self.sim, n, [1, 2, 3], transport, self.journal, publisher=2, resync_bytes=1024
            )
            self.syncs[n].start(0)

    def _deliver(self, node, kind, source, payload, t):
        if kind is FrameKind.BUNDLE_DATA:
            self.syncs[node].on_bundle(source, payload, t)
        else:
            self.syncs[node].on_data(source, payload, t)

    def run_for(self, seconds):
        self.sim.run_until(self.sim.now + seconds * US_PER_S)

    def versions(self):
        return {n: s.state.current_version for n, s in self.syncs.items()}


def test_bundle_wire_format():
    bundle = make_bundle(GENESIS_VERSION, V1, 100)
    wire = bundle.encode()
    head = wire.split(b"\n", 1)[0].split(b" ")
    assert head[0] == b"LHB1"
    assert head[4] == b"100"
    assert Bundle.decode(wire) == bundle
    assert bundle.size_bytes == 100
    assert not bundle.full


@pytest.mark.parametrize(
    "raw",
    [b"GARBAGE", b"XXXX id a b 3\nabc", b"LHB1 id a b 4\nabc", b"LHB1 id a b x\nabc"],
)
def test_bundle_decode_errors(raw):
    with pytest.raises(BundleError):
        Bundle.decode(raw)


def test_make_bundle_is_deterministic_and_checks_versions():
    assert make_bundle(GENESIS_VERSION, V1, 64) == make_bundle(GENESIS_VERSION, V1, 64)
    with pytest.raises(BundleError):
        make_bundle(V1, V1, 10)
    with pytest.raises(BundleError):
        make_bundle(GENESIS_VERSION, V1, -1)


def test_apply_bundle_outcomes():
    state = NodeFileState(1)
    incremental = make_bundle(V1, V2, 10)
    assert apply_bundle(state, incremental) is ApplyOutcome.REJECTED
    assert state.current_version == GENESIS_VERSION

    assert apply_bundle(state, make_bundle(GENESIS_VERSION, V1, 10)) is ApplyOutcome.APPLIED
    assert apply_bundle(state, make_bundle(GENESIS_VERSION, V1, 10)) is ApplyOutcome.DUPLICATE
    assert apply_bundle(state, incremental) is ApplyOutcome.APPLIED

    fresh = NodeFileState(3)
    assert apply_bundle(fresh, make_bundle(FULL_BASE, V2, 10)) is ApplyOutcome.APPLIED
    assert fresh.current_version == V2


def test_published_bundle_reaches_every_peer():
    cluster = SyncCluster()
    bundle = cluster.syncs[2].publish(512, 0)
    cluster.run_for(300)

    assert set(cluster.versions().values()) == {bundle.new_version}
    for peer in (1, 3):
        record = cluster.journal[(bundle.bundle_id, peer)]
        assert record.outcome == "applied"
        assert record.latency > 0
        assert record.frames == 4


def test_node_that_missed_a_bundle_resyncs():
    cluster = SyncCluster()
    cluster.syncs[2].publish(256, 0)
    cluster.run_for(300)

    cluster.transports[3].shutdown()
    cluster.syncs[3].shutdown()
    missed = cluster.syncs[2].publish(256, cluster.sim.now)
    cluster.run_for(300)
    assert cluster.journal[(missed.bundle_id, 3)].outcome == "lost"

    cluster.transports[3].restart()
    cluster.syncs[3].start(cluster.sim.now)
    latest = cluster.syncs[2].publish(256, cluster.sim.now)
    cluster.run_for(300)

    assert cluster.journal[(latest.bundle_id, 3)].outcome == "rejected"
    assert cluster.syncs[3].rejections == 1
    assert set(cluster.versions().values()) == {latest.new_version}
    full = [r for r in cluster.journal.values() if r.node == 3 and r.size_bytes == 1024]
    assert len(full) == 1 and full[0].outcome == "applied"


def test_non_publisher_ignores_resync_requests():
    cluster = SyncCluster()
    cluster.syncs[1].on_data(3, b"RESYNC abc", 0)
    assert cluster.journal == {}


def test_hourly_publisher_cycles_sizes():
    sim = Simulator(seed=1)
    medium = make_medium(sim)
    transport = ReliableTransport(sim, medium, 2, on_deliver=lambda *a: None)
    medium.attach(2, lambda w, r, p: None)
    journal = {}
    sync = GitSyncManager(sim, 2, [2], transport, journal, publisher=2,
                          bundle_interval=3_600 * US_PER_S, bundle_sizes=(512, 1024))
    sync.start(0)
    sim.run_until(3 * 3_600 * US_PER_S)
    assert sync._commits == 3
    assert sync.state.current_version != GENESIS_VERSION


def test_pushes_leave_one_peer_at_a_time():
    cluster = SyncCluster()
    bundle = cluster.syncs[2].publish(512, 0)
    assert cluster.syncs[2].queued_pushes == 1
    assert len(cluster.transports[2].active_transfers()) == 1

    cluster.run_for(300)
    assert cluster.syncs[2].queued_pushes == 0
    first, second = (cluster.journal[(bundle.bundle_id, n)] for n in (1, 3))
    assert first.applied_at < second.applied_at


def test_shutdown_marks_queued_pushes_lost():
    cluster = SyncCluster()
    bundle = cluster.syncs[2].publish(512, 0)
    cluster.transports[2].shutdown()
    cluster.syncs[2].shutdown()
    assert {cluster.journal[(bundle.bundle_id, n)].outcome for n in (1, 3)} == {"lost"}
