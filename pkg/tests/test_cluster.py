import numpy as np
import pytest

from src.cluster.failover import (
    PROBE_PREFIX,
    FailoverManager,
    decode_heartbeat,
    encode_heartbeat,
    first_alive_fallback,
    plan_failover,
)
from src.cluster.models import (
    REDEPLOY_SAMPLES,
    LayoutError,
    LivenessTable,
    NodeState,
    Placement,
    ServiceLayout,
    ServiceSpec,
    StartTimeModel,
)
from src.cluster.registry import ServiceRegistry
from src.protocol.frame import FrameKind, decode_frame
from src.protocol.transport import ReliableTransport
from src.sim.kernel import US_PER_S, Simulator

from .conftest import make_medium

ONE_SECOND = StartTimeModel("constant", value_s=1.0)


def _layout(fallbacks=(2, 3)):
    return ServiceLayout(
        services={"grafana": ServiceSpec("grafana", 8.83, ONE_SECOND)},
        placements={"grafana": Placement(1, fallbacks)},
    )


class Cluster:
    """Three failover managers talking over real transports."""

    def __init__(self, layout, seed=5):
        self.sim = Simulator(seed)
        self.medium = make_medium(self.sim)
        self.layout = layout
        self.registry = ServiceRegistry()
        self.records = []
        self.transports = {}
        self.managers = {}
        for n in (1, 2, 3):
            transport = ReliableTransport(
                self.sim, self.medium, n, on_deliver=lambda k, s, p, t, n=n: self._deliver(n, k, s, p, t)
            )
            manager = FailoverManager(
                self.sim, n, [1, 2, 3], layout, self.registry, transport, on_record=self.records.append
            )
            transport.on_frame_heard = manager.observe
            self.medium.attach(n, lambda w, r, p, tr=transport: tr.handle_wire(w, self.sim.now))
            self.transports[n] = transport
            self.managers[n] = manager

    def _deliver(self, node, kind, source, payload, t):
        if kind is FrameKind.HEARTBEAT:
            self.managers[node].on_heartbeat(source, payload, t)
        elif payload.startswith(PROBE_PREFIX):
            self.managers[node].on_probe(source, payload, t)

    def boot(self):
        for i, (n, manager) in enumerate(self.managers.items()):
            manager.boot(0, self.layout.initial_services(n), i * US_PER_S)

    def kill(self, node):
        t = self.sim.now
        self.medium.set_listening(node, False)
        self.transports[node].shutdown()
        self.managers[node].shutdown(t)

    def __getitem__(self, node):
        return self.managers[node]


# -- start-time models --------------------------------------------------------

def test_constant_start_time():
    assert ONE_SECOND.sample(np.random.default_rng(0), 100.0) == 1_000_000


def test_uniform_start_time_stays_in_range():
    model = StartTimeModel("uniform", low_s=0.5, high_s=0.7)
    rng = np.random.default_rng(0)
    draws = [model.sample(rng, 1.0) for _ in range(50)]
    assert all(500_000 <= d <= 700_000 for d in draws)


def test_empirical_by_size_draws_from_nearest_row():
    model = StartTimeModel("empirical_by_size")
    rng = np.random.default_rng(1)
    allowed = {int(round(s * US_PER_S)) for s in REDEPLOY_SAMPLES[5470.0]}
    assert {model.sample(rng, 5000.0) for _ in range(30)} <= allowed


def test_start_time_model_validation():
    with pytest.raises(LayoutError):
        StartTimeModel("lognormal")
    with pytest.raises(LayoutError):
        StartTimeModel("uniform", low_s=2.0, high_s=1.0)
    with pytest.raises(LayoutError):
        ServiceSpec("x", 0)


# -- layout -------------------------------------------------------------------

@pytest.mark.parametrize(
    "placement",
    [Placement(1, ()), Placement(1, (2, 2)), Placement(1, (1, 2)), Placement(1, (9,))],
)
def test_layout_validation(placement):
    layout = ServiceLayout({"grafana": ServiceSpec("grafana", 8.83)}, {"grafana": placement})
    with pytest.raises(LayoutError):
        layout.validate([1, 2, 3])


def test_layout_lookups():
    layout = _layout()
    layout.validate([1, 2, 3])
    assert layout.primary_of("grafana") == 1
    assert layout.fallbacks_of("grafana") == (2, 3)
    assert layout.initial_services(1) == ["grafana"]
    assert layout.initial_services(2) == []


# -- liveness -----------------------------------------------------------------

def test_liveness_goes_suspect_then_offline_once():
    table = LivenessTable(offline_timeout=90)
    table.track(2, 0)
    assert table.suspect_after == 60

    assert table.check(61) == []
    assert table.state(2) is NodeState.SUSPECT
    assert table.check(91) == [2]
    assert table.check(120) == []
    assert not table.is_alive(2)

    assert table.heartbeat(2, 130) is True
    assert table.state(2) is NodeState.ALIVE
    assert table.heartbeat(2, 140) is False


def test_untracked_nodes_are_offline():
    table = LivenessTable(offline_timeout=90)
    assert table.state(7) is NodeState.OFFLINE
    assert table.last_heartbeat(7) is None
    assert table.heartbeat(7, 5) is False
    assert table.snapshot() == {7: NodeState.ALIVE}


# -- registry -----------------------------------------------------------------

def test_registry_tracks_outages_and_overlaps():
    reg = ServiceRegistry()
    reg.start("grafana", 1, 0)
    assert reg.outage_start("grafana") is None
    reg.stop("grafana", 1, 100)
    assert reg.outage_start("grafana") == 100
    reg.start("grafana", 2, 150)
    reg.start("grafana", 3, 200)
    reg.stop("grafana", 3, 250)

    violations = reg.violations(horizon=1_000)
    assert len(violations) == 1
    v = violations[0]
    assert (v.service, v.nodes, v.start, v.end) == ("grafana", (2, 3), 200, 250)
    assert reg.hosts("grafana") == [2]
    assert reg.stop("grafana", 1, 300) is False


def test_registry_stop_all():
    reg = ServiceRegistry()
    reg.start("a", 1, 0)
    reg.start("b", 1, 0)
    reg.start("c", 2, 0)
    assert reg.stop_all(1, 10) == ["a", "b"]
    assert reg.running_on(1) == []
    assert reg.unplaced(["a", "b", "c"]) == ["a", "b"]


# -- planning -----------------------------------------------------------------

def test_plan_picks_first_alive_fallback():
    layout = _layout()
    table = LivenessTable(90)
    for n in (1, 2, 3):
        table.track(n, 0)
    table.check(100)
    table.heartbeat(3, 100)

    plan = plan_failover(1, layout, table, {"grafana": 1})
    assert plan.moves == [("grafana", 3)]
    assert plan.unplaceable == []
    # same inputs, same answer
    assert plan_failover(1, layout, table, {"grafana": 1}) == plan


def test_plan_reports_unplaceable_and_ignores_other_hosts():
    layout = _layout(fallbacks=(2,))
    table = LivenessTable(90)
    plan = plan_failover(1, layout, table, {"grafana": 1})
    assert plan.moves == [] and plan.unplaceable == ["grafana"]
    assert plan_failover(2, layout, table, {"grafana": 1}).moves == []


def test_custom_target_policy():
    layout = _layout()
    table = LivenessTable(90)
    last = lambda s, fallbacks, off, live: fallbacks[-1]  # noqa: E731
    assert plan_failover(1, layout, table, {"grafana": 1}, last).moves == [("grafana", 3)]
    assert first_alive_fallback("grafana", (1, 2), 1, table) is None


def test_heartbeat_body():
    assert encode_heartbeat({"influxdb": 2, "grafana": 0}) == b"grafana@0,influxdb@2"
    assert decode_heartbeat(b"grafana@0,influxdb@2") == {"grafana": 0, "influxdb": 2}
    assert decode_heartbeat(b"") == {}
    with pytest.raises(ValueError):
        decode_heartbeat(b"grafana@x")


# -- failover manager ---------------------------------------------------------

def test_node_death_moves_service_to_first_fallback():
    cluster = Cluster(_layout())
    cluster.boot()
    cluster.sim.run_until(100 * US_PER_S)
    cluster.kill(1)
    cluster.sim.run_until(400 * US_PER_S)

    assert len(cluster.records) == 1
    record = cluster.records[0]
    assert (record.service, record.from_node, record.to_node) == ("grafana", 1, 2)
    assert record.outage_start == 100 * US_PER_S
    # offline timeout, one liveness check and a probe that runs out of retries
    assert 70 * US_PER_S < record.detection_delay < 130 * US_PER_S
    assert record.start_time == US_PER_S
    assert cluster.registry.hosts("grafana") == [2]
    assert cluster.registry.violations(400 * US_PER_S) == []
    assert cluster[3].host_of("grafana") == 2
    assert cluster[2].running == {"grafana": 1}


def test_killed_service_restarts_locally():
    cluster = Cluster(_layout())
    cluster.boot()
    cluster.sim.run_until(40 * US_PER_S)
    assert cluster[1].kill_service("grafana", cluster.sim.now)
    assert not cluster[1].kill_service("grafana", cluster.sim.now)
    cluster.sim.run_until(300 * US_PER_S)

    assert len(cluster.records) == 1
    record = cluster.records[0]
    assert record.from_node == record.to_node == 1
    assert record.detection_delay <= 5 * US_PER_S
    assert cluster.registry.hosts("grafana") == [1]


def test_no_takeover_while_primary_is_alive():
    cluster = Cluster(_layout())
    cluster.boot()
    cluster.sim.run_until(600 * US_PER_S)
    assert cluster.records == []
    assert all(m.host_of("grafana") == 1 for m in cluster.managers.values())
    assert all(m.heartbeats_sent >= 19 for m in cluster.managers.values())


def test_unplaceable_service_stays_down():
    cluster = Cluster(_layout(fallbacks=(2,)))
    cluster.boot()
    cluster.sim.run_until(50 * US_PER_S)
    cluster.kill(1)
    cluster.kill(2)
    cluster.sim.run_until(400 * US_PER_S)

    assert cluster.records == []
    assert cluster.registry.hosts("grafana") == []


def test_higher_epoch_heartbeat_demotes_local_copy():
    cluster = Cluster(_layout())
    m3 = cluster[3]
    m3.boot(0, ["grafana"], 0)
    m3.on_heartbeat(2, b"grafana@1", 10)
    assert not m3.runs("grafana")
    assert m3.view["grafana"] == (2, 1)


def test_equal_epoch_lower_node_id_wins():
    cluster = Cluster(_layout())
    m2 = cluster[2]
    m2.boot(0, ["grafana"], 0)
    m2.on_heartbeat(3, b"grafana@0", 10)
    assert m2.runs("grafana")
    m2.on_heartbeat(1, b"grafana@0", 20)
    assert not m2.runs("grafana")


def test_pending_redeploy_aborted_when_old_host_speaks():
    cluster = Cluster(_layout())
    m2 = cluster[2]
    m2.boot(0, [], 0)
    assert m2.execute_redeploy("grafana", 1, 100) == 100 + US_PER_S
    m2.on_heartbeat(1, b"grafana@0", 200)
    assert m2.pending == {}
    assert m2.redeploys_aborted == 1


def test_host_of_reports_vacancy():
    cluster = Cluster(_layout())
    m3 = cluster[3]
    m3.boot(0, [], 0)
    assert m3.host_of("grafana") == 1
    m3.on_heartbeat(1, b"", 10)
    assert m3.host_of("grafana") is None
    assert m3.host_of("unknown") is None


def test_takeover_dropped_when_silent_owner_answers():
    cluster = Cluster(_layout())

    def lost_heartbeats(rec, receiver):
        frame = decode_frame(rec.wire)
        return frame.kind is FrameKind.HEARTBEAT and frame.header.source == 1

    cluster.medium.loss_filter = lost_heartbeats
    cluster.boot()
    cluster.sim.run_until(400 * US_PER_S)

    assert cluster.records == []
    assert cluster[2].redeploys_aborted >= 1
    assert cluster[2].probing == {}
    assert cluster.registry.hosts("grafana") == [1]
    assert cluster.registry.violations(400 * US_PER_S) == []


def test_muted_owner_fences_before_fallback_starts():
    cluster = Cluster(_layout())
    cluster.boot()
    cluster.transports[1].gate.shutdown()  # radio dead, node still running
    cluster.sim.run_until(400 * US_PER_S)

    assert cluster[1].fenced == 1
    assert cluster[1].running == {}
    assert [(r.from_node, r.to_node) for r in cluster.records] == [(1, 2)]
    assert cluster.registry.hosts("grafana") == [2]
    assert cluster.registry.violations(400 * US_PER_S) == []


def test_peer_asking_about_a_hosted_service_gets_a_heartbeat():
    cluster = Cluster(_layout())
    m1 = cluster[1]
    m1.boot(0, ["grafana"], 10 * US_PER_S)
    m1.on_probe(2, PROBE_PREFIX + b"grafana", 0)
    assert m1.heartbeats_sent == 1
    m1.on_probe(2, PROBE_PREFIX + b"influxdb", 0)
    assert m1.heartbeats_sent == 1
