from dataclasses import dataclass, field

import pytest

from src.protocol.frame import FrameKind
from src.protocol.transport import ReliableTransport
from src.radio.medium import RadioMedium, ReceptionRules
from src.radio.params import RadioParams
from src.radio.propagation import LinkTable, NodePosition, PathLossModel
from src.sim.kernel import Simulator


def make_links(positions: dict[int, tuple[float, float, float]], sigma: float = 0.0) -> LinkTable:
    links = LinkTable(
        {n: NodePosition(n, *xyz) for n, xyz in positions.items()},
        PathLossModel(shadowing_sigma_db=sigma),
    )
    links.freeze_shadowing(None)
    return links


def make_medium(
    sim: Simulator,
    positions: dict[int, tuple[float, float, float]] | None = None,
    params: RadioParams | None = None,
    **kwargs,
) -> RadioMedium:
    positions = positions or {1: (0, 0, 0), 2: (5, 0, 0), 3: (0, 6, 0)}
    return RadioMedium(sim, params or RadioParams(), make_links(positions), ReceptionRules(), **kwargs)


@dataclass
class Delivered:
    kind: FrameKind
    source: int
    payload: bytes
    t: int


@dataclass
class TransportNet:
    """Transports on one medium, each recording what it delivers."""

    sim: Simulator
    medium: RadioMedium
    transports: dict[int, ReliableTransport] = field(default_factory=dict)
    inbox: dict[int, list[Delivered]] = field(default_factory=dict)

    def add(self, node: int, **kwargs) -> ReliableTransport:
        inbox: list[Delivered] = []
        self.inbox[node] = inbox
        transport = ReliableTransport(
            self.sim,
            self.medium,
            node,
            on_deliver=lambda k, s, p, t: inbox.append(Delivered(k, s, p, t)),
            **kwargs,
        )
        self.transports[node] = transport
        self.medium.attach(node, lambda wire, rec, rssi: transport.handle_wire(wire, self.sim.now))
        return transport

    def __getitem__(self, node: int) -> ReliableTransport:
        return self.transports[node]


@pytest.fixture
def sim():
    return Simulator(seed=7)


@pytest.fixture
def net(sim):
    medium = make_medium(sim)
    network = TransportNet(sim, medium)
    for node in (1, 2, 3):
        network.add(node)
    return network
