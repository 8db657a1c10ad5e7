from dataclasses import dataclass, field
import math

import numpy as np

from .params import RadioError


@dataclass(frozen=True)
class NodePosition:
    node: int
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def distance_to(self, other: "NodePosition") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class PathLossModel:
    exponent: float = 2.7
    reference_loss_db: float = 40.0  # PL(d0)
    reference_distance_m: float = 1.0
    shadowing_sigma_db: float = 3.0  # 0 disables shadowing

    def loss_db(self, distance_m: float) -> float:
        return self.reference_loss_db + 10 * self.exponent * math.log10(
            distance_m / self.reference_distance_m
        )


def rssi_at(
    tx: NodePosition,
    rx: NodePosition,
    tx_power_dbm: float,
    model: PathLossModel | None = None,
    shadowing_db: float = 0.0,
) -> float:
    """Received power in dBm under log-distance path loss."""
    model = model or PathLossModel()
    if tx.node == rx.node:
        raise RadioError(f"node {tx.node} cannot be its own receiver")
    d = tx.distance_to(rx)
    if d <= 0:
        raise RadioError(f"nodes {tx.node} and {rx.node} share a position")
    return tx_power_dbm - model.loss_db(d) + shadowing_db


@dataclass
class LinkTable:
    """Per-link received power with shadowing frozen at scenario start.

    Shadowing is symmetric: both directions of a link share one draw.
    """

    positions: dict[int, NodePosition]
    model: PathLossModel = field(default_factory=PathLossModel)
    _shadowing: dict[tuple[int, int], float] = field(default_factory=dict, init=False)

    def freeze_shadowing(self, rng: np.random.Generator | None) -> None:
        nodes = sorted(self.positions)
        for i, a in enumerate(nodes):
            for b in nodes[i + 1:]:
                if rng is None or self.model.shadowing_sigma_db <= 0:
                    draw = 0.0
                else:
                    draw = float(rng.normal(0.0, self.model.shadowing_sigma_db))
                self._shadowing[(a, b)] = draw

    def shadowing(self, a: int, b: int) -> float:
        return self._shadowing.get((min(a, b), max(a, b)), 0.0)

    def rssi(self, sender: int, receiver: int, tx_power_dbm: float) -> float:
        return rssi_at(
            self.positions[sender],
            self.positions[receiver],
            tx_power_dbm,
            self.model,
            self.shadowing(sender, receiver),
        )
