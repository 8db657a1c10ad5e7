import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from src.core.models import TransmissionRecord
from src.sim.kernel import US_PER_HOUR, Simulator

from .duty_cycle import DutyCycleLedger
from .params import MAX_PHY_PAYLOAD, RadioError, RadioParams, airtime, sensitivity
from .propagation import LinkTable

logger = logging.getLogger("loraheal")

MAX_FRAME_BYTES = 252

ReceiveCallback = Callable[[bytes, TransmissionRecord, float], None]
LossFilter = Callable[[TransmissionRecord, int], bool]


@dataclass(frozen=True)
class Accepted:
    start: int
    end: int


@dataclass(frozen=True)
class Deferred:
    next_allowed: int


@dataclass(frozen=True)
class ReceptionRules:
    capture_enabled: bool = True
    capture_margin_db: float = 6.0
    sensitivity_table: dict[tuple[int, int], float] | None = None


def resolve_reception(
    overlapping: Iterable[TransmissionRecord],
    receiver: int,
    params: RadioParams,
    rssi: Callable[[TransmissionRecord], float],
    rules: ReceptionRules = ReceptionRules(),
) -> list[TransmissionRecord]:
    """Frames decodable at ``receiver`` out of a set that overlaps in time.

    A lone frame is decoded when it clears sensitivity. Several overlapping
    frames are all lost unless one beats every other by the capture margin.
    """
    candidates = [r for r in overlapping if r.sender != receiver]
    if not candidates:
        return []
    floor = sensitivity(params, rules.sensitivity_table)
    powers = [(rssi(r), r) for r in candidates]
    if len(powers) == 1:
        power, rec = powers[0]
        return [rec] if power >= floor else []
    if not rules.capture_enabled:
        return []
    best_power = max(p for p, _ in powers)
    winners = [r for p, r in powers if p == best_power]
    if len(winners) > 1 or best_power < floor:
        return []
    winner = winners[0]
    if all(best_power - p >= rules.capture_margin_db for p, r in powers if r is not winner):
        return [winner]
    return []


class RadioMedium:
    """Shared single-channel LoRa medium with per-node duty-cycle ledgers."""

    def __init__(
        self,
        sim: Simulator,
        params: RadioParams,
        links: LinkTable,
        rules: ReceptionRules = ReceptionRules(),
        frame_loss_rate: float = 0.0,
        duty_window_us: int = US_PER_HOUR,
        duty_budget: Fraction = Fraction(1, 100),
        duty_policy: str = "window",
    ):
        if not 0.0 <= frame_loss_rate < 1.0:
            raise RadioError(f"frame loss rate must be in [0, 1), got {frame_loss_rate}")
        self.sim = sim
        self.params = params
        self.links = links
        self.rules = rules
        self.frame_loss_rate = frame_loss_rate
        self.loss_filter: LossFilter | None = None
        self.records: list[TransmissionRecord] = []
        self._recent: list[TransmissionRecord] = []
        self._receivers: dict[int, ReceiveCallback] = {}
        self._listening: set[int] = set()
        self._ledgers = {
            node: DutyCycleLedger(duty_window_us, duty_budget, duty_policy)
            for node in links.positions
        }
        self._max_airtime = airtime(params, MAX_PHY_PAYLOAD)

        self.collision_losses = 0
        self.half_duplex_misses = 0
        self.random_losses = 0

    # -- wiring ---------------------------------------------------------

    def attach(self, node: int, on_receive: ReceiveCallback) -> None:
        self._receivers[node] = on_receive
        self._listening.add(node)

    def set_listening(self, node: int, listening: bool) -> None:
        if listening:
            self._listening.add(node)
        else:
            self._listening.discard(node)

    def ledger(self, node: int) -> DutyCycleLedger:
        return self._ledgers[node]

    def airtime(self, length: int) -> int:
        return airtime(self.params, length)

    # -- transmission ---------------------------------------------------

    def try_transmit(self, sender: int, wire: bytes, t: int) -> Accepted | Deferred:
        if len(wire) > MAX_FRAME_BYTES:
            raise RadioError(f"frame of {len(wire)} bytes exceeds {MAX_FRAME_BYTES}")
        ledger = self._ledgers[sender]
        air = self.airtime(len(wire))
        allowed = ledger.admit_time(t, air)
        if allowed > t:
            return Deferred(allowed)

        ledger.record(t, air)
        rec = TransmissionRecord(
            sender=sender,
            length=len(wire),
            start=t,
            end=t + air,
            spreading_factor=self.params.spreading_factor,
            frequency_hz=self.params.frequency_hz,
            wire=wire,
        )
        self.records.append(rec)
        self._recent.append(rec)
        self.sim.schedule(rec.end, self._finish, rec, target=sender, label="tx_end")
        logger.debug(f"[radio] n{sender} on air {len(wire)}B for {air / 1000:.1f}ms")
        return Accepted(rec.start, rec.end)

    def _rssi(self, rec: TransmissionRecord, receiver: int) -> float:
        return self.links.rssi(rec.sender, receiver, self.params.tx_power_dbm)

    def _finish(self, rec: TransmissionRecord) -> None:
        horizon = self.sim.now - 2 * self._max_airtime
        self._recent = [r for r in self._recent if r.end > horizon]
        overlapping = [
            r for r in self._recent
            if r is not rec
            and r.overlaps(rec)
            and r.spreading_factor == rec.spreading_factor
            and r.frequency_hz == rec.frequency_hz
        ]

        deliveries: list[tuple[int, float]] = []
        for receiver in sorted(self._receivers):
            if receiver == rec.sender:
                continue
            power = self._rssi(rec, receiver)
            rec.rssi[receiver] = round(power, 3)
            if receiver not in self._listening:
                continue
            if any(r.sender == receiver for r in overlapping):
                self.half_duplex_misses += 1
                continue
            contenders = [rec] + [r for r in overlapping if r.sender != receiver]
            decoded = resolve_reception(
                contenders, receiver, self.params, lambda r: self._rssi(r, receiver), self.rules
            )
            if not any(r is rec for r in decoded):
                if len(contenders) > 1 and resolve_reception(
                    [rec], receiver, self.params, lambda r: power, self.rules
                ):
                    rec.collided = True
                    self.collision_losses += 1
                continue
            if self.loss_filter is not None and self.loss_filter(rec, receiver):
                self.random_losses += 1
                continue
            if self.frame_loss_rate > 0 and self.sim.rng_draw("loss") < self.frame_loss_rate:
                self.random_losses += 1
                continue
            deliveries.append((receiver, power))

        rec.delivered_to = [r for r, _ in deliveries]
        for receiver, power in deliveries:
            self._receivers[receiver](rec.wire, rec, power)
