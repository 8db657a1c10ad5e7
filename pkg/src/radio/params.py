from dataclasses import dataclass, replace
from fractions import Fraction
import math

MAX_PHY_PAYLOAD = 255
BANDWIDTHS = (125_000, 250_000, 500_000)

# SX1276 receiver sensitivity in dBm, keyed by (spreading factor, bandwidth).
DEFAULT_SENSITIVITY: dict[tuple[int, int], float] = {
    (7, 125_000): -123.0, (7, 250_000): -120.0, (7, 500_000): -116.0,
    (8, 125_000): -126.0, (8, 250_000): -123.0, (8, 500_000): -119.0,
    (9, 125_000): -129.0, (9, 250_000): -125.0, (9, 500_000): -122.0,
    (10, 125_000): -132.0, (10, 250_000): -128.0, (10, 500_000): -125.0,
    (11, 125_000): -134.5, (11, 250_000): -130.0, (11, 500_000): -128.0,
    (12, 125_000): -137.0, (12, 250_000): -133.0, (12, 500_000): -130.0,
}

LDRO_SYMBOL_LIMIT_US = 16_000


class RadioError(ValueError):
    pass


@dataclass(frozen=True)
class RadioParams:
    spreading_factor: int = 7
    bandwidth_hz: int = 125_000
    coding_rate_denominator: int = 5  # CR 4/5
    tx_power_dbm: int = 20
    frequency_hz: int = 868_000_000
    preamble_symbols: int = 8
    explicit_header: bool = True
    crc_enabled: bool = True
    low_data_rate_optimize: bool = False

    def __post_init__(self) -> None:
        if not 7 <= self.spreading_factor <= 12:
            raise RadioError(f"spreading factor must be 7..12, got {self.spreading_factor}")
        if self.bandwidth_hz not in BANDWIDTHS:
            raise RadioError(f"bandwidth must be one of {BANDWIDTHS}, got {self.bandwidth_hz}")
        if not 5 <= self.coding_rate_denominator <= 8:
            raise RadioError(
                f"coding rate denominator must be 5..8, got {self.coding_rate_denominator}"
            )
        if not -4 <= self.tx_power_dbm <= 20:
            raise RadioError(f"tx power must be -4..20 dBm, got {self.tx_power_dbm}")
        if self.preamble_symbols < 6:
            raise RadioError(f"preamble must be at least 6 symbols, got {self.preamble_symbols}")
        # Transceivers require LDRO once a symbol lasts longer than 16 ms.
        if self.symbol_time_us > LDRO_SYMBOL_LIMIT_US and not self.low_data_rate_optimize:
            object.__setattr__(self, "low_data_rate_optimize", True)

    @property
    def symbol_time(self) -> Fraction:
        return Fraction(2**self.spreading_factor * 1_000_000, self.bandwidth_hz)

    @property
    def symbol_time_us(self) -> float:
        return float(self.symbol_time)

    def with_overrides(self, **changes) -> "RadioParams":
        return replace(self, **changes)


def payload_symbols(params: RadioParams, payload_len: int) -> int:
    sf = params.spreading_factor
    de = 1 if params.low_data_rate_optimize else 0
    ih = 0 if params.explicit_header else 1
    crc = 1 if params.crc_enabled else 0
    numerator = 8 * payload_len - 4 * sf + 28 + 16 * crc - 20 * ih
    blocks = math.ceil(Fraction(numerator, 4 * (sf - 2 * de)))
    return 8 + max(blocks * params.coding_rate_denominator, 0)


def airtime(params: RadioParams, payload_len: int) -> int:
    """Time on air in µs for one frame (SX127x time-on-air model)."""
    if not 0 <= payload_len <= MAX_PHY_PAYLOAD:
        raise RadioError(f"payload length must be 0..{MAX_PHY_PAYLOAD}, got {payload_len}")
    symbols = Fraction(params.preamble_symbols) + Fraction(17, 4) + payload_symbols(
        params, payload_len
    )
    return round(symbols * params.symbol_time)


def sensitivity(
    params: RadioParams,
    table: dict[tuple[int, int], float] | None = None,
) -> float:
    table = table or DEFAULT_SENSITIVITY
    return table[(params.spreading_factor, params.bandwidth_hz)]
