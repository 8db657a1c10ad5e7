from .params import (
    DEFAULT_SENSITIVITY,
    RadioError,
    RadioParams,
    airtime,
    payload_symbols,
    sensitivity,
)
from .propagation import LinkTable, NodePosition, PathLossModel, rssi_at
from .duty_cycle import DutyCycleLedger, max_window_airtime
from .medium import (
    MAX_FRAME_BYTES,
    Accepted,
    Deferred,
    RadioMedium,
    ReceptionRules,
    resolve_reception,
)
