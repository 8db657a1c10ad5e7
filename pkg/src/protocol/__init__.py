from .frame import (
    BROADCAST,
    DATA_KINDS,
    HEADER_SIZE,
    MAX_BODY_SIZE,
    MAX_FRAME_SIZE,
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
from .reassembly import (
    AcceptResult,
    FragmentStatus,
    ReassemblyBuffer,
    ReassemblyError,
    ReassemblySet,
)
from .gate import RadioAccessGate
from .transport import (
    DEFAULT_MAX_RETRIES,
    OutboundTransfer,
    ReliableTransport,
    TransferError,
    TransferState,
)
