from .models import (
    DEFAULT_PAYLOAD_BYTES,
    MAX_HOPS,
    MetricsError,
    MetricsLedger,
    MetricsPacket,
    PacketOutcome,
)
from .ingestor import TimeSeriesStore, format_line
from .collector import DEFAULT_METRIC_INTERVAL, INGEST_SERVICE, LoadModel, MetricsCollector
from .git_sync import (
    GENESIS_VERSION,
    ApplyOutcome,
    Bundle,
    BundleError,
    GitSyncManager,
    NodeFileState,
    apply_bundle,
    make_bundle,
)
