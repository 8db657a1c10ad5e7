from .models import (
    POOLED_SAMPLES,
    REDEPLOY_SAMPLES,
    LayoutError,
    LivenessTable,
    NodeState,
    Placement,
    ServiceLayout,
    ServiceSpec,
    StartTimeModel,
)
from .registry import OwnershipViolation, ServiceRegistry
from .failover import (
    FailoverManager,
    FailoverPlan,
    decode_heartbeat,
    encode_heartbeat,
    first_alive_fallback,
    plan_failover,
)
