from .kernel import (
    GLOBAL,
    US_PER_HOUR,
    US_PER_MIN,
    US_PER_MS,
    US_PER_S,
    Event,
    EventHandle,
    SchedulingError,
    Simulator,
    UnknownStreamError,
    seconds,
)
