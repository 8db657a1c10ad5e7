from dataclasses import dataclass
import os

from dotenv import load_dotenv

_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Config:
    # Logging
    log_level: str

    # Outputs
    output_dir: str
    trace_events: bool

    # Scenario parsing
    strict_config: bool
    default_seed: int

    # Summary
    spike_factor: float  # latency > spike_factor * median counts as a spike

    @classmethod
    def from_env(cls, env_path: str | None = None) -> "Config":
        if env_path:
            load_dotenv(env_path)
        else:
            load_dotenv()

        def _bool(val: str) -> bool:
            return val.strip().lower() in ("true", "1", "yes")

        def _number(key: str, default: str, kind: type) -> int | float:
            raw = os.getenv(key, default)
            try:
                return kind(raw)
            except ValueError:
                raise ValueError(f"{key} must be a {kind.__name__}, got {raw!r}")

        log_level = os.getenv("LORAHEAL_LOG_LEVEL", "INFO").upper()
        if log_level not in _LEVELS:
            raise ValueError(
                f"LORAHEAL_LOG_LEVEL must be one of {', '.join(_LEVELS)}"
            )

        spike_factor = _number("LORAHEAL_SPIKE_FACTOR", "1.5", float)
        if spike_factor <= 1.0:
            raise ValueError("LORAHEAL_SPIKE_FACTOR must be greater than 1")

        default_seed = _number("LORAHEAL_DEFAULT_SEED", "1", int)
        if default_seed < 0:
            raise ValueError("LORAHEAL_DEFAULT_SEED must be non-negative")

        return cls(
            log_level=log_level,
            output_dir=os.getenv("LORAHEAL_OUT_DIR", "data/runs"),
            trace_events=_bool(os.getenv("LORAHEAL_TRACE_EVENTS", "false")),
            strict_config=_bool(os.getenv("LORAHEAL_STRICT_CONFIG", "true")),
            default_seed=default_seed,
            spike_factor=spike_factor,
        )
