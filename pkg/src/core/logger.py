import logging
import sys
from typing import Callable

from colorama import Fore, Style, init

init(autoreset=True)

_LEVEL_COLORS = {
    logging.DEBUG: Fore.CYAN,
    logging.INFO: Fore.GREEN,
    logging.WARNING: Fore.YELLOW,
    logging.ERROR: Fore.RED,
    logging.CRITICAL: Fore.MAGENTA + Style.BRIGHT,
}

# Virtual clock (microseconds) of the simulation currently running, if any.
_clock: Callable[[], int] | None = None


def bind_clock(clock: Callable[[], int] | None) -> None:
    """Stamp log records with simulated time while a run is in progress."""
    global _clock
    _clock = clock


def format_sim_time(us: int) -> str:
    seconds, micros = divmod(us, 1_000_000)
    hours, rem = divmod(seconds, 3600)
    minutes, secs = divmod(rem, 60)
    return f"{hours:02d}:{minutes:02d}:{secs:02d}.{micros // 1000:03d}"


class ColorFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        color = _LEVEL_COLORS.get(record.levelno, "")
        if _clock is not None:
            ts = "t+" + format_sim_time(_clock())
        else:
            ts = self.formatTime(record, "%H:%M:%S")
        level = record.levelname.ljust(8)
        return f"{Fore.WHITE}[{ts}] {color}[{level}]{Style.RESET_ALL} {record.getMessage()}"


def setup_logger(level: str = "INFO") -> logging.Logger:
    logger = logging.getLogger("loraheal")
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))
    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(ColorFormatter())
        logger.addHandler(handler)
    return logger


def format_summary_table(summary) -> str:
    if not summary.per_node:
        return "  No metrics were ingested."
    header = (
        f"  {'Node':<6} {'N':>5} {'Median s':>9} {'p95 s':>8} {'Max s':>8} {'Spikes':>7}"
    )
    sep = "  " + "-" * 48
    lines = [sep, header, sep]
    rows = [(f"n{node}", stats) for node, stats in sorted(summary.per_node.items())]
    rows.append(("all", summary.aggregate))
    for label, stats in rows:
        lines.append(
            f"  {label:<6} {stats.count:>5} {stats.median_us / 1e6:>9.2f} "
            f"{stats.p95_us / 1e6:>8.2f} {stats.max_us / 1e6:>8.2f} {stats.spikes:>7}"
        )
    lines.append(sep)
    lines.append(
        f"  delivery={summary.delivery_ratio:.3f}  "
        f"retx={summary.retransmissions}  collisions={summary.collisions}  "
        f"duty-peak={summary.duty_cycle_peak:.1%}  failovers={len(summary.failovers)}"
    )
    return "\n".join(lines)
