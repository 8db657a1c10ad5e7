from .config import Config
from .models import TransmissionRecord, LatencyRecord, FailoverRecord, BundleRecord
from .logger import setup_logger, bind_clock, format_summary_table
