"""Discrete-event simulation of the relay network."""

from .clock import HardwareClock
from .config import SimConfig, load_config, parse_config
from .engine import Engine, SimEvent
from .metrics import MetricsReport
from .network import Network, run, ts_baseline
from .syncsim import SyncRecord, SyncReport, SyncSimulation, measure_sync_cdf, run_sync

__all__ = [
    "Engine",
    "HardwareClock",
    "MetricsReport",
    "Network",
    "SimConfig",
    "SimEvent",
    "SyncRecord",
    "SyncReport",
    "SyncSimulation",
    "load_config",
    "measure_sync_cdf",
    "parse_config",
    "run",
    "run_sync",
    "ts_baseline",
]
