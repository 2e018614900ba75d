"""clusterbeat: streaming per-node cluster telemetry in, continuous EDM out.

Partition-level activity drives one musical layer each: process counts set
onset density, memory usage bends playback speed across the pattern, and
interconnect traffic opens the reverb/delay sends. A round-robin schedule
brings each layer to the foreground in turn so the ear can single out one
partition at a time.
"""

from .config import Config, ConfigError, load_config, save_config
from .mapping import IdleEvent, LayerParams, PartitionParams, Pattern
from .normalize import MovingWindow, ScalerBank
from .pipeline import BatchResult, SonificationEngine
from .protocol import Batch, NodeMetrics, ParseError, PartitionTable
from .sequencer import LayerEvent, RoundRobinState, Transport

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ConfigError",
    "load_config",
    "save_config",
    "SonificationEngine",
    "BatchResult",
    "Batch",
    "NodeMetrics",
    "ParseError",
    "PartitionTable",
    "MovingWindow",
    "ScalerBank",
    "Pattern",
    "IdleEvent",
    "LayerParams",
    "PartitionParams",
    "LayerEvent",
    "RoundRobinState",
    "Transport",
    "__version__",
]
