"""Content-centric retrieval over delay-tolerant networks, simulated.

Nodes run a CIDOR engine (interest/response bundles, a pending-requester
table, two-tier caching, nonce duplicate suppression) on top of pluggable
DTN routing strategies and mobility models.
"""
from .config import ConfigError, ScenarioConfig, load_config
from .metrics import RunSummary, aggregate, finalize
from .sim import LinkModel, World, build_world, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "LinkModel",
    "RunSummary",
    "ScenarioConfig",
    "World",
    "aggregate",
    "build_world",
    "finalize",
    "load_config",
    "run",
]
