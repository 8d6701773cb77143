"""Parallel block execution engines over a simulated, sleep-based VM."""

from .engines import Engine, EngineConfig, EpochReport, ProgressTimeout, run_engine
from .model import Access, AccessKind, Block, ObjectKind, Transaction, conflicts
from .oracle import check_run
from .workload import WorkloadParams, generate_block, load_block, save_block

__all__ = [
    "Access",
    "AccessKind",
    "Block",
    "Engine",
    "EngineConfig",
    "EpochReport",
    "ObjectKind",
    "ProgressTimeout",
    "Transaction",
    "WorkloadParams",
    "check_run",
    "conflicts",
    "generate_block",
    "load_block",
    "run_engine",
    "save_block",
]
