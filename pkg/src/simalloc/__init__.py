"""simalloc: a deterministic trace-driven simulator for memory allocators.

It compares a centralized support-core allocator driven by lightweight
signals and hardware message queues against tiered (per-thread cache +
shared pool) and purely thread-local designs, with a multi-level cache
model, cycle accounting, and an energy estimate.
"""

from .cache import CacheLevelConfig, CacheSystem, HwConfig
from .energy import PowerModel, energy
from .engine import (ALLOCATOR_KINDS, AllocatorConfig, ComparisonReport,
                     Metrics, compare, simulate, trace_hash)
from .heap import Heap, SizeClassTable
from .rng import SplitMix64
from .tiered import TieredAllocator, blowup_probe
from .trace import Trace, TraceRecord, read_trace, validate, write_trace
from .tracegen import WorkloadSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ALLOCATOR_KINDS", "AllocatorConfig", "CacheLevelConfig", "CacheSystem",
    "ComparisonReport", "Heap", "HwConfig", "Metrics", "PowerModel",
    "SizeClassTable", "SplitMix64", "TieredAllocator", "Trace", "TraceRecord",
    "WorkloadSpec", "blowup_probe", "compare", "energy", "generate",
    "read_trace", "simulate", "trace_hash", "validate", "write_trace",
]
