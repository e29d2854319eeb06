"""Multi-level set-associative cache model with stream attribution.

Hierarchy: per-core private L1 and L2, one shared LLC; the support core has
a private L1 only and shares the LLC. Policies: LRU replacement, non-inclusive
fills (a line evicted from one level is not removed from others), write
allocate. Write-back has no cost consequence in this model since bandwidth is
not simulated. Every access is tagged with a stream (user or metadata) so
pollution can be measured, and lines remember their last writer so cross-core
metadata traffic pays a flat coherence-transfer penalty.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ._kernels import fill_set, invalidate_tag, probe_set

LINE = 64

USER = 0
METADATA = 1
STREAM_NAMES = {USER: "user", METADATA: "metadata"}


@dataclass(frozen=True)
class CacheLevelConfig:
    capacity_bytes: int
    associativity: int
    hit_latency_cycles: int
    line_bytes: int = LINE

    def __post_init__(self):
        if self.capacity_bytes % (self.associativity * self.line_bytes):
            raise ValueError("capacity must divide into associativity x line size")
        if self.hit_latency_cycles <= 0:
            raise ValueError("latency must be positive")

    @property
    def n_sets(self) -> int:
        return self.capacity_bytes // (self.associativity * self.line_bytes)


@dataclass(frozen=True)
class HwConfig:
    """Hierarchy geometry and latencies (defaults: the evaluated system)."""

    l1: CacheLevelConfig = CacheLevelConfig(32 * 1024, 8, 4)
    l2: CacheLevelConfig = CacheLevelConfig(256 * 1024, 8, 12)
    llc: CacheLevelConfig = CacheLevelConfig(2 * 1024 * 1024, 16, 24)
    sc_l1: CacheLevelConfig = CacheLevelConfig(16 * 1024, 4, 2)
    dram_latency: int = 100
    coherence_latency: int = 60
    l2_partition_meta_ways: int = 0


class _CacheArray:
    """One physical cache: tag/stream/LRU arrays plus hit/miss counters."""

    __slots__ = ("cfg", "tags", "stream", "lastuse", "meta_ways",
                 "hits", "misses", "miss_cycles")

    def __init__(self, cfg: CacheLevelConfig, meta_ways: int = 0):
        self.cfg = cfg
        n = cfg.n_sets
        self.tags = np.full((n, cfg.associativity), -1, dtype=np.int64)
        self.stream = np.zeros((n, cfg.associativity), dtype=np.int8)
        self.lastuse = np.zeros((n, cfg.associativity), dtype=np.int64)
        self.meta_ways = meta_ways
        self.hits = [0, 0]  # per stream
        self.misses = [0, 0]
        self.miss_cycles = [0, 0]

    def set_index(self, line_tag: int) -> int:
        return line_tag % self.cfg.n_sets

    def ways_for(self, stream: int):
        a = self.cfg.associativity
        if self.meta_ways == 0:
            return 0, a
        if stream == METADATA:
            return a - self.meta_ways, a
        return 0, a - self.meta_ways

    def lookup(self, line_tag: int) -> int:
        return probe_set(self.tags[self.set_index(line_tag)], line_tag)

    def touch(self, line_tag: int, way: int, tick: int) -> None:
        self.lastuse[self.set_index(line_tag)][way] = tick

    def fill(self, line_tag: int, stream: int, tick: int) -> int:
        s = self.set_index(line_tag)
        lo, hi = self.ways_for(stream)
        return fill_set(self.tags[s], self.stream[s], self.lastuse[s],
                        line_tag, stream, lo, hi, tick)

    def invalidate(self, line_tag: int) -> bool:
        return bool(invalidate_tag(self.tags[self.set_index(line_tag)], line_tag))

    def flush_partition_violators(self) -> None:
        a = self.cfg.associativity
        if self.meta_ways == 0:
            return
        split = a - self.meta_ways
        for s in range(self.cfg.n_sets):
            for w in range(a):
                if self.tags[s, w] == -1:
                    continue
                is_meta = self.stream[s, w] == METADATA
                if (is_meta and w < split) or (not is_meta and w >= split):
                    self.tags[s, w] = -1


class CacheSystem:
    """All caches of one simulated machine, stepped by a single owner."""

    def __init__(self, hw: HwConfig, n_cores: int, support_core: bool = False):
        self.hw = hw
        self.n_cores = n_cores
        self.support_id: Optional[int] = n_cores if support_core else None
        self.l1 = [_CacheArray(hw.l1) for _ in range(n_cores)]
        self.l2 = [_CacheArray(hw.l2, hw.l2_partition_meta_ways) for _ in range(n_cores)]
        self.llc = _CacheArray(hw.llc)
        self.sc_l1 = _CacheArray(hw.sc_l1) if support_core else None
        self.last_writer: Dict[int, int] = {}
        self.tick = 0

    # ------------------------------------------------------------ topology

    def _path(self, core: int) -> List[_CacheArray]:
        if core == self.support_id:
            return [self.sc_l1, self.llc]
        if not (0 <= core < self.n_cores):
            raise ValueError(f"core {core} is not configured")
        return [self.l1[core], self.l2[core], self.llc]

    def _private(self, core: int) -> List[_CacheArray]:
        if core == self.support_id:
            return [self.sc_l1]
        return [self.l1[core], self.l2[core]]

    def _all_core_ids(self):
        ids = list(range(self.n_cores))
        if self.support_id is not None:
            ids.append(self.support_id)
        return ids

    # -------------------------------------------------------------- access

    def access(self, core: int, address: int, rw: str, stream: int) -> int:
        """One memory access; returns the charged latency in cycles."""
        path = self._path(core)
        line = address // LINE
        self.tick += 1
        latency = 0

        lw = self.last_writer.get(line)
        if lw is not None and lw != core:
            # the line is dirty in another core: pull it over
            for other in self._all_core_ids():
                if other != core:
                    for c in self._private(other):
                        c.invalidate(line)
            latency += self.hw.coherence_latency
            if rw == "R":
                del self.last_writer[line]
        if rw == "W":
            self.last_writer[line] = core

        hit_level = -1
        cum = []
        for k, c in enumerate(path):
            latency += c.cfg.hit_latency_cycles
            cum.append(latency)
            way = c.lookup(line)
            if way >= 0:
                c.hits[stream] += 1
                c.touch(line, way, self.tick)
                hit_level = k
                break
            c.misses[stream] += 1
        if hit_level < 0:
            latency += self.hw.dram_latency
            hit_level = len(path)
        # fill every level above the hit, and charge each missed level the
        # latency incurred beyond its own probe
        for k in range(hit_level):
            path[k].fill(line, stream, self.tick)
            path[k].miss_cycles[stream] += latency - cum[k]
        return latency

    # ---------------------------------------------------------- partitions

    def set_partition(self, level: str, metadata_ways: int) -> None:
        if level != "l2":
            raise ValueError("way partitioning is modeled at l2 only")
        if not (0 <= metadata_ways < self.hw.l2.associativity):
            raise ValueError("metadata_ways out of range")
        for c in self.l2:
            c.meta_ways = metadata_ways
            c.flush_partition_violators()

    # --------------------------------------------------------------- stats

    def stats(self) -> dict:
        """Nested counters: per core, per level, per stream."""
        out = {}
        for core in self._all_core_ids():
            name = "support" if core == self.support_id else f"core{core}"
            levels = {}
            path = self._path(core)
            level_names = ["l1", "llc"] if core == self.support_id else ["l1", "l2", "llc"]
            for lname, c in zip(level_names, path):
                if lname == "llc":
                    continue  # shared; reported once below
                levels[lname] = _stream_stats(c)
            out[name] = levels
        out["llc"] = _stream_stats(self.llc)
        return out

    def totals(self, level: str, field: str, stream: Optional[int] = None,
               cores: Optional[list] = None) -> int:
        """Sum one counter over cores (private levels) or the shared LLC."""
        if level == "llc":
            caches = [self.llc]
        else:
            ids = cores if cores is not None else self._all_core_ids()
            caches = []
            for core in ids:
                if core == self.support_id:
                    if level == "l1":
                        caches.append(self.sc_l1)
                elif level == "l1":
                    caches.append(self.l1[core])
                elif level == "l2":
                    caches.append(self.l2[core])
        total = 0
        for c in caches:
            vals = getattr(c, field)
            total += sum(vals) if stream is None else vals[stream]
        return total


def _stream_stats(c: _CacheArray) -> dict:
    return {
        STREAM_NAMES[s]: {
            "hits": c.hits[s],
            "misses": c.misses[s],
            "miss_cycles": c.miss_cycles[s],
        }
        for s in (USER, METADATA)
    }
