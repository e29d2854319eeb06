"""Deterministic discrete-event engine and the four allocator configurations.

Each trace record is one event charged to its issuing core: compute advances
the core clock, accesses run through the cache model, and malloc/free follow
the configured allocator path. The support-core configuration routes
allocation through the signal protocol and hardware message queues; the
tiered baselines execute inline with atomic-synchronization costs serialized
through a single shared resource; the idle-core configuration centralizes
allocation but pays atomic-handshake communication per request.

Metrics are a pure function of (trace, configs): rerunning a simulation
yields identical output.
"""

import hashlib
import heapq
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from . import cache as cm
from . import heap as hp
from . import protocol as proto
from . import trace as tr
from .tiered import THREAD_LOCAL_ONLY, TIERED, TieredAllocator

SPEEDMALLOC = "speedmalloc"
IDLECORE = "idlecore"
ALLOCATOR_KINDS = (SPEEDMALLOC, TIERED, THREAD_LOCAL_ONLY, IDLECORE)

CATEGORIES = ("compute", "user_mem", "metadata_mem", "atomic_sync",
              "alloc_wait", "alloc_exec")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AllocatorConfig:
    kind: str = SPEEDMALLOC
    # cost constants
    atomic_cycles: int = 700
    alloc_fast_instr_cycles: int = 50
    alloc_generic_extra_cycles: int = 400
    # central heap
    chunk_size: int = hp.DEFAULT_CHUNK
    meta_lines_fast: int = 3
    meta_lines_generic: int = 8
    chunk_budget: Optional[int] = None
    # tiered family
    batch_size: int = 32
    local_cap: int = 64
    # protocol
    signal_lat: int = 8
    overlap_cycles: int = 0
    update_cycles: int = 10
    hmq_capacity: int = 128
    rb_entries: int = 16
    sysreg_install_cycles: int = 12

    def __post_init__(self):
        if self.kind not in ALLOCATOR_KINDS:
            raise ConfigError(f"unknown allocator kind {self.kind!r}")
        for name in ("atomic_cycles", "alloc_fast_instr_cycles",
                     "alloc_generic_extra_cycles", "signal_lat", "update_cycles"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    def heap_kwargs(self) -> dict:
        return dict(chunk_size=self.chunk_size, meta_lines_fast=self.meta_lines_fast,
                    meta_lines_generic=self.meta_lines_generic,
                    chunk_budget=self.chunk_budget)


@dataclass
class Metrics:
    allocator: str
    trace_hash: str
    threads: int
    per_core: List[Dict[str, int]]
    total_cycles: int
    support_busy: int
    support_stall: int
    cache_stats: dict
    l2_miss_cycles: int  # main cores, both streams
    main_meta_misses: int  # metadata-stream misses in main-core private caches
    mmap_call_count: int
    peak_committed_bytes: int
    live_bytes_at_end: int
    oom_events: int
    request_latencies: List[int] = field(default_factory=list)

    def category_total(self, cat: str) -> int:
        return sum(c[cat] for c in self.per_core)

    @property
    def core_cycle_sum(self) -> int:
        return sum(c["total"] for c in self.per_core)

    @property
    def atomic_share(self) -> float:
        s = self.core_cycle_sum
        return self.category_total("atomic_sync") / s if s else 0.0

    def latency_percentile(self, q: float) -> int:
        if not self.request_latencies:
            return 0
        xs = sorted(self.request_latencies)
        return xs[min(len(xs) - 1, int(q * len(xs)))]


# ------------------------------------------------------------------ engine


class _ParkKind:
    ADDRESS = "address"  # waiting for another thread's malloc to land
    MALLOC = "malloc"  # waiting for own malloc round trip


class _Simulation:
    def __init__(self, trace: tr.Trace, acfg: AllocatorConfig, hw: cm.HwConfig):
        report = tr.validate(trace)
        if not report.valid:
            first = report.errors[0]
            raise ConfigError(f"invalid trace: record {first[0]}: {first[1]}")
        self.trace = trace
        self.acfg = acfg
        self.hw = hw
        self.n = trace.threads
        self.kind = acfg.kind

        extra_core = 1 if self.kind == IDLECORE else 0
        self.cache = cm.CacheSystem(hw, self.n + extra_core,
                                    support_core=self.kind == SPEEDMALLOC)
        self.remote_core = self.n  # idle core / support core id

        if self.kind in (TIERED, THREAD_LOCAL_ONLY):
            self.alloc = TieredAllocator(self.n, mode=self.kind,
                                         batch_size=acfg.batch_size,
                                         local_cap=acfg.local_cap,
                                         heap_kwargs=acfg.heap_kwargs())
            self.heaps = self.alloc.heaps
        else:
            self.heap = hp.Heap(**acfg.heap_kwargs())
            self.heaps = [self.heap]

        if self.kind == SPEEDMALLOC:
            self.hmq = proto.Hmq(self.n, capacity=acfg.hmq_capacity)
            self.rb = proto.RegisterBuffer(acfg.rb_entries)
            self.core_states = [proto.CoreState(c) for c in range(self.n)]
            self.first_request_sent = set()

        # per-core record streams
        self.stream: List[List[tr.TraceRecord]] = [[] for _ in range(self.n)]
        for r in trace.records:
            self.stream[r.thread_id].append(r)
        self.cursor = [0] * self.n
        self.core_time = [0] * self.n
        self.cat = [dict.fromkeys(CATEGORIES, 0) for _ in range(self.n)]

        self.obj_addr: Dict[int, int] = {}
        self.obj_ready_time: Dict[int, int] = {}
        self.obj_failed = set()
        self.parked: Dict[int, List[int]] = {}  # oid -> cores waiting for address
        self.waiting_malloc: Dict[int, tuple] = {}  # core -> (oid, issue_time)

        self.fifo_free = 0  # shared atomic / idle-core slot
        self.support_free = 0
        self.support_active = False
        self.support_busy = 0
        self.latencies: List[int] = []
        self.oom_events = 0

        self.events = []
        self.seq = 0

    # --------------------------------------------------------------- queue

    def push(self, time: int, kind: str, payload=None) -> None:
        heapq.heappush(self.events, (time, self.seq, kind, payload))
        self.seq += 1

    # ----------------------------------------------------------------- run

    def run(self) -> Metrics:
        for c in range(self.n):
            if self.stream[c]:
                self.push(0, "core", c)
        while self.events:
            time, _, kind, payload = heapq.heappop(self.events)
            if kind == "core":
                self.step_core(payload)
            elif kind == "arrive":
                self.on_arrival(time, payload)
            elif kind == "support":
                self.support_step(time)
        return self.finish()

    # ------------------------------------------------------------ per core

    def step_core(self, c: int) -> None:
        if self.cursor[c] >= len(self.stream[c]):
            return
        r = self.stream[c][self.cursor[c]]
        t = self.core_time[c]

        if r.kind == tr.COMPUTE:
            self.core_time[c] = t + r.cycles
            self.cat[c]["compute"] += r.cycles
            self.advance(c)
            return

        if r.kind == tr.ACCESS:
            if not self.resolve_object(c, r.object_id):
                return  # parked or failed-and-skipped
            if r.object_id in self.obj_failed:
                self.advance(c)
                return
            base = self.obj_addr[r.object_id]
            lat = 0
            for i in range(r.line_count):
                lat += self.cache.access(c, base + i * cm.LINE, r.rw, cm.USER)
            # resolve_object may have advanced this core past t
            self.core_time[c] += lat
            self.cat[c]["user_mem"] += lat
            self.advance(c)
            return

        if r.kind == tr.MALLOC:
            self.do_malloc(c, r)
            return

        if r.kind == tr.FREE:
            if not self.resolve_object(c, r.object_id):
                return
            if r.object_id in self.obj_failed:
                self.advance(c)
                return
            self.do_free(c, r)
            return

    def advance(self, c: int) -> None:
        self.cursor[c] += 1
        if self.cursor[c] < len(self.stream[c]):
            self.push(self.core_time[c], "core", c)

    def resolve_object(self, c: int, oid: int) -> bool:
        """Ensure the object's address is known; park the core if not.

        A known address may still lie in this core's future (the allocating
        core ran ahead in simulated time); the consumer then stalls until
        the allocation's completion time.
        """
        if oid in self.obj_failed:
            return True
        if oid in self.obj_addr:
            ready = self.obj_ready_time.get(oid, 0)
            if ready > self.core_time[c]:
                self.cat[c]["alloc_wait"] += ready - self.core_time[c]
                self.core_time[c] = ready
            return True
        self.parked.setdefault(oid, []).append(c)
        return False

    def object_ready(self, oid: int, when: int) -> None:
        for c in self.parked.pop(oid, ()):
            wait = max(0, when - self.core_time[c])
            self.cat[c]["alloc_wait"] += wait
            self.core_time[c] += wait
            self.push(self.core_time[c], "core", c)

    # ----------------------------------------------------- inline executors

    def charge_meta(self, core: int, touches, default_write=True) -> int:
        lat = 0
        for item in touches:
            if isinstance(item, tuple):
                addr, is_write = item
            else:
                addr, is_write = item, default_write
            lat += self.cache.access(core, addr, "W" if is_write else "R", cm.METADATA)
        return lat

    def run_atomics(self, c: int, t: int, count: int) -> int:
        """Serialize ``count`` atomic ops through the shared resource."""
        cycles = 0
        cursor = t
        for _ in range(count):
            grant = max(cursor, self.fifo_free)
            self.fifo_free = grant + self.acfg.atomic_cycles
            cycles += (grant - cursor) + self.acfg.atomic_cycles
            cursor = self.fifo_free
        return cycles

    def do_malloc(self, c: int, r: tr.TraceRecord) -> None:
        if self.kind == SPEEDMALLOC:
            packet = self.core_states[c].malloc_start(
                r.size_bytes, 0, first_request=not self.first_request_sent)
            self.first_request_sent.add(c)
            self.waiting_malloc[c] = (r.object_id, self.core_time[c])
            self.push(self.core_time[c] + self.acfg.signal_lat, "arrive", packet)
            return

        if self.kind == IDLECORE:
            t = self.core_time[c]
            start = max(t, self.fifo_free)
            comm = 2 * self.acfg.atomic_cycles
            exec_cycles = self.acfg.alloc_fast_instr_cycles
            try:
                addr, touched, generic = self.heap.malloc(r.size_bytes)
            except hp.OutOfMemory:
                self.fail_malloc(c, r)
                return
            if generic:
                exec_cycles += self.acfg.alloc_generic_extra_cycles
            exec_cycles += self.charge_meta(self.remote_core, touched)
            done = start + comm + exec_cycles
            self.fifo_free = done
            self.cat[c]["atomic_sync"] += comm
            self.cat[c]["alloc_wait"] += (start - t) + exec_cycles
            self.core_time[c] = done
            self.latencies.append(done - t)
            self.complete_malloc(r.object_id, addr, done)
            self.advance(c)
            return

        # tiered / threadlocal: inline on the issuing core
        t = self.core_time[c]
        try:
            addr, ev = self.alloc.malloc(c, r.size_bytes)
        except hp.OutOfMemory:
            self.fail_malloc(c, r)
            return
        exec_cycles = self.acfg.alloc_fast_instr_cycles
        if ev.took_generic:
            exec_cycles += self.acfg.alloc_generic_extra_cycles
        meta = self.charge_meta(c, ev.meta_touches)
        atomic = self.run_atomics(c, t + exec_cycles + meta, ev.atomic_syncs)
        self.cat[c]["alloc_exec"] += exec_cycles
        self.cat[c]["metadata_mem"] += meta
        self.cat[c]["atomic_sync"] += atomic
        self.core_time[c] = t + exec_cycles + meta + atomic
        self.latencies.append(self.core_time[c] - t)
        self.complete_malloc(r.object_id, addr, self.core_time[c])
        self.advance(c)

    def do_free(self, c: int, r: tr.TraceRecord) -> None:
        addr = self.obj_addr[r.object_id]
        if self.kind == SPEEDMALLOC:
            packet = self.core_states[c].free_start(addr, 0, False)
            self.push(self.core_time[c] + self.acfg.signal_lat, "arrive", packet)
            self.advance(c)  # fire and forget
            return

        if self.kind == IDLECORE:
            t = self.core_time[c]
            start = max(t, self.fifo_free)
            comm = 2 * self.acfg.atomic_cycles
            exec_cycles = self.acfg.alloc_fast_instr_cycles
            touched = self.heap.free(addr)
            exec_cycles += self.charge_meta(self.remote_core, touched)
            # the issuing core only participates in the handshake; the slot
            # stays busy for the remote execution
            self.fifo_free = start + comm + exec_cycles
            self.cat[c]["atomic_sync"] += comm
            self.cat[c]["alloc_wait"] += start - t
            self.core_time[c] = start + comm
            self.advance(c)
            return

        t = self.core_time[c]
        ev = self.alloc.free(c, addr)
        exec_cycles = self.acfg.alloc_fast_instr_cycles
        meta = self.charge_meta(c, ev.meta_touches)
        atomic = self.run_atomics(c, t + exec_cycles + meta, ev.atomic_syncs)
        self.cat[c]["alloc_exec"] += exec_cycles
        self.cat[c]["metadata_mem"] += meta
        self.cat[c]["atomic_sync"] += atomic
        self.core_time[c] = t + exec_cycles + meta + atomic
        self.advance(c)

    def complete_malloc(self, oid: int, addr: int, when: int) -> None:
        self.obj_addr[oid] = addr
        self.obj_ready_time[oid] = when
        self.object_ready(oid, when)

    def fail_malloc(self, c: int, r: tr.TraceRecord) -> None:
        self.oom_events += 1
        self.obj_failed.add(r.object_id)
        self.object_ready(r.object_id, self.core_time[c])
        if self.kind == SPEEDMALLOC:
            self.core_states[c].stage = proto.STAGE4_RESUMED
            self.waiting_malloc.pop(c, None)
        self.advance(c)

    # -------------------------------------------------------- support core

    def on_arrival(self, time: int, packet: proto.DataPacket) -> None:
        self.hmq.dispatch(packet)
        if not self.support_active:
            self.support_active = True
            self.push(max(time, self.support_free), "support", None)

    def support_step(self, time: int) -> None:
        req = self.hmq.schedule_next()
        if req is None:
            self.support_active = False
            return
        exec_cycles = 0
        if not self.rb.lookup(req.process_id):
            exec_cycles += self.acfg.sysreg_install_cycles

        if req.op == proto.OP_MALLOC:
            c = req.core_id
            oid, issued = self.waiting_malloc.pop(c)
            try:
                addr, touched, generic = self.heap.malloc(req.payload)
            except hp.OutOfMemory:
                self.support_busy += exec_cycles
                self.support_free = time + exec_cycles
                self.fail_malloc_remote(c, oid, time + exec_cycles)
                self.push(self.support_free, "support", None)
                return
            exec_cycles += self.acfg.alloc_fast_instr_cycles
            if generic:
                exec_cycles += self.acfg.alloc_generic_extra_cycles
            exec_cycles += self.charge_meta(self.remote_core, touched)
            end_at = time + exec_cycles
            resume = end_at + self.acfg.signal_lat
            self.core_states[c].end_received()
            self.core_states[c].stage = proto.IDLE
            wait = resume - issued
            overlap = min(self.acfg.overlap_cycles, wait)
            self.cat[c]["compute"] += overlap
            self.cat[c]["alloc_wait"] += wait - overlap
            self.core_time[c] = resume
            self.latencies.append(wait)
            self.complete_malloc(oid, addr, resume)
            self.advance(c)
            busy = exec_cycles + self.acfg.update_cycles  # async metadata phase
        else:
            touched = self.heap.free(req.payload)
            exec_cycles += self.acfg.alloc_fast_instr_cycles
            exec_cycles += self.charge_meta(self.remote_core, touched)
            busy = exec_cycles

        self.support_busy += busy
        self.support_free = time + busy
        self.push(self.support_free, "support", None)

    def fail_malloc_remote(self, c: int, oid: int, when: int) -> None:
        self.oom_events += 1
        self.obj_failed.add(oid)
        self.core_states[c].stage = proto.IDLE
        wait = when + self.acfg.signal_lat - self.core_time[c]
        self.cat[c]["alloc_wait"] += wait
        self.core_time[c] += wait
        self.object_ready(oid, self.core_time[c])
        self.advance(c)

    # -------------------------------------------------------------- finish

    def finish(self) -> Metrics:
        total = max(self.core_time) if self.core_time else 0
        if self.kind == SPEEDMALLOC:
            # the run ends when the support core drains its async metadata work
            total = max(total, self.support_free)
        per_core = []
        for c in range(self.n):
            d = dict(self.cat[c])
            d["total"] = self.core_time[c]
            per_core.append(d)
        support_stall = max(0, total - self.support_busy) if self.kind == SPEEDMALLOC else 0

        main_cores = list(range(self.n))
        l2_miss_cycles = self.cache.totals("l2", "miss_cycles", cores=main_cores)
        main_meta = (self.cache.totals("l1", "misses", cm.METADATA, cores=main_cores)
                     + self.cache.totals("l2", "misses", cm.METADATA, cores=main_cores))

        return Metrics(
            allocator=self.kind,
            trace_hash=trace_hash(self.trace),
            threads=self.n,
            per_core=per_core,
            total_cycles=total,
            support_busy=self.support_busy if self.kind == SPEEDMALLOC else 0,
            support_stall=support_stall,
            cache_stats=self.cache.stats(),
            l2_miss_cycles=l2_miss_cycles,
            main_meta_misses=main_meta,
            mmap_call_count=sum(h.mmap_call_count for h in self.heaps),
            peak_committed_bytes=sum(h.peak_committed_bytes for h in self.heaps),
            live_bytes_at_end=sum(h.live_bytes for h in self.heaps),
            oom_events=self.oom_events,
            request_latencies=self.latencies,
        )


def trace_hash(trace: tr.Trace) -> str:
    buf = io.StringIO()
    tr.write_trace(trace, buf)
    return hashlib.sha256(buf.getvalue().encode("ascii")).hexdigest()[:16]


def simulate(trace: tr.Trace, acfg: AllocatorConfig, hw: Optional[cm.HwConfig] = None) -> Metrics:
    """Run one deterministic simulation and return its metrics."""
    return _Simulation(trace, acfg, hw or cm.HwConfig()).run()


# ----------------------------------------------------------------- compare


@dataclass
class ComparisonReport:
    speedup: float  # total_cycles(b) / total_cycles(a): >1 means a is faster
    category_delta: Dict[str, int]  # b minus a, summed over cores
    l2_miss_cycle_delta: int
    atomic_share_b: float
    memory_ratio: float  # peak(a) / peak(b)


def compare(a: Metrics, b: Metrics) -> ComparisonReport:
    """Relative report of run ``a`` against baseline ``b``."""
    if a.trace_hash != b.trace_hash:
        raise ConfigError(
            f"metrics come from different traces ({a.trace_hash} vs {b.trace_hash})")
    return ComparisonReport(
        speedup=b.total_cycles / a.total_cycles if a.total_cycles else float("inf"),
        category_delta={c: b.category_total(c) - a.category_total(c) for c in CATEGORIES},
        l2_miss_cycle_delta=b.l2_miss_cycles - a.l2_miss_cycles,
        atomic_share_b=b.atomic_share,
        memory_ratio=(a.peak_committed_bytes / b.peak_committed_bytes
                      if b.peak_committed_bytes else float("inf")),
    )
