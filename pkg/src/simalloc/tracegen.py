"""Seeded synthetic workload generators.

Each workload kind reproduces one allocation *shape* at desk scale: a
server-style sliding window with cross-thread frees, cross-thread free
hand-off, false-sharing-inducing small objects, small-object stress, object
migration, Pareto-sized bursts, a producer/consumer ring (the classic memory
blowup trigger), and a trivial balanced LIFO workload. Generation is a pure
function of the spec, including its seed.
"""

import heapq
from dataclasses import dataclass, replace
from typing import List, Optional

from . import trace as tr
from .rng import RNG_NAME, SplitMix64

KINDS = (
    "larson",
    "xmalloc",
    "scratch",
    "shbench",
    "mstress",
    "alloctest",
    "producer_consumer",
    "uniform",
)


class SpecError(ValueError):
    """Raised when a WorkloadSpec fails its own invariants."""


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    threads: int = 1
    total_ops: int = 10_000
    seed: int = 1
    size_min: int = 16
    size_max: int = 4096
    pareto_shape: float = 1.5
    window: int = 1024  # live objects per thread (larson) / burst size (producer_consumer)
    cross_free_fraction: Optional[float] = None  # kind-dependent default
    compute_gap: int = 0  # mean cycles of compute between allocation events
    access_fraction: float = 0.3
    teardown: bool = True

    def resolved(self) -> "WorkloadSpec":
        """Fill in kind-dependent defaults."""
        cff = self.cross_free_fraction
        if cff is None:
            cff = {"xmalloc": 0.5, "larson": 0.1, "mstress": 0.3}.get(self.kind, 0.0)
        return replace(self, cross_free_fraction=cff)


def check_spec(spec: WorkloadSpec) -> None:
    if spec.kind not in KINDS:
        raise SpecError(f"unknown workload kind {spec.kind!r} (choose from {KINDS})")
    if spec.threads < 1:
        raise SpecError("threads must be >= 1")
    if spec.total_ops < spec.threads:
        raise SpecError("total_ops must be >= threads")
    if not (0 < spec.size_min <= spec.size_max):
        raise SpecError("need 0 < size_min <= size_max")
    if spec.kind == "alloctest" and spec.pareto_shape <= 0:
        raise SpecError("pareto_shape must be > 0 for alloctest")
    if spec.cross_free_fraction is not None and not (0 <= spec.cross_free_fraction <= 1):
        raise SpecError("cross_free_fraction must be in [0, 1]")
    if spec.window < 1:
        raise SpecError("window must be >= 1")


def generate(spec: WorkloadSpec) -> tr.Trace:
    """Generate a valid trace for the spec; identical specs give identical traces."""
    check_spec(spec)
    spec = spec.resolved()
    rng = SplitMix64(spec.seed)
    stagger = rng.split(0x5747)
    records = _GENERATORS[spec.kind](spec, rng)
    if spec.compute_gap > 0 and spec.threads > 1:
        # threads never start in lockstep; a random per-thread offset keeps
        # compute-paced workloads from issuing requests in synchronized waves
        offsets = [
            tr.compute(t, 1 + stagger.randrange(spec.threads * spec.compute_gap))
            for t in range(spec.threads)
        ]
        records = offsets + records
    return tr.Trace(
        threads=spec.threads, seed=spec.seed, rng_name=RNG_NAME, records=records
    )


# ---------------------------------------------------------------- helpers


class _Builder:
    """Accumulates records and hands out object ids / compute gaps."""

    def __init__(self, spec: WorkloadSpec, rng: SplitMix64):
        self.spec = spec
        self.rng = rng
        self.records: List[tr.TraceRecord] = []
        self.next_oid = 0
        self.live_size = {}  # oid -> size

    def malloc(self, tid: int, size: int) -> int:
        oid = self.next_oid
        self.next_oid += 1
        self.live_size[oid] = size
        self.records.append(tr.malloc(tid, oid, size))
        return oid

    def free(self, tid: int, oid: int) -> None:
        del self.live_size[oid]
        self.records.append(tr.free(tid, oid))

    def access(self, tid: int, oid: int, write: bool = False) -> None:
        max_lines = -(-self.live_size[oid] // tr.LINE_BYTES)
        lines = self.rng.randint(1, min(4, max_lines))
        self.records.append(tr.access(tid, oid, lines, tr.WRITE if write else tr.READ))

    def gap(self, tid: int) -> None:
        mean = self.spec.compute_gap
        if mean > 0:
            self.records.append(
                tr.compute(tid, self.rng.randint(max(1, mean // 2), mean * 3 // 2))
            )

    def size(self) -> int:
        return self.rng.randint(self.spec.size_min, self.spec.size_max)

    def other_thread(self, tid: int) -> int:
        t = self.spec.threads
        if t == 1:
            return tid
        return (tid + 1 + self.rng.randrange(t - 1)) % t

    def done(self) -> bool:
        return len(self.records) >= self.spec.total_ops

    def teardown(self, owner=None) -> None:
        if self.spec.teardown:
            for oid in sorted(self.live_size):
                self.records.append(tr.free(owner(oid) if owner else 0, oid))
            self.live_size.clear()


# ------------------------------------------------------------- generators


def _gen_uniform(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Balanced workload: round-robin mallocs, then LIFO frees by the owner.
    b = _Builder(spec, rng)
    n = spec.total_ops // 2
    owners = {}
    for i in range(n):
        tid = i % spec.threads
        owners[b.malloc(tid, b.size())] = tid
    for oid in sorted(owners, reverse=True):
        b.free(owners[oid], oid)
    return b.records


def _gen_larson(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Server/client steady state: a sliding window of live objects per
    # thread with random replacement; a fraction of frees is issued by a
    # different thread than the allocator.
    b = _Builder(spec, rng)
    t = spec.threads
    window = max(1, min(spec.window, spec.total_ops // (4 * t) or 1))
    slots = [[] for _ in range(t)]
    for tid in range(t):
        for _ in range(window):
            slots[tid].append(b.malloc(tid, b.size()))
    while not b.done():
        tid = rng.randrange(t)
        idx = rng.randrange(window)
        old = slots[tid][idx]
        freer = b.other_thread(tid) if rng.random() < spec.cross_free_fraction else tid
        b.free(freer, old)
        slots[tid][idx] = b.malloc(tid, b.size())
        if rng.random() < spec.access_fraction:
            b.access(tid, slots[tid][rng.randrange(window)], write=rng.random() < 0.5)
        b.gap(tid)
    owner = {oid: tid for tid in range(t) for oid in slots[tid]}
    b.teardown(owner=lambda oid: owner[oid])
    return b.records


def _gen_xmalloc(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Objects allocated by one thread are freed by another.
    b = _Builder(spec, rng)
    window = max(1, min(spec.window, spec.total_ops // 4 or 1))
    pending = []  # (oid, alloc_tid) FIFO
    i = 0
    while not b.done():
        tid = i % spec.threads
        i += 1
        pending.append((b.malloc(tid, b.size()), tid))
        if len(pending) > window:
            oid, owner = pending.pop(0)
            if rng.random() < spec.cross_free_fraction:
                b.free(b.other_thread(owner), oid)
            else:
                b.free(owner, oid)
        b.gap(tid)
    for oid, owner in pending:
        if spec.teardown:
            b.free(b.other_thread(owner) if rng.random() < spec.cross_free_fraction else owner, oid)
    return b.records


def _gen_scratch(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Passive false sharing: sub-cache-line objects allocated round-robin
    # across threads (so neighbors share a line), then written by a thread
    # other than the allocator.
    b = _Builder(spec, rng)
    t = spec.threads
    small = max(spec.size_min, min(32, spec.size_max))
    while not b.done():
        batch = []
        for tid in range(t):
            batch.append((tid, b.malloc(tid, small)))
        for tid, oid in batch:
            writer = b.other_thread(tid)
            for _ in range(2):
                b.records.append(tr.access(writer, oid, 1, tr.WRITE))
        for tid, oid in batch:
            b.free(tid, oid)
        b.gap(rng.randrange(t))
    return b.records


def _gen_shbench(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Small-object stress: bursts of allocations skewed toward small sizes,
    # freed LIFO shortly after.
    b = _Builder(spec, rng)
    t = spec.threads
    while not b.done():
        tid = rng.randrange(t)
        burst = rng.randint(4, 16)
        oids = []
        for _ in range(burst):
            # cube of a uniform skews the distribution toward size_min
            size = spec.size_min + int((spec.size_max - spec.size_min) * rng.random() ** 3)
            oids.append(b.malloc(tid, size))
        if rng.random() < spec.access_fraction:
            b.access(tid, oids[rng.randrange(burst)])
        for oid in reversed(oids):
            b.free(tid, oid)
        b.gap(tid)
    return b.records


def _gen_mstress(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Objects migrate between threads and die after a random lifetime.
    b = _Builder(spec, rng)
    t = spec.threads
    expiry = []  # heap of (deadline_op, seq, oid, owner)
    seq = 0
    op = 0
    while not b.done():
        tid = rng.randrange(t)
        while expiry and expiry[0][0] <= op:
            _, _, oid, owner = heapq.heappop(expiry)
            freer = b.other_thread(owner) if rng.random() < spec.cross_free_fraction else owner
            b.free(freer, oid)
        oid = b.malloc(tid, b.size())
        heapq.heappush(expiry, (op + rng.randint(1, 4 * t + 8), seq, oid, tid))
        seq += 1
        if rng.random() < spec.access_fraction:
            b.access(b.other_thread(tid), oid)
        b.gap(tid)
        op += 1
    while expiry:
        _, _, oid, owner = heapq.heappop(expiry)
        if spec.teardown:
            b.free(owner, oid)
    return b.records


def _gen_alloctest(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Allocation-intensive with Pareto-distributed sizes and a short FIFO
    # lifetime window.
    b = _Builder(spec, rng)
    t = spec.threads
    window = max(1, min(spec.window, spec.total_ops // 4 or 1))
    pending = []
    i = 0
    while not b.done():
        tid = i % t
        i += 1
        size = rng.pareto_truncated(spec.pareto_shape, spec.size_min, spec.size_max)
        pending.append((b.malloc(tid, size), tid))
        if len(pending) > window:
            oid, owner = pending.pop(0)
            b.free(owner, oid)
        b.gap(tid)
    if spec.teardown:
        for oid, owner in pending:
            b.free(owner, oid)
    return b.records


def _gen_producer_consumer(spec: WorkloadSpec, rng: SplitMix64) -> list:
    # Blowup trigger: demand rotates around a ring of threads. In phase p
    # thread p%T allocates a burst; one phase later that thread releases the
    # burst, but its own next allocation turn is T-1 phases away, so the
    # freed memory idles in its pool for a full ring rotation. Purely
    # thread-local recycling therefore keeps ~T bursts committed while any
    # shared pool keeps recycling the same single burst.
    b = _Builder(spec, rng)
    t = spec.threads
    burst = spec.window
    size = 64
    phases = max(t + 2, spec.total_ops // (2 * burst))
    prev = None  # (allocator, oids) of previous phase
    for p in range(phases):
        a = p % t
        if prev is not None:
            pa, oids = prev
            for oid in oids:
                b.free(pa, oid)
        prev = (a, [b.malloc(a, size) for _ in range(burst)])
    if spec.teardown and prev is not None:
        pa, oids = prev
        for oid in oids:
            b.free(pa, oid)
    return b.records


_GENERATORS = {
    "uniform": _gen_uniform,
    "larson": _gen_larson,
    "xmalloc": _gen_xmalloc,
    "scratch": _gen_scratch,
    "shbench": _gen_shbench,
    "mstress": _gen_mstress,
    "alloctest": _gen_alloctest,
    "producer_consumer": _gen_producer_consumer,
}
