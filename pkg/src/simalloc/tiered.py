"""Tiered-metadata baseline allocator family.

Models the per-thread local cache + shared transfer cache structure of
mainstream multi-threaded allocators, and the degenerate thread-local-only
variant whose memory consumption blows up with thread count. Every shared
pool operation (refill, flush, cross-thread free) emits exactly one atomic
synchronization event; the cycle cost of those events belongs to the engine.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import heap as hp
from . import trace as tr

TIERED = "tiered"
THREAD_LOCAL_ONLY = "threadlocal"
CENTRALIZED = "centralized"

LINE = hp.LINE


@dataclass
class CostEvents:
    """What one allocator operation cost, in model terms."""

    atomic_syncs: int = 0
    meta_touches: List[Tuple[int, bool]] = field(default_factory=list)  # (line addr, is_write)
    ownership_transfers: int = 0
    took_generic: bool = False


class TieredAllocator:
    """Per-thread caches over a shared pool over a central heap.

    In ``tiered`` mode all threads share one heap and one transfer cache.
    In ``threadlocal`` mode each thread has a private heap and an unbounded
    private cache; there is no shared pool, so blocks freed by a thread stay
    in that thread's cache until it allocates again.
    """

    def __init__(self, threads: int, mode: str = TIERED, batch_size: int = 32,
                 local_cap: int = 64, heap_kwargs: Optional[dict] = None):
        if mode not in (TIERED, THREAD_LOCAL_ONLY):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.threads = threads
        self.batch_size = batch_size
        self.local_cap = local_cap
        kwargs = dict(heap_kwargs or {})
        if mode == TIERED:
            self.heaps = [hp.Heap(**kwargs)]
        else:
            # disjoint address spaces per thread
            self.heaps = []
            for t in range(threads):
                kw = dict(kwargs)
                kw["base_address"] = kwargs.get("base_address", hp.DEFAULT_HEAP_BASE) + t * (1 << 34)
                kw["metadata_region"] = kwargs.get("metadata_region", hp.DEFAULT_META_BASE) + t * hp.META_SPAN
                self.heaps.append(hp.Heap(**kw))
        nclasses = len(self.heaps[0].table.sizes)
        self.nclasses = nclasses
        self.local: List[List[List[int]]] = [[[] for _ in range(nclasses)] for _ in range(threads)]
        self.shared: List[List[int]] = [[] for _ in range(nclasses)]
        self.shared_owner: List[Optional[int]] = [None] * nclasses
        self.owner: Dict[int, int] = {}  # block addr -> allocating thread
        self.atomic_sync_count = 0
        self.shared_op_count = 0

    # ------------------------------------------------------------- helpers

    def _heap(self, thread_id: int) -> hp.Heap:
        return self.heaps[0] if self.mode == TIERED else self.heaps[thread_id]

    def _local_line(self, thread_id: int, cls: int) -> int:
        base = self._heap(thread_id).metadata_region
        return base + hp._META_LOCAL + (thread_id * self.nclasses + cls) * LINE

    def _shared_line(self, cls: int) -> int:
        return self.heaps[0].metadata_region + hp._META_SHARED + cls * LINE

    def _shared_op(self, thread_id: int, cls: int, ev: CostEvents) -> None:
        ev.atomic_syncs += 1
        self.atomic_sync_count += 1
        self.shared_op_count += 1
        ev.meta_touches.append((self._shared_line(cls), True))
        prev = self.shared_owner[cls]
        if prev is not None and prev != thread_id:
            ev.ownership_transfers += 1
        self.shared_owner[cls] = thread_id

    # -------------------------------------------------------------- malloc

    def malloc(self, thread_id: int, size_bytes: int) -> Tuple[int, CostEvents]:
        ev = CostEvents()
        heap = self._heap(thread_id)
        cls = heap.table.size_to_class(size_bytes)
        if cls is None:
            addr, touched, generic = heap.malloc(size_bytes)
            ev.meta_touches += [(a, True) for a in touched]
            ev.took_generic = generic
            if self.mode == TIERED:
                self._shared_op(thread_id, self.nclasses - 1, ev)
            self.owner[addr] = thread_id
            return addr, ev

        cache = self.local[thread_id][cls]
        ev.meta_touches.append((self._local_line(thread_id, cls), True))
        if not cache:
            self._refill(thread_id, cls, ev)
        addr = cache.pop()
        heap.adopt(addr, cls)
        self.owner[addr] = thread_id
        return addr, ev

    def _refill(self, thread_id: int, cls: int, ev: CostEvents) -> None:
        cache = self.local[thread_id][cls]
        if self.mode == TIERED:
            # one locked shared-pool operation, whether it finds blocks in
            # the transfer cache, the central free list, or has to carve
            self._shared_op(thread_id, cls, ev)
            pool = self.shared[cls]
            take = min(self.batch_size, len(pool))
            if take:
                cache.extend(pool[-take:])
                del pool[-take:]
            heap = self.heaps[0]
            while len(cache) < self.batch_size:
                addr, touched = heap.malloc_fast(cls)
                if addr is None:
                    addr, touched = heap.malloc_generic(cls)
                    ev.took_generic = True
                ev.meta_touches += [(a, True) for a in touched]
                # blocks move into the local cache as pooled (not live) blocks
                heap.release(addr)
                cache.append(addr)
        else:
            heap = self._heap(thread_id)
            while len(cache) < self.batch_size:
                addr, touched = heap.malloc_fast(cls)
                if addr is None:
                    addr, touched = heap.malloc_generic(cls)
                    ev.took_generic = True
                ev.meta_touches += [(a, True) for a in touched]
                heap.release(addr)
                cache.append(addr)

    # ---------------------------------------------------------------- free

    def free(self, thread_id: int, addr: int) -> CostEvents:
        ev = CostEvents()
        owner = self.owner.pop(addr, None)
        if owner is None:
            raise hp.InvalidFree(f"address {addr:#x} is not live")
        heap = self._heap(owner)
        cls, _size = heap.release(addr)
        if cls is None:
            heap.free_large.append((addr, _size))
            if self.mode == TIERED:
                self._shared_op(thread_id, self.nclasses - 1, ev)
            return ev

        if self.mode == THREAD_LOCAL_ONLY:
            # whoever frees keeps the block; no shared pool exists, so it
            # strands there until that thread next allocates this class
            self.local[thread_id][cls].append(addr)
            ev.meta_touches.append((self._local_line(thread_id, cls), True))
            return ev

        if thread_id == owner:
            cache = self.local[thread_id][cls]
            cache.append(addr)
            ev.meta_touches.append((self._local_line(thread_id, cls), True))
            if len(cache) > self.local_cap:
                flush = cache[-self.batch_size:]
                del cache[-self.batch_size:]
                self.shared[cls].extend(flush)
                self._shared_op(thread_id, cls, ev)
        else:
            # cross-thread free goes straight to the shared pool
            self.shared[cls].append(addr)
            self._shared_op(thread_id, cls, ev)
        return ev

    # ---------------------------------------------------------- accounting

    @property
    def committed_bytes(self) -> int:
        return sum(h.committed_bytes for h in self.heaps)

    @property
    def peak_committed_bytes(self) -> int:
        # per-heap peaks can occur at different times; track the sum of
        # currents via the engine when exactness matters. For single-heap
        # modes this is exact.
        return sum(h.peak_committed_bytes for h in self.heaps)

    def pooled_blocks(self, cls: int) -> int:
        n = sum(len(self.local[t][cls]) for t in range(self.threads))
        n += len(self.shared[cls])
        n += sum(len(h.free_lists[cls]) for h in self.heaps)
        return n

    def live_blocks(self, cls: int) -> int:
        return sum(1 for h in self.heaps for c, _ in h.live.values() if c == cls)

    def carved(self, cls: int) -> int:
        return sum(h.carved_blocks[cls] for h in self.heaps)


def blowup_probe(mode: str, threads: int, trace: tr.Trace, batch_size: int = 32,
                 local_cap: int = 64, heap_kwargs: Optional[dict] = None) -> int:
    """Replay a producer/consumer trace; return peak committed bytes.

    ``mode`` is ``centralized`` (one plain heap, the support-core layout),
    ``tiered``, or ``threadlocal``. Replay follows global record order, so
    peaks are exact for all modes.
    """
    if mode == CENTRALIZED:
        heap = hp.Heap(**(heap_kwargs or {}))
        addr_of = {}
        for r in trace.records:
            if r.kind == tr.MALLOC:
                addr_of[r.object_id], _, _ = heap.malloc(r.size_bytes)
            elif r.kind == tr.FREE:
                heap.free(addr_of.pop(r.object_id))
        return heap.peak_committed_bytes

    alloc = TieredAllocator(threads=threads, mode=mode, batch_size=batch_size,
                            local_cap=local_cap, heap_kwargs=heap_kwargs)
    addr_of = {}
    peak = 0
    for r in trace.records:
        if r.kind == tr.MALLOC:
            addr_of[r.object_id], _ = alloc.malloc(r.thread_id, r.size_bytes)
            peak = max(peak, alloc.committed_bytes)
        elif r.kind == tr.FREE:
            alloc.free(r.thread_id, addr_of.pop(r.object_id))
    return peak
