"""Centralized segregated free-list allocator.

Block addresses are synthetic: chunks are carved from a flat address space
starting at ``base_address``, and all allocator bookkeeping lives in a
separate ``metadata_region`` that never overlaps any chunk. Operations
return the metadata cache-line addresses they touch so a cache model can
charge for them.
"""

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

LINE = 64

DEFAULT_CHUNK = 64 * 1024
DEFAULT_META_BASE = 1 << 40
DEFAULT_HEAP_BASE = 1 << 24


class InvalidFree(Exception):
    """Free of an address that is not currently live."""


class OutOfMemory(Exception):
    """Chunk budget exhausted."""


@dataclass(frozen=True)
class SizeClassTable:
    """Strictly increasing block sizes; larger requests take whole chunks."""

    sizes: Tuple[int, ...]
    large_threshold: int

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("empty size-class table")
        prev = 0
        for s in self.sizes:
            if s <= prev or s % 16:
                raise ValueError("class sizes must be increasing multiples of 16")
            prev = s

    @staticmethod
    def default() -> "SizeClassTable":
        # powers of two, 16B .. 32KB
        sizes = tuple(1 << p for p in range(4, 16))
        return SizeClassTable(sizes=sizes, large_threshold=sizes[-1])

    def size_to_class(self, size_bytes: int) -> Optional[int]:
        """Smallest class with block size >= request; None means Large.

        Size 0 is served from the smallest class.
        """
        if size_bytes < 0:
            raise ValueError("negative size")
        if size_bytes > self.large_threshold:
            return None
        return bisect_right(self.sizes, size_bytes - 1) if size_bytes > 1 else 0


@dataclass
class Chunk:
    base: int
    length: int
    carved: int = 0  # bytes carved into blocks so far


# offsets of metadata sub-regions within metadata_region (all line-aligned)
_META_CLASS = 0x00000
_META_HEAD = 0x10000
_META_BLOCK = 0x20000
_META_CHUNK = 0x30000
_META_INIT = 0x40000
_META_SHARED = 0x50000  # used by the tiered baseline's shared pool
_META_LOCAL = 0x80000  # used by the tiered baseline's per-thread caches
META_SPAN = 1 << 24


@dataclass
class Heap:
    """Single-owner allocator state; never shared concurrently."""

    table: SizeClassTable = field(default_factory=SizeClassTable.default)
    chunk_size: int = DEFAULT_CHUNK
    meta_lines_fast: int = 3
    meta_lines_generic: int = 8
    chunk_budget: Optional[int] = None
    base_address: int = DEFAULT_HEAP_BASE
    metadata_region: int = DEFAULT_META_BASE

    def __post_init__(self):
        n = len(self.table.sizes)
        self.free_lists: List[List[int]] = [[] for _ in range(n)]
        self.chunks: List[Chunk] = []
        self.free_large: List[Tuple[int, int]] = []  # (base, length)
        self.live: Dict[int, Tuple[Optional[int], int]] = {}  # addr -> (class, size)
        self.committed_bytes = 0
        self.peak_committed_bytes = 0
        self.mmap_call_count = 0
        self.carved_blocks = [0] * n
        self._next_base = self.base_address

    # ------------------------------------------------------------ metadata

    def metadata_touch_set(self, op_kind: str, class_index: int, addr: int = 0) -> List[int]:
        """Synthetic metadata line addresses touched by one operation.

        The class-table and list-head lines are stable per class (temporal
        locality); block-header lines vary with the block. The generic path
        additionally touches chunk-table and free-list-initialization lines.
        """
        base = self.metadata_region
        lines = [base + _META_CLASS + class_index * LINE,
                 base + _META_HEAD + class_index * LINE]
        if op_kind == "generic":
            lines.append(base + _META_CHUNK + (len(self.chunks) % 256) * LINE)
            for i in range(self.meta_lines_generic - 3):
                lines.append(base + _META_INIT + ((addr >> 6) % 256 + i) % 1024 * LINE)
        else:
            for i in range(self.meta_lines_fast - 2):
                lines.append(base + _META_BLOCK + (((addr >> 4) + i) % 1024) * LINE)
        return lines

    # ----------------------------------------------------------- fast path

    def malloc_fast(self, class_index: int) -> Tuple[Optional[int], List[int]]:
        """Pop the head of the class free list; None means go generic."""
        fl = self.free_lists[class_index]
        if not fl:
            return None, self.metadata_touch_set("fast", class_index)[:2]
        addr = fl.pop()
        self.live[addr] = (class_index, self.table.sizes[class_index])
        return addr, self.metadata_touch_set("fast", class_index, addr)

    # ----------------------------------------------------------- slow path

    def malloc_generic(self, class_index: int, chunk_size: Optional[int] = None) -> Tuple[int, List[int]]:
        """Acquire a fresh chunk, carve it into blocks, satisfy the request."""
        size = chunk_size or self.chunk_size
        chunk = self._acquire_chunk(size)
        bsize = self.table.sizes[class_index]
        nblocks = chunk.length // bsize
        # push in reverse so the lowest address pops first
        fl = self.free_lists[class_index]
        for i in range(nblocks - 1, -1, -1):
            fl.append(chunk.base + i * bsize)
        chunk.carved = nblocks * bsize
        self.carved_blocks[class_index] += nblocks
        addr, _ = self.malloc_fast(class_index)
        return addr, self.metadata_touch_set("generic", class_index, addr)

    def _acquire_chunk(self, length: int) -> Chunk:
        if self.chunk_budget is not None and len(self.chunks) >= self.chunk_budget:
            raise OutOfMemory(f"chunk budget of {self.chunk_budget} exhausted")
        # keep bases aligned to the chunk size so every carved block address
        # is a multiple of its (power-of-two) class size
        base = self._next_base
        align = self.chunk_size
        base = (base + align - 1) // align * align
        chunk = Chunk(base=base, length=length)
        self._next_base = base + length
        self.chunks.append(chunk)
        self.committed_bytes += length
        self.peak_committed_bytes = max(self.peak_committed_bytes, self.committed_bytes)
        self.mmap_call_count += 1
        return chunk

    # -------------------------------------------------------------- malloc

    def malloc(self, size_bytes: int) -> Tuple[int, List[int], bool]:
        """Allocate; returns (address, metadata lines touched, took_generic)."""
        cls = self.table.size_to_class(size_bytes)
        if cls is None:
            return self._malloc_large(size_bytes)
        addr, touched = self.malloc_fast(cls)
        if addr is not None:
            return addr, touched, False
        addr, touched = self.malloc_generic(cls)
        return addr, touched, True

    def _malloc_large(self, size_bytes: int) -> Tuple[int, List[int], bool]:
        need = (size_bytes + 4095) // 4096 * 4096
        # first-fit smallest reusable chunk from earlier large frees
        best = None
        for i, (base, length) in enumerate(self.free_large):
            if length >= need and (best is None or length < self.free_large[best][1]):
                best = i
        touched = self.metadata_touch_set("generic", len(self.table.sizes) - 1)
        if best is not None:
            base, length = self.free_large.pop(best)
            self.live[base] = (None, length)
            return base, touched, False
        chunk = self._acquire_chunk(need)
        self.live[chunk.base] = (None, chunk.length)
        chunk.carved = chunk.length
        return chunk.base, touched, True

    # ---------------------------------------------------------------- free

    def free(self, addr: int) -> List[int]:
        """Return a live block to its class list (chunks stay committed)."""
        cls, length = self.release(addr)
        if cls is None:
            self.free_large.append((addr, length))
            return self.metadata_touch_set("fast", len(self.table.sizes) - 1, addr)
        self.free_lists[cls].append(addr)
        return self.metadata_touch_set("fast", cls, addr)

    def release(self, addr: int) -> Tuple[Optional[int], int]:
        """Remove a block from the live set without recycling it.

        Used by callers that keep their own block pools (the tiered
        baseline); the centralized path should call ``free``.
        """
        entry = self.live.pop(addr, None)
        if entry is None:
            raise InvalidFree(f"address {addr:#x} is not live")
        return entry

    def adopt(self, addr: int, class_index: int) -> None:
        """Mark an externally pooled block live again."""
        if addr in self.live:
            raise InvalidFree(f"address {addr:#x} already live")
        self.live[addr] = (class_index, self.table.sizes[class_index])

    # ---------------------------------------------------------- accounting

    @property
    def live_bytes(self) -> int:
        return sum(size for _, size in self.live.values())
