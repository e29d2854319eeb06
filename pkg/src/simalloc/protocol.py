"""Signal-based offload machinery for the support core.

Data packets carry allocation requests from main cores; hardware message
queues buffer them with malloc priority and round-robin service across
cores; a small direct-mapped register buffer caches per-process translation
state so only the first request of a process ships system registers.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, List, Optional

START = "start"
END = "end"
OP_MALLOC = "malloc"
OP_FREE = "free"

IDLE = "idle"
STAGE1_SENT = "stage1_sent"
STAGE3_WAITING = "stage3_waiting"
STAGE4_RESUMED = "stage4_resumed"


class ProtocolViolation(Exception):
    """An engine bug: a signal arrived in a state that cannot accept it."""


@dataclass(frozen=True)
class DataPacket:
    signal: str  # start | end
    op: str  # malloc | free
    core_id: int
    process_id: int
    payload: int  # size (malloc start), address (free start / malloc end)
    includes_sysregs: bool = False

    def __post_init__(self):
        if self.signal == END and self.op != OP_MALLOC:
            raise ProtocolViolation("only malloc ops produce end packets")

    def encode(self) -> tuple:
        return (self.signal, self.op, self.core_id, self.process_id,
                self.payload, int(self.includes_sysregs))

    @staticmethod
    def decode(fields: tuple) -> "DataPacket":
        sig, op, core, pid, payload, sysregs = fields
        return DataPacket(sig, op, int(core), int(pid), int(payload), bool(sysregs))


@dataclass
class CoreState:
    """Invocation stage of one main core."""

    core_id: int
    stage: str = IDLE

    def malloc_start(self, size: int, process_id: int, first_request: bool) -> DataPacket:
        if self.stage == STAGE3_WAITING:
            raise ProtocolViolation(f"core {self.core_id} already waiting")
        self.stage = STAGE3_WAITING  # stage 1 send + (optional) stage 2 overlap
        return DataPacket(START, OP_MALLOC, self.core_id, process_id, size,
                          includes_sysregs=first_request)

    def free_start(self, address: int, process_id: int, first_request: bool) -> DataPacket:
        if self.stage == STAGE3_WAITING:
            raise ProtocolViolation(f"core {self.core_id} cannot issue while waiting")
        return DataPacket(START, OP_FREE, self.core_id, process_id, address,
                          includes_sysregs=first_request)

    def end_received(self) -> None:
        if self.stage != STAGE3_WAITING:
            raise ProtocolViolation(f"core {self.core_id} got end while {self.stage}")
        self.stage = STAGE4_RESUMED


class Hmq:
    """Dispatch queues (capacity-bounded, with a memory spill buffer),
    the response queue, and the malloc-priority round-robin scheduler."""

    def __init__(self, n_cores: int, capacity: int = 128):
        self.n_cores = n_cores
        self.capacity = capacity
        self.malloc_queue: Deque[DataPacket] = deque()
        self.free_queue: Deque[DataPacket] = deque()
        self.response_queue: Deque[DataPacket] = deque()
        self.spill_malloc: Deque[DataPacket] = deque()
        self.spill_free: Deque[DataPacket] = deque()
        # one cursor per dispatch queue so priority servicing of one queue
        # cannot skew fairness in the other; start before core 0
        self.rr_cursor = {OP_MALLOC: n_cores - 1, OP_FREE: n_cores - 1}

    def dispatch(self, packet: DataPacket) -> None:
        if packet.signal != START:
            raise ProtocolViolation("only start packets are dispatched")
        q, spill = ((self.malloc_queue, self.spill_malloc)
                    if packet.op == OP_MALLOC else (self.free_queue, self.spill_free))
        if len(q) < self.capacity:
            q.append(packet)
        else:
            spill.append(packet)

    def pending(self) -> int:
        return (len(self.malloc_queue) + len(self.free_queue)
                + len(self.spill_malloc) + len(self.spill_free))

    def schedule_next(self) -> Optional[DataPacket]:
        """Oldest request of the round-robin-next core; mallocs first."""
        for op, q, spill in ((OP_MALLOC, self.malloc_queue, self.spill_malloc),
                             (OP_FREE, self.free_queue, self.spill_free)):
            if not q:
                continue
            cursor = self.rr_cursor[op]
            pending_cores = {p.core_id for p in q}
            order = sorted(pending_cores,
                           key=lambda c: (c - cursor - 1) % self.n_cores)
            chosen = order[0]
            for i, p in enumerate(q):
                if p.core_id == chosen:
                    del q[i]
                    break
            self.rr_cursor[op] = chosen
            if spill and len(q) < self.capacity:
                q.append(spill.popleft())
            return p
        return None

    def push_response(self, packet: DataPacket) -> None:
        self.response_queue.append(packet)

    def pop_response(self) -> Optional[DataPacket]:
        return self.response_queue.popleft() if self.response_queue else None


class RegisterBuffer:
    """Direct-mapped per-process translation register cache."""

    def __init__(self, entries: int = 16):
        self.entries = entries
        self.tags: List[Optional[int]] = [None] * entries

    def lookup(self, process_id: int) -> bool:
        """True on hit; a miss installs the entry (evicting the conflict)."""
        slot = process_id % self.entries
        if self.tags[slot] == process_id:
            return True
        self.tags[slot] = process_id
        return False
