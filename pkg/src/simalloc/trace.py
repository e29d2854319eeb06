"""Trace records, validation, and the portable on-disk trace format.

A trace is an ordered sequence of timed allocator events across logical
threads. The file format is bit-exact ASCII: one header line followed by one
record per line (see ``write_trace``).
"""

from dataclasses import dataclass
from typing import IO, List, Optional

MALLOC = "M"
FREE = "F"
ACCESS = "A"
COMPUTE = "C"

READ = "R"
WRITE = "W"

LINE_BYTES = 64

TRACE_MAGIC = "#SIMALLOC-TRACE"
TRACE_VERSION = 1


class TraceFormatError(ValueError):
    """Raised on a malformed trace file; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True, slots=True)
class TraceRecord:
    kind: str
    thread_id: int
    object_id: Optional[int] = None
    size_bytes: Optional[int] = None
    line_count: Optional[int] = None
    rw: Optional[str] = None
    cycles: Optional[int] = None


def malloc(tid: int, oid: int, size: int) -> TraceRecord:
    return TraceRecord(MALLOC, tid, object_id=oid, size_bytes=size)


def free(tid: int, oid: int) -> TraceRecord:
    return TraceRecord(FREE, tid, object_id=oid)


def access(tid: int, oid: int, lines: int, rw: str) -> TraceRecord:
    return TraceRecord(ACCESS, tid, object_id=oid, line_count=lines, rw=rw)


def compute(tid: int, cycles: int) -> TraceRecord:
    return TraceRecord(COMPUTE, tid, cycles=cycles)


@dataclass
class Trace:
    threads: int
    seed: int
    rng_name: str
    records: List[TraceRecord]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ValidationReport:
    """Per-record problems found by ``validate``; empty means valid."""

    errors: List[tuple]  # (record_index, message)

    @property
    def valid(self) -> bool:
        return not self.errors


def validate(trace: Trace) -> ValidationReport:
    """Check malloc/free/access ordering rules over the whole trace.

    Reported problems: free-before-malloc, double free, access-after-free
    (or access to a never-allocated object), unknown thread ids, and access
    spans wider than the object.
    """
    errors = []
    live = {}  # object_id -> size_bytes
    freed = set()
    for i, r in enumerate(trace.records):
        if not (0 <= r.thread_id < trace.threads):
            errors.append((i, f"unknown thread_id {r.thread_id}"))
            continue
        if r.kind == MALLOC:
            if r.object_id in live:
                errors.append((i, f"object {r.object_id} malloc'd while live"))
            else:
                live[r.object_id] = r.size_bytes
                freed.discard(r.object_id)
        elif r.kind == FREE:
            if r.object_id in live:
                del live[r.object_id]
                freed.add(r.object_id)
            elif r.object_id in freed:
                errors.append((i, f"double free of object {r.object_id}"))
            else:
                errors.append((i, f"free-before-malloc of object {r.object_id}"))
        elif r.kind == ACCESS:
            if r.object_id not in live:
                errors.append((i, f"access to non-live object {r.object_id}"))
            else:
                max_lines = -(-live[r.object_id] // LINE_BYTES)
                if r.line_count > max_lines:
                    errors.append(
                        (i, f"access spans {r.line_count} lines, object has {max_lines}")
                    )
    return ValidationReport(errors)


def write_trace(trace: Trace, sink: IO[str]) -> None:
    """Write the bit-exact text format: ASCII, LF endings, decimal fields."""
    sink.write(
        f"{TRACE_MAGIC} v{TRACE_VERSION} threads={trace.threads} "
        f"seed={trace.seed} rng={trace.rng_name}\n"
    )
    for r in trace.records:
        if r.kind == MALLOC:
            sink.write(f"M {r.thread_id} {r.object_id} {r.size_bytes}\n")
        elif r.kind == FREE:
            sink.write(f"F {r.thread_id} {r.object_id}\n")
        elif r.kind == ACCESS:
            sink.write(f"A {r.thread_id} {r.object_id} {r.line_count} {r.rw}\n")
        elif r.kind == COMPUTE:
            sink.write(f"C {r.thread_id} {r.cycles}\n")
        else:
            raise ValueError(f"unknown record kind {r.kind!r}")


def read_trace(source: IO[str]) -> Trace:
    """Parse a trace file; raises TraceFormatError with the offending line."""
    header = source.readline()
    if not header:
        raise TraceFormatError(1, "empty file")
    parts = header.rstrip("\n").split(" ")
    if len(parts) != 5 or parts[0] != TRACE_MAGIC:
        raise TraceFormatError(1, "bad header magic")
    if parts[1] != f"v{TRACE_VERSION}":
        raise TraceFormatError(1, f"unsupported trace version {parts[1]!r}")
    try:
        threads = _field(parts[2], "threads", 1)
        seed = _field(parts[3], "seed", 1)
    except ValueError as e:
        raise TraceFormatError(1, str(e)) from None
    if not parts[4].startswith("rng="):
        raise TraceFormatError(1, "missing rng field")
    rng_name = parts[4][4:]

    records = []
    for lineno, line in enumerate(source, start=2):
        fields = line.rstrip("\n").split(" ")
        kind = fields[0]
        try:
            if kind == MALLOC and len(fields) == 4:
                records.append(malloc(int(fields[1]), int(fields[2]), int(fields[3])))
            elif kind == FREE and len(fields) == 3:
                records.append(free(int(fields[1]), int(fields[2])))
            elif kind == ACCESS and len(fields) == 5 and fields[4] in (READ, WRITE):
                records.append(
                    access(int(fields[1]), int(fields[2]), int(fields[3]), fields[4])
                )
            elif kind == COMPUTE and len(fields) == 3:
                records.append(compute(int(fields[1]), int(fields[2])))
            else:
                raise TraceFormatError(lineno, f"malformed record {line.rstrip()!r}")
        except TraceFormatError:
            raise
        except ValueError:
            raise TraceFormatError(lineno, f"non-numeric field in {line.rstrip()!r}") from None
    return Trace(threads=threads, seed=seed, rng_name=rng_name, records=records)


def _field(token: str, name: str, lineno: int) -> int:
    prefix = name + "="
    if not token.startswith(prefix):
        raise ValueError(f"missing {name} field")
    return int(token[len(prefix):])
