"""Metrics CSV schema (versioned, byte-stable) and markdown reports."""

import csv
from typing import Dict, List

from .energy import PowerModel, energy
from .engine import CATEGORIES, ComparisonReport, ConfigError, Metrics

SCHEMA_VERSION = 1

COLUMNS = [
    "schema", "allocator", "trace_hash", "threads", "total_cycles",
    "compute", "user_mem", "metadata_mem", "atomic_sync", "alloc_wait",
    "alloc_exec", "core_cycle_sum", "support_busy", "support_stall",
    "atomic_share", "l2_miss_cycles", "main_meta_misses",
    "support_meta_miss_cycles", "mmap_calls", "peak_committed_bytes",
    "live_bytes_at_end", "oom_events", "requests", "lat_p50", "lat_p90",
    "lat_max", "energy",
]


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def metrics_to_row(m: Metrics, pm: PowerModel = PowerModel()) -> Dict[str, str]:
    support = m.cache_stats.get("support", {})
    sc_meta = support.get("l1", {}).get("metadata", {}).get("miss_cycles", 0)
    vals = {
        "schema": SCHEMA_VERSION,
        "allocator": m.allocator,
        "trace_hash": m.trace_hash,
        "threads": m.threads,
        "total_cycles": m.total_cycles,
        "compute": m.category_total("compute"),
        "user_mem": m.category_total("user_mem"),
        "metadata_mem": m.category_total("metadata_mem"),
        "atomic_sync": m.category_total("atomic_sync"),
        "alloc_wait": m.category_total("alloc_wait"),
        "alloc_exec": m.category_total("alloc_exec"),
        "core_cycle_sum": m.core_cycle_sum,
        "support_busy": m.support_busy,
        "support_stall": m.support_stall,
        "atomic_share": m.atomic_share,
        "l2_miss_cycles": m.l2_miss_cycles,
        "main_meta_misses": m.main_meta_misses,
        "support_meta_miss_cycles": sc_meta,
        "mmap_calls": m.mmap_call_count,
        "peak_committed_bytes": m.peak_committed_bytes,
        "live_bytes_at_end": m.live_bytes_at_end,
        "oom_events": m.oom_events,
        "requests": len(m.request_latencies),
        "lat_p50": m.latency_percentile(0.5),
        "lat_p90": m.latency_percentile(0.9),
        "lat_max": max(m.request_latencies, default=0),
        "energy": energy(m, pm),
    }
    return {k: fmt(v) for k, v in vals.items()}


def write_metrics_csv(path: str, rows: List[Dict[str, str]], extra_cols=()) -> None:
    cols = list(extra_cols) + COLUMNS
    with open(path, "w", newline="", encoding="ascii") as f:
        w = csv.DictWriter(f, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_metrics_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline="", encoding="ascii") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ConfigError(f"{path}: no metric rows")
    for row in rows:
        if int(row.get("schema", -1)) != SCHEMA_VERSION:
            raise ConfigError(f"{path}: unsupported metrics schema {row.get('schema')}")
    return rows


def render_run_md(m: Metrics, pm: PowerModel = PowerModel()) -> str:
    row = metrics_to_row(m, pm)
    lines = [
        f"# Run report: {m.allocator}",
        "",
        f"- trace hash: `{m.trace_hash}`  threads: {m.threads}",
        f"- total cycles: {m.total_cycles}",
        f"- energy: {row['energy']} units",
        f"- peak committed: {m.peak_committed_bytes} bytes"
        f" (live at end: {m.live_bytes_at_end})",
        f"- mmap calls: {m.mmap_call_count}  oom events: {m.oom_events}",
        f"- atomic share of core cycles: {fmt(m.atomic_share)}",
        f"- L2 miss cycles (main cores): {m.l2_miss_cycles}",
        f"- main-core metadata misses: {m.main_meta_misses}",
        "",
        "## Per-core cycle breakdown",
        "",
        "| core | " + " | ".join(CATEGORIES) + " | total |",
        "|------|" + "|".join(["---"] * (len(CATEGORIES) + 1)) + "|",
    ]
    for c, d in enumerate(m.per_core):
        cells = " | ".join(str(d[cat]) for cat in CATEGORIES)
        lines.append(f"| {c} | {cells} | {d['total']} |")
    if m.allocator == "speedmalloc":
        lines += ["", f"support core: busy {m.support_busy}, stall {m.support_stall}"]
    return "\n".join(lines) + "\n"


def compare_rows(a: Dict[str, str], b: Dict[str, str]) -> ComparisonReport:
    """Comparison of run a against baseline b, from CSV rows."""
    if a["trace_hash"] != b["trace_hash"]:
        raise ConfigError(
            f"metrics come from different traces ({a['trace_hash']} vs {b['trace_hash']})")
    ta, tb = int(a["total_cycles"]), int(b["total_cycles"])
    return ComparisonReport(
        speedup=tb / ta if ta else float("inf"),
        category_delta={c: int(b[c]) - int(a[c]) for c in CATEGORIES},
        l2_miss_cycle_delta=int(b["l2_miss_cycles"]) - int(a["l2_miss_cycles"]),
        atomic_share_b=float(b["atomic_share"]),
        memory_ratio=(int(a["peak_committed_bytes"]) / int(b["peak_committed_bytes"])
                      if int(b["peak_committed_bytes"]) else float("inf")),
    )


def render_compare_md(a: Dict[str, str], b: Dict[str, str]) -> str:
    rep = compare_rows(a, b)
    lines = [
        f"# Comparison: {a['allocator']} vs baseline {b['allocator']}",
        "",
        f"- trace hash: `{a['trace_hash']}`",
        f"- speedup of {a['allocator']} over {b['allocator']}: {fmt(rep.speedup)}x",
        f"- baseline atomic-cycle share: {fmt(rep.atomic_share_b)}",
        f"- L2-miss-cycle delta (baseline - run): {rep.l2_miss_cycle_delta}",
        f"- peak-memory ratio (run / baseline): {fmt(rep.memory_ratio)}",
        "",
        "## Per-category cycle delta (baseline - run)",
        "",
        "| category | delta |",
        "|----------|-------|",
    ]
    for cat in CATEGORIES:
        lines.append(f"| {cat} | {rep.category_delta[cat]} |")
    return "\n".join(lines) + "\n"
