"""Flat key=value configuration files.

Format: one ``section.key=value`` per line, ``#`` comments, blank lines
ignored. Values accept K/M/G suffixes. Unknown keys are hard errors so a
typo cannot silently fall back to a default.
"""

from typing import Dict, Optional

from .cache import CacheLevelConfig, HwConfig
from .engine import AllocatorConfig, ConfigError
from .energy import PowerModel

# every recognized key with its default
DEFAULTS: Dict[str, object] = {
    "hw.l1_size": 32 * 1024, "hw.l1_ways": 8, "hw.l1_lat": 4,
    "hw.l2_size": 256 * 1024, "hw.l2_ways": 8, "hw.l2_lat": 12,
    "hw.llc_size": 2 * 1024 * 1024, "hw.llc_ways": 16, "hw.llc_lat": 24,
    "hw.sc_l1_size": 16 * 1024, "hw.sc_l1_ways": 4, "hw.sc_l1_lat": 2,
    "hw.dram_lat": 100,
    "hw.coherence_lat": 60,
    "hw.l2_partition_meta_ways": 0,
    "alloc.chunk_size": 64 * 1024,
    "alloc.meta_lines_fast": 3,
    "alloc.meta_lines_generic": 8,
    "alloc.chunk_budget": 0,  # 0 = unlimited
    "alloc.batch_size": 32,
    "alloc.local_cap": 64,
    "cost.atomic_cycles": 700,
    "cost.alloc_fast_instr_cycles": 50,
    "cost.alloc_generic_extra_cycles": 400,
    "proto.signal_lat": 8,
    "proto.overlap_cycles": 0,
    "proto.update_cycles": 10,
    "proto.hmq_capacity": 128,
    "proto.rb_entries": 16,
    "proto.sysreg_install_cycles": 12,
    "power.support_core_power_ratio": 0.3372,
    "power.idle_power_fraction": 0.3,
    "power.uncore_power_ratio": 0.0,
}

_SUFFIX = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}


def parse_value(text: str):
    text = text.strip()
    if text and text[-1].upper() in _SUFFIX:
        return int(float(text[:-1]) * _SUFFIX[text[-1].upper()])
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> dict:
    """Full config dict: defaults, then file entries, then overrides."""
    cfg = dict(DEFAULTS)
    if path:
        with open(path, encoding="ascii") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in DEFAULTS:
                    raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
                cfg[key] = parse_value(val)
    for key, val in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = parse_value(val) if isinstance(val, str) else val
    return cfg


def build_hw(cfg: dict) -> HwConfig:
    def level(prefix):
        return CacheLevelConfig(cfg[f"hw.{prefix}_size"], cfg[f"hw.{prefix}_ways"],
                                cfg[f"hw.{prefix}_lat"])
    return HwConfig(
        l1=level("l1"), l2=level("l2"), llc=level("llc"), sc_l1=level("sc_l1"),
        dram_latency=cfg["hw.dram_lat"],
        coherence_latency=cfg["hw.coherence_lat"],
        l2_partition_meta_ways=cfg["hw.l2_partition_meta_ways"],
    )


def build_alloc(cfg: dict, kind: str) -> AllocatorConfig:
    return AllocatorConfig(
        kind=kind,
        atomic_cycles=cfg["cost.atomic_cycles"],
        alloc_fast_instr_cycles=cfg["cost.alloc_fast_instr_cycles"],
        alloc_generic_extra_cycles=cfg["cost.alloc_generic_extra_cycles"],
        chunk_size=cfg["alloc.chunk_size"],
        meta_lines_fast=cfg["alloc.meta_lines_fast"],
        meta_lines_generic=cfg["alloc.meta_lines_generic"],
        chunk_budget=cfg["alloc.chunk_budget"] or None,
        batch_size=cfg["alloc.batch_size"],
        local_cap=cfg["alloc.local_cap"],
        signal_lat=cfg["proto.signal_lat"],
        overlap_cycles=cfg["proto.overlap_cycles"],
        update_cycles=cfg["proto.update_cycles"],
        hmq_capacity=cfg["proto.hmq_capacity"],
        rb_entries=cfg["proto.rb_entries"],
        sysreg_install_cycles=cfg["proto.sysreg_install_cycles"],
    )


def build_power(cfg: dict) -> PowerModel:
    return PowerModel(
        support_core_power_ratio=cfg["power.support_core_power_ratio"],
        idle_power_fraction=cfg["power.idle_power_fraction"],
        uncore_power_ratio=cfg["power.uncore_power_ratio"],
    )
