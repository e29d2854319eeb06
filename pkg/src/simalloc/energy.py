"""Normalized energy model.

Main cores burn 1.0 power unit per cycle; the support core burns a fixed
fraction of that while busy (the little-core power ratio) and a declared
idle fraction while stalled. The uncore power ratio exists as a knob but
defaults to 0: back-solving it from the published chip-share figures gives
a negative value with main cores normalized to 1.0, so it is left out of
the default model (with 16 main cores the support core then draws ~2.06%
of system power, inside the ~2.25% envelope).
"""

from dataclasses import dataclass

from .engine import Metrics

SUPPORT_AREA_RATIO = 0.2443  # support-core area / main-core area


@dataclass(frozen=True)
class PowerModel:
    main_core_power: float = 1.0
    support_core_power_ratio: float = 0.3372
    idle_power_fraction: float = 0.3
    uncore_power_ratio: float = 0.0

    def __post_init__(self):
        if not (0 < self.support_core_power_ratio < 1):
            raise ValueError("support_core_power_ratio must be in (0, 1)")
        if not (0 <= self.idle_power_fraction < 1):
            raise ValueError("idle_power_fraction must be in [0, 1)")


def energy(metrics: Metrics, pm: PowerModel = PowerModel()) -> float:
    """Total energy in main-core-cycle units; additive over components."""
    e = pm.main_core_power * sum(c["total"] for c in metrics.per_core)
    e += pm.support_core_power_ratio * metrics.support_busy
    e += pm.idle_power_fraction * pm.support_core_power_ratio * metrics.support_stall
    e += pm.uncore_power_ratio * metrics.total_cycles
    return e
