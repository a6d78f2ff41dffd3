"""Canned synthetic scenarios used by the tests, demos, and docs."""

from __future__ import annotations

from .meterdata import ApplianceProfile


def standard_four_appliance(jitter: float = 0.02) -> list[ApplianceProfile]:
    """Four-appliance household: fridge, two lights, washer-dryer.

    Rated powers 100/60/40/15 W with dwell times giving intermittent
    profiles: a fast-cycling fridge, slower lights, and a rarely-on washer.
    """
    return [
        ApplianceProfile("fridge", 100.0, mean_on_duration_slots=8.0,
                         mean_off_duration_slots=8.0, power_jitter_fraction=jitter),
        ApplianceProfile("light1", 60.0, mean_on_duration_slots=30.0,
                         mean_off_duration_slots=60.0, power_jitter_fraction=jitter),
        ApplianceProfile("washer_dryer", 40.0, mean_on_duration_slots=12.0,
                         mean_off_duration_slots=60.0, power_jitter_fraction=jitter),
        ApplianceProfile("light2", 15.0, mean_on_duration_slots=40.0,
                         mean_off_duration_slots=50.0, power_jitter_fraction=jitter),
    ]
