"""
Core of flakeless: bit layouts, clocks and the generator state machine.
"""

from .bit_layout import (
    PERFORMANCE,
    PRESETS,
    REGION,
    STANDARD,
    BitLayout,
    IdParts,
    compose,
    decompose,
    lifespan_years,
    make_layout,
    max_ids_per_second,
    parse_layout_spec,
)
from .clock import ClockSource, VirtualClock, WallClock
from .generator import Generator, GeneratorConfig, GeneratorStats, new_generator

__all__ = [
    "BitLayout",
    "IdParts",
    "STANDARD",
    "PERFORMANCE",
    "REGION",
    "PRESETS",
    "make_layout",
    "parse_layout_spec",
    "compose",
    "decompose",
    "max_ids_per_second",
    "lifespan_years",
    "ClockSource",
    "WallClock",
    "VirtualClock",
    "Generator",
    "GeneratorConfig",
    "GeneratorStats",
    "new_generator",
]
