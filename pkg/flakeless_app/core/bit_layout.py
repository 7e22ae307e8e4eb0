"""
64-bit identifier layouts.

An identifier is, from most to least significant bit:

    sign(1) | timestamp | region | machine | sequence

The sign bit is always zero. Region bits are optional (width 0) and, when
present, are carved out of the timestamp field. Standard layout is 1-41-16-6,
performance layout is 1-40-16-7.
"""

from dataclasses import dataclass, field
from typing import Dict

from flakeless_app.errors import FieldOverflow, InvalidLayout, SignBitSet

ID_BITS = 64
SIGN_BIT = 1 << 63
MILLIS_PER_YEAR = 1000 * 86400 * 365.25

# Reference value from the microbenchmark of the standard layout.
MEASURED_MICROBENCH_TPS = 57_634


@dataclass(frozen=True)
class BitLayout:
    timestamp_bits: int
    region_bits: int
    machine_bits: int
    sequence_bits: int
    name: str = field(default="custom", compare=False)

    @property
    def machine_shift(self) -> int:
        return self.sequence_bits

    @property
    def region_shift(self) -> int:
        return self.sequence_bits + self.machine_bits

    @property
    def timestamp_shift(self) -> int:
        return self.sequence_bits + self.machine_bits + self.region_bits

    @property
    def sequence_mask(self) -> int:
        return (1 << self.sequence_bits) - 1

    @property
    def machine_mask(self) -> int:
        return (1 << self.machine_bits) - 1

    @property
    def region_mask(self) -> int:
        return (1 << self.region_bits) - 1

    @property
    def timestamp_mask(self) -> int:
        return (1 << self.timestamp_bits) - 1

    def spec(self) -> str:
        """Render as the "t:r:m:s" form accepted by parse_layout_spec."""
        return f"{self.timestamp_bits}:{self.region_bits}:{self.machine_bits}:{self.sequence_bits}"


@dataclass(frozen=True)
class IdParts:
    timestamp_offset: int
    region: int
    machine_id: int
    sequence: int


def make_layout(
    timestamp_bits: int,
    region_bits: int,
    machine_bits: int,
    sequence_bits: int,
    name: str = "custom",
) -> BitLayout:
    widths = {
        "timestamp_bits": timestamp_bits,
        "region_bits": region_bits,
        "machine_bits": machine_bits,
        "sequence_bits": sequence_bits,
    }
    for key, value in widths.items():
        if not isinstance(value, int) or isinstance(value, bool):
            raise InvalidLayout(f"{key} must be an integer, got {value!r}")
        minimum = 0 if key == "region_bits" else 1
        if value < minimum:
            raise InvalidLayout(f"{key} must be >= {minimum}, got {value}")

    total = 1 + timestamp_bits + region_bits + machine_bits + sequence_bits
    if total != ID_BITS:
        raise InvalidLayout(
            f"sign + {timestamp_bits} + {region_bits} + {machine_bits} + {sequence_bits} "
            f"= {total} bits, expected {ID_BITS}"
        )
    return BitLayout(timestamp_bits, region_bits, machine_bits, sequence_bits, name=name)


STANDARD = make_layout(41, 0, 16, 6, name="standard")
PERFORMANCE = make_layout(40, 0, 16, 7, name="performance")
REGION = make_layout(40, 1, 16, 6, name="region")

PRESETS: Dict[str, BitLayout] = {
    STANDARD.name: STANDARD,
    PERFORMANCE.name: PERFORMANCE,
    REGION.name: REGION,
}


def parse_layout_spec(spec: str) -> BitLayout:
    """Accept a preset name or a custom "t:r:m:s" width spec."""
    spec = spec.strip()
    if spec.lower() in PRESETS:
        return PRESETS[spec.lower()]

    parts = spec.split(":")
    if len(parts) != 4:
        raise InvalidLayout(
            f"layout must be one of {sorted(PRESETS)} or 't:r:m:s', got {spec!r}"
        )
    try:
        widths = [int(p) for p in parts]
    except ValueError:
        raise InvalidLayout(f"layout widths must be integers, got {spec!r}") from None
    return make_layout(*widths)


def _check(name: str, value: int, bits: int) -> None:
    if value < 0 or value >> bits:
        raise FieldOverflow(name, value, bits)


def compose(layout: BitLayout, parts: IdParts) -> int:
    _check("timestamp_offset", parts.timestamp_offset, layout.timestamp_bits)
    _check("region", parts.region, layout.region_bits)
    _check("machine_id", parts.machine_id, layout.machine_bits)
    _check("sequence", parts.sequence, layout.sequence_bits)

    return (
        (parts.timestamp_offset << layout.timestamp_shift)
        | (parts.region << layout.region_shift)
        | (parts.machine_id << layout.machine_shift)
        | parts.sequence
    )


def decompose(layout: BitLayout, id_: int) -> IdParts:
    if id_ < 0 or id_ >> ID_BITS:
        raise FieldOverflow("id", id_, ID_BITS)
    if id_ & SIGN_BIT:
        raise SignBitSet(f"{id_} has the sign bit set")

    return IdParts(
        timestamp_offset=(id_ >> layout.timestamp_shift) & layout.timestamp_mask,
        region=(id_ >> layout.region_shift) & layout.region_mask,
        machine_id=(id_ >> layout.machine_shift) & layout.machine_mask,
        sequence=id_ & layout.sequence_mask,
    )


def max_ids_per_second(layout: BitLayout) -> int:
    return (1 << layout.sequence_bits) * 1000


def lifespan_years(layout: BitLayout) -> float:
    return (1 << layout.timestamp_bits) / MILLIS_PER_YEAR


@dataclass(frozen=True)
class ReferenceScheme:
    """Published parameters of a Snowflake-family scheme, for comparison only."""

    name: str
    coordination_needed: bool
    time_unit_ms: int
    machine_id_source: str
    sequence_bits: int
    monotonic: bool = True

    @property
    def max_tps(self) -> int:
        return (1 << self.sequence_bits) * 1000 // self.time_unit_ms


REFERENCE_SCHEMES = (
    ReferenceScheme("classic-snowflake", True, 1, "configured", 12),
    ReferenceScheme("sonyflake", False, 10, "ip-derived", 8),
    ReferenceScheme("flakeless", False, 1, "ip-derived", STANDARD.sequence_bits),
)
