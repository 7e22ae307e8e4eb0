"""
Exception hierarchy for flakeless.

Every error raised on purpose by the package derives from FlakelessError so
callers (the service, the CLI) can separate expected failures from bugs.
"""

from typing import Optional


class FlakelessError(Exception):
    """Base class for all flakeless errors."""


# --- bit layout ---------------------------------------------------------------

class InvalidLayout(FlakelessError, ValueError):
    """Field widths do not describe a valid 64-bit layout."""


class FieldOverflow(FlakelessError, ValueError):
    """A field value does not fit its layout width."""

    def __init__(self, field: str, value: int, bits: int):
        self.field = field
        self.value = value
        self.bits = bits
        super().__init__(f"{field}={value} does not fit in {bits} bits")


class SignBitSet(FlakelessError, ValueError):
    """An identifier has bit 63 set."""


# --- clock --------------------------------------------------------------------

class SimulationStall(FlakelessError):
    """A virtual clock was asked to wait but nothing advances it."""


# --- generator ----------------------------------------------------------------

class InvalidConfig(FlakelessError, ValueError):
    """Generator configuration violates its invariants."""


class GeneratorUnavailable(FlakelessError):
    """Issuance failed in a way that marks the node unhealthy."""

    reason = "generator_unavailable"


class ClockMovedBackwards(GeneratorUnavailable):
    reason = "clock_moved_backwards"

    def __init__(self, offset_ms: int, tolerance_ms: int):
        self.offset_ms = offset_ms
        self.tolerance_ms = tolerance_ms
        super().__init__(
            f"clock moved backwards by {offset_ms} ms (tolerance {tolerance_ms} ms)"
        )


class TimestampExhausted(GeneratorUnavailable):
    reason = "timestamp_exhausted"


class BatchTooLarge(FlakelessError, ValueError):
    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"batch of {count} exceeds cap {cap}")


# --- identity -----------------------------------------------------------------

class InvalidAddress(FlakelessError, ValueError):
    """Not a usable dotted-quad IPv4 address."""


class EmptySaltOrUid(FlakelessError, ValueError):
    """Salted derivation needs both a pod UID and a salt."""


class MetadataUnreachable(FlakelessError):
    """The metadata endpoint could not be reached after all retries."""


class MetadataMalformed(FlakelessError):
    """The metadata endpoint answered with an unusable body."""


class NoUsableAddress(FlakelessError):
    """Local interfaces expose no usable IPv4 address."""


class ResolutionFailed(FlakelessError):
    """No strategy produced a machine identity."""


# --- simulation ---------------------------------------------------------------

class ScenarioInvalid(FlakelessError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CapacityExhausted(FlakelessError):
    """The simulated subnet has no free address for a spawn."""
