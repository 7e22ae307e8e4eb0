"""
FNV-1a 64-bit hash, used for salted machine IDs.

Implemented here so the salted derivation is byte-exact and identical across
implementations in any language.
"""

FNV1A_64_OFFSET_BASIS = 0xCBF29CE484222325
FNV1A_64_PRIME = 0x100000001B3
_MASK_64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    if not isinstance(data, (bytes, bytearray)):
        raise TypeError(f"fnv1a_64 expects bytes, got {type(data).__name__}")

    hval = FNV1A_64_OFFSET_BASIS
    for byte in data:
        hval ^= byte
        hval = (hval * FNV1A_64_PRIME) & _MASK_64
    return hval
