"""Cyclic redundancy checks computed with a bitwise LFSR.

Polynomials use the implicit "+1" hex notation: for a width-``w`` check the
bits ``b[w-1] .. b[0]`` of ``poly_hex`` are the coefficients of ``D^w .. D^1``
and the constant term is always 1, so CRC-4 ``0x9`` is ``D^4 + D + 1``.

Bits are processed MSB first, the register starts at zero, and there is no
reflection and no final XOR.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from numba import njit

# Koopman-recommended polynomials used for the segmented codes, plus common
# standard ones (converted to implicit "+1" form) for single-CRC setups
POLY_TABLE = {
    1: 0x1,
    2: 0x3,
    3: 0x5,
    4: 0x9,
    5: 0x12,
    6: 0x21,
    7: 0x44,
    8: 0xA6,
    10: 0x327,
    11: 0x583,
    16: 0x8810,
    24: 0xC3267D,
    32: 0x82608EDB,
}


@dataclass(frozen=True)
class CrcSpec:
    width: int
    poly_hex: int = 0

    def __post_init__(self):
        if self.width < 0:
            raise ValueError(f"CRC width must be nonnegative, got {self.width}")
        if self.width == 0:
            return
        if not (1 << (self.width - 1)) <= self.poly_hex < (1 << self.width):
            raise ValueError(
                f"poly 0x{self.poly_hex:X} does not describe a degree-{self.width} generator"
            )

    @property
    def generator(self) -> int:
        """Full generator polynomial as an integer of degree `width` (MSB = D^width)."""
        if self.width == 0:
            return 1
        return (self.poly_hex << 1) | 1

    @property
    def feedback(self) -> int:
        """LFSR tap mask: generator without its leading term."""
        return self.generator & ((1 << self.width) - 1)

    @classmethod
    def named(cls, width: int, poly_hex: int | None = None) -> "CrcSpec":
        """Spec for `width`, defaulting the polynomial from the shipped table."""
        if width == 0:
            return cls(0, 0)
        if poly_hex is None:
            try:
                poly_hex = POLY_TABLE[width]
            except KeyError:
                raise ValueError(
                    f"no default polynomial for CRC width {width}; supply poly_hex explicitly"
                ) from None
        return cls(width, poly_hex)

    def __str__(self) -> str:
        if self.width == 0:
            return "none"
        return f"CRC-{self.width} (0x{self.poly_hex:X})"


@njit(cache=True)
def lfsr_remainder(bits, start, stop, width, feedback):
    """Remainder of ``bits[start:stop] * D^width`` mod g as an int (MSB = D^(width-1))."""
    mask = (1 << width) - 1
    top = width - 1
    reg = 0
    for k in range(start, stop):
        fb = (bits[k] ^ (reg >> top)) & 1
        reg = (reg << 1) & mask
        if fb:
            reg ^= feedback
    return reg


def _as_bits(bits: Iterable[int]) -> np.ndarray:
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequence must be one-dimensional")
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequence may only contain 0 and 1")
    return arr


def int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - k)) & 1 for k in range(width)], dtype=np.uint8)


def crc_remainder(message: Iterable[int], spec: CrcSpec) -> np.ndarray:
    if spec.width == 0:
        raise ValueError("a width-0 CRC has no remainder; skip the check instead")
    msg = _as_bits(message)
    reg = lfsr_remainder(msg, 0, msg.size, spec.width, spec.feedback)
    return int_to_bits(reg, spec.width)


def crc_append(message: Iterable[int], spec: CrcSpec) -> np.ndarray:
    msg = _as_bits(message)
    if spec.width == 0:
        return msg.copy()
    return np.concatenate([msg, crc_remainder(msg, spec)])


def crc_verify(codeword: Iterable[int], spec: CrcSpec) -> bool:
    bits = _as_bits(codeword)
    if bits.size < spec.width:
        raise ValueError(f"input of {bits.size} bits is shorter than the CRC width {spec.width}")
    if spec.width == 0:
        return True
    k = bits.size - spec.width
    reg = lfsr_remainder(bits, 0, k, spec.width, spec.feedback)
    return bool(np.array_equal(int_to_bits(reg, spec.width), bits[k:]))
