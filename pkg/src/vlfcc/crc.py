"""CRC append/check with polynomials given in Koopman hex notation.

Koopman notation drops the implicit +1 term: bit i of the hex value set
means a term x^(i+1), so 0xcd = x^8+x^7+x^4+x^3+x+1 (width 8) and
0x8810 = x^16+x^12+x^5+1 (width 16).

Fixed register convention, used consistently everywhere: zero initial
register, no input/output reflection, no final XOR; the remainder of
msg(x)*x^A mod g(x) is appended MSB-first.  Message bit 0 is the
highest-degree coefficient (first on the wire).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CrcPoly", "crc_append", "crc_check", "crc_remainder"]


@dataclass(frozen=True)
class CrcPoly:
    width: int
    koopman: int

    def __post_init__(self) -> None:
        if self.koopman <= 0:
            raise ValueError("CRC polynomial must be positive")
        if self.width != self.koopman.bit_length():
            raise ValueError(
                f"width {self.width} inconsistent with Koopman value 0x{self.koopman:x} "
                f"(expected {self.koopman.bit_length()})"
            )

    @classmethod
    def from_koopman_hex(cls, text: str | int) -> "CrcPoly":
        val = int(text, 16) if isinstance(text, str) else int(text)
        return cls(val.bit_length(), val)

    @property
    def full_mask(self) -> int:
        """Explicit polynomial mask of degree `width`: bit i = coefficient of x^i."""
        return (self.koopman << 1) | 1

    def terms(self) -> list[int]:
        """Exponents with nonzero coefficients, descending."""
        full = self.full_mask
        return [i for i in range(self.width, -1, -1) if (full >> i) & 1]


def crc_remainder(bits, poly: CrcPoly) -> int:
    """Polynomial remainder of the given bit stream (bit 0 = highest degree)."""
    full = poly.full_mask
    a = poly.width
    rem = 0
    for b in np.asarray(bits, dtype=np.uint8):
        rem = (rem << 1) | int(b)
        if (rem >> a) & 1:
            rem ^= full
    return rem


def crc_append(msg, poly: CrcPoly) -> np.ndarray:
    """Append the A check bits: output passes crc_check by construction."""
    bits = np.asarray(msg, dtype=np.uint8)
    if bits.size < 1:
        raise ValueError("message must contain at least one bit")
    a = poly.width
    padded = np.concatenate([bits, np.zeros(a, dtype=np.uint8)])
    rem = crc_remainder(padded, poly)
    check = np.array([(rem >> (a - 1 - j)) & 1 for j in range(a)], dtype=np.uint8)
    return np.concatenate([bits, check])


def crc_check(bits, poly: CrcPoly) -> bool:
    """True iff the k+A bit word has zero remainder."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size <= poly.width:
        raise ValueError("word shorter than the CRC width")
    return crc_remainder(arr, poly) == 0
