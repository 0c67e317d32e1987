"""CRC outer code used for list selection and ACK/NACK decisions.

Bits are processed MSB-first through a shift register preloaded with
``init``; the remainder is appended after the message.  ``crc_check`` runs the
same register over the whole word and tests for a zero remainder, which holds
for any ``init``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["CrcSpec", "CRC16", "crc_remainder", "crc_append", "crc_check", "crc_check_batch"]


@dataclass(frozen=True)
class CrcSpec:
    """``polynomial`` includes the leading ``x^width`` term (0x11021 for CRC-16)."""

    polynomial: int = 0x11021
    width: int = 16
    init: int = 0
    reflect: bool = False

    def __post_init__(self):
        if self.polynomial >> self.width != 1:
            raise ValueError(f"polynomial {self.polynomial:#x} does not have degree {self.width}")
        if not self.polynomial & 1:
            raise ValueError("polynomial must have a nonzero constant term")
        if not 0 <= self.init < (1 << self.width):
            raise ValueError("init does not fit the register")


# x^16 + x^12 + x^5 + 1
CRC16 = CrcSpec()


def _register(bits: np.ndarray, spec: CrcSpec) -> int:
    w = spec.width
    mask = (1 << w) - 1
    reg = spec.init
    if spec.reflect:
        poly = int(f"{spec.polynomial & mask:0{w}b}"[::-1], 2)
        for b in bits:
            fb = (reg & 1) ^ int(b)
            reg >>= 1
            if fb:
                reg ^= poly
    else:
        poly = spec.polynomial & mask
        top = w - 1
        for b in bits:
            fb = ((reg >> top) & 1) ^ int(b)
            reg = (reg << 1) & mask
            if fb:
                reg ^= poly
    return reg


def _reg_to_bits(reg: int, spec: CrcSpec) -> np.ndarray:
    w = spec.width
    if spec.reflect:
        return np.array([(reg >> i) & 1 for i in range(w)], dtype=np.uint8)
    return np.array([(reg >> (w - 1 - i)) & 1 for i in range(w)], dtype=np.uint8)


def _bits(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional bit vector")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bits must be 0/1")
    return arr.astype(np.uint8, copy=False)


def crc_remainder(message, spec: CrcSpec = CRC16) -> np.ndarray:
    """The ``width`` check bits of ``message``."""
    return _reg_to_bits(_register(_bits(message), spec), spec)


def crc_append(message, spec: CrcSpec = CRC16) -> np.ndarray:
    msg = _bits(message)
    return np.concatenate([msg, crc_remainder(msg, spec)])


def crc_check(word, spec: CrcSpec = CRC16) -> bool:
    w = _bits(word)
    if w.size < spec.width:
        raise ValueError(f"word shorter than {spec.width} bits")
    return _register(w, spec) == 0


@lru_cache(maxsize=64)
def _linear_map(length: int, spec: CrcSpec) -> tuple[np.ndarray, np.ndarray]:
    # The register is affine in the input bits: reg(x) = x @ T ^ reg(0).
    zero = np.zeros(length, dtype=np.uint8)
    offset = _reg_to_bits(_register(zero, spec), spec)
    base = CrcSpec(spec.polynomial, spec.width, 0, spec.reflect)
    T = np.empty((length, spec.width), dtype=np.uint8)
    for i in range(length):
        e = zero.copy()
        e[i] = 1
        T[i] = _reg_to_bits(_register(e, base), base)
    return T, offset


def crc_check_batch(words, spec: CrcSpec = CRC16) -> np.ndarray:
    """Vectorized :func:`crc_check` over the rows of ``words``."""
    W = np.asarray(words, dtype=np.uint8)
    if W.ndim != 2 or W.shape[1] < spec.width:
        raise ValueError("expected a 2-D array of words at least width bits long")
    T, offset = _linear_map(W.shape[1], spec)
    rem = (W.astype(np.int64) @ T.astype(np.int64)) & 1
    return ~np.any(rem.astype(np.uint8) ^ offset, axis=1)
