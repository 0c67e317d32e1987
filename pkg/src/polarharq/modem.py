"""Set-partitioned ``2^m``-ASK, the AWGN channel and multistage demapping.

Label ``(b_1, .., b_m)`` with ``b_1`` the least significant bit selects the
amplitude index ``i = sum b_j 2^(j-1)`` and the point ``2i - (2^m - 1)``.
Fixing ``b_1 .. b_j`` leaves points spaced ``2^(j+1)`` apart, which is the
set-partitioning property.  For ``m = 1`` the map is flipped to the usual
BPSK convention ``0 -> +1`` so that positive LLRs favour bit 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .construction import sigma_to_snr_db, snr_db_to_sigma
from .crc import CrcSpec
from .decoder import DecodeResult, list_decode_levels
from .polar import FrozenSpec, assemble_u, polar_transform

__all__ = [
    "Constellation",
    "ChannelModel",
    "map_symbols",
    "awgn",
    "demap_level",
    "mlpc_encode",
    "mlpc_decode",
]


@dataclass(frozen=True)
class Constellation:
    """Unnormalized ``2^m``-ASK with set-partitioning labels."""

    m: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        M = 1 << self.m
        if self.m == 1:
            pts = np.array([1.0, -1.0])
        else:
            pts = 2.0 * np.arange(M) - (M - 1)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def energy(self) -> float:
        """``E[X^2]`` for uniform symbols."""
        return ((1 << (2 * self.m)) - 1) / 3.0

    def label(self, index: int) -> tuple[int, ...]:
        """Bits ``(b_1, .., b_m)`` of the point with table index ``index``."""
        return tuple((index >> j) & 1 for j in range(self.m))

    def to_json(self) -> str:
        rows = [{"label": list(self.label(i)), "point": float(self.points[i])} for i in range(self.size)]
        return json.dumps({"m": self.m, "energy": self.energy, "map": rows})


@dataclass(frozen=True)
class ChannelModel:
    """``Y = X + sigma Z`` with SNR ``E[X^2] / sigma^2``."""

    sigma: float
    m: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_snr_db(cls, snr_db: float, m: int = 1) -> "ChannelModel":
        return cls(snr_db_to_sigma(snr_db, m), m)

    @property
    def snr_db(self) -> float:
        return sigma_to_snr_db(self.sigma, self.m)


def _label_index(level_bits: np.ndarray) -> np.ndarray:
    weights = (1 << np.arange(level_bits.shape[-2]))[:, None]
    return (level_bits.astype(np.int64) * weights).sum(axis=-2)


def map_symbols(level_bits, constellation: Constellation) -> np.ndarray:
    """Map ``m`` equal-length level codewords (rows, level 1 first) to points."""
    bits = np.asarray(level_bits)
    if bits.ndim == 1 and constellation.m == 1:
        bits = bits[None, :]
    if bits.ndim != 2 or bits.shape[0] != constellation.m:
        raise ValueError(f"expected {constellation.m} level codewords of equal length")
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ValueError("level bits must be 0/1")
    return constellation.points[_label_index(bits)]


def awgn(symbols, sigma: float, rng_seed=None) -> np.ndarray:
    """Add white Gaussian noise.  ``rng_seed`` may also be a ``Generator``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(symbols, dtype=np.float64)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return x + sigma * rng.standard_normal(x.shape)


def demap_level(y, level: int, prior_bits, constellation: Constellation, sigma: float, received=None) -> np.ndarray:
    """Exact LLRs ``log p(b_j=0|y, b_<j) / p(b_j=1|y, b_<j)`` of level ``j``.

    ``prior_bits`` has shape ``(..., j-1, n)``: decided bits of the lower
    levels, optionally for a batch of hypotheses.  Positions where
    ``received`` is False get LLR 0.  Output shape is ``prior_bits.shape[:-2] + (n,)``.
    """
    m = constellation.m
    if not 1 <= level <= m:
        raise ValueError(f"level must lie in 1..{m}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    yv = np.asarray(y, dtype=np.float64)
    if yv.ndim != 1:
        raise ValueError("y must be one-dimensional")
    j = level - 1
    if prior_bits is None:
        if j:
            raise ValueError(f"level {level} needs decided bits of {j} lower levels")
        prior = np.zeros((0, yv.size), dtype=np.uint8)
    else:
        prior = np.asarray(prior_bits)
    if prior.ndim < 2 or prior.shape[-2] != j or prior.shape[-1] != yv.size:
        raise ValueError(f"level {level} needs decided bits of shape (..., {j}, {yv.size}), got {prior.shape}")

    # indices sharing the low bits r: r + 2^j * (b_j + 2 h)
    metric = -((yv[:, None] - constellation.points[None, :]) ** 2) / (2.0 * sigma * sigma)
    step = 1 << j
    per_prefix = np.empty((step, yv.size))
    for r in range(step):
        idx = np.arange(r, constellation.size, step)
        bit = (idx >> j) & 1
        per_prefix[r] = logsumexp(metric[:, idx[bit == 0]], axis=1) - logsumexp(metric[:, idx[bit == 1]], axis=1)
    r = _label_index(prior) if j else np.zeros(prior.shape[:-2] + (yv.size,), dtype=np.int64)
    llr = np.take_along_axis(
        np.broadcast_to(per_prefix, r.shape[:-1] + per_prefix.shape), r[..., None, :], axis=-2
    )[..., 0, :]
    if received is not None:
        llr = np.where(np.asarray(received, dtype=bool), llr, 0.0)
    return np.ascontiguousarray(llr)


def _check_levels(spec: FrozenSpec, constellation: Constellation) -> None:
    if spec.levels != constellation.m:
        raise ValueError(f"spec has {spec.levels} levels but the constellation carries {constellation.m} bits")


def mlpc_encode(message, spec: FrozenSpec, constellation: Constellation, n_symbols: int | None = None) -> np.ndarray:
    """Encode all levels and map the last ``n_symbols`` positions to points."""
    _check_levels(spec, constellation)
    u = assemble_u(message, spec)
    c = polar_transform(u.reshape(spec.levels, spec.N))
    n = spec.N - spec.punct_count if n_symbols is None else int(n_symbols)
    return map_symbols(c[:, spec.N - n :], constellation)


def mlpc_decode(
    y,
    spec: FrozenSpec,
    constellation: Constellation,
    sigma: float,
    list_size: int = 32,
    crc: CrcSpec | None = None,
    received=None,
) -> DecodeResult:
    """Multistage list decoding; every path demaps with its own lower-level decisions.

    ``y`` holds the channel outputs of the last ``len(y)`` mother positions
    (or all ``N`` positions together with a ``received`` mask).
    """
    _check_levels(spec, constellation)
    yv = np.asarray(y, dtype=np.float64)
    N = spec.N
    if yv.ndim != 1 or yv.size > N:
        raise ValueError(f"expected at most {N} channel outputs")
    mask = np.zeros(N, dtype=bool)
    if received is None:
        mask[N - yv.size :] = True
    else:
        if yv.size != N:
            raise ValueError("a received mask needs all N channel outputs")
        mask[:] = np.asarray(received, dtype=bool)
    full = np.zeros(N)
    full[N - yv.size :] = yv

    def level_llrs(j: int, c_lower: np.ndarray) -> np.ndarray:
        if j == 0:
            return demap_level(full, 1, None, constellation, sigma, mask)[None, :]
        return demap_level(full, j + 1, c_lower, constellation, sigma, mask)

    return list_decode_levels(level_llrs, spec, list_size=list_size, crc=crc)
