"""Min-sum SC and CRC-aided SCL decoding of punctured polar codes.

LLRs follow ``log p(0)/p(1)``; punctured code bits carry LLR 0.  Path metrics
add ``|llr|`` whenever a decision disagrees with the sign of its LLR.

Whenever at least half of a mother code is punctured the first half of ``u``
is frozen to zero and contributes nothing to the second half, so decoding
runs on the shortest mother code that still covers the transmitted bits.  The
decisions are bit-identical to decoding the full length (``reduce=False``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import _kernels
from .crc import CrcSpec, crc_check_batch
from .polar import CodeSpec, FrozenSpec, mother_length, polar_transform

__all__ = [
    "DecodeResult",
    "sc_decode",
    "scl_decode",
    "decode_punctured",
    "list_decode_levels",
    "LLR_CLIP",
]

LLR_CLIP = _kernels.LLR_CLIP


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of one decoding attempt.

    ``info_bits`` follows the order of ``spec.info_set``.  Without a CRC,
    ``crc_ok`` is always True (nothing can flag a failure).
    """

    u_hat: np.ndarray
    info_bits: np.ndarray
    crc_ok: bool
    path_metric: float
    list_rank: int = 0


@dataclass(frozen=True)
class _Layout:
    """0-based decoder tables for every level, possibly on a shortened mother code."""

    N: int  # decoded length per level
    shift: int  # number of leading positions dropped per level
    kinds: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]
    sources: tuple[np.ndarray, ...]
    info: np.ndarray  # reduced 0-based info positions, message order


@lru_cache(maxsize=256)
def _layout(spec: FrozenSpec, reduce: bool) -> _Layout:
    N = spec.N
    Nr = mother_length(N - spec.punct_count) if reduce else N
    shift = N - Nr
    kind, value, source = spec.position_kinds()

    def remap(g):
        return (g // N) * Nr + (g % N) - shift

    kinds, values, sources = [], [], []
    for j in range(spec.levels):
        sl = slice(j * N + shift, (j + 1) * N)
        kinds.append(np.ascontiguousarray(kind[sl]))
        values.append(np.ascontiguousarray(value[sl]))
        src = source[sl].copy()
        has = src >= 0
        src[has] = remap(src[has])
        sources.append(src)
    info = remap(np.asarray(spec.info_set, dtype=np.int64) - 1)
    return _Layout(Nr, shift, tuple(kinds), tuple(values), tuple(sources), info)


def _expand(u_red: np.ndarray, spec: FrozenSpec, lay: _Layout) -> np.ndarray:
    out = np.zeros(u_red.shape[:-1] + (spec.total_length,), dtype=np.uint8)
    for j in range(spec.levels):
        out[..., j * spec.N + lay.shift : (j + 1) * spec.N] = u_red[..., j * lay.N : (j + 1) * lay.N]
    return out


def _check_llr(llr, spec: FrozenSpec) -> np.ndarray:
    arr = np.asarray(llr, dtype=np.float64)
    if arr.ndim != 1 or arr.size != spec.N:
        raise ValueError(f"expected {spec.N} LLRs, got shape {arr.shape}")
    if spec.levels != 1:
        raise ValueError("binary decoders need a single-level spec")
    if not np.all(np.isfinite(arr)):
        raise ValueError("LLRs must be finite")
    return arr


def sc_decode(llr, spec: FrozenSpec, reduce: bool = True) -> DecodeResult:
    """Min-sum successive cancellation decoding."""
    arr = _check_llr(llr, spec)
    lay = _layout(spec, reduce)
    u = np.zeros(lay.N, dtype=np.uint8)
    metric = _kernels.sc_kernel(
        np.ascontiguousarray(arr[lay.shift :]), lay.kinds[0], lay.values[0], lay.sources[0], u, 0
    )
    return DecodeResult(
        u_hat=_expand(u, spec, lay),
        info_bits=u[lay.info].copy(),
        crc_ok=True,
        path_metric=float(metric),
    )


def _select(u_list: np.ndarray, metrics: np.ndarray, spec: FrozenSpec, lay: _Layout, crc: CrcSpec | None) -> DecodeResult:
    info = u_list[:, lay.info]
    rank = 0
    ok = True
    if crc is not None:
        passing = np.flatnonzero(crc_check_batch(info, crc))
        if passing.size:
            rank = int(passing[0])
        else:
            ok = False
    return DecodeResult(
        u_hat=_expand(u_list[rank], spec, lay),
        info_bits=info[rank].copy(),
        crc_ok=ok,
        path_metric=float(metrics[rank]),
        list_rank=rank,
    )


def scl_decode(
    llr,
    spec: FrozenSpec,
    list_size: int = 32,
    crc: CrcSpec | None = None,
    reduce: bool = True,
) -> DecodeResult:
    """Min-sum SCL decoding, optionally picking the best CRC-valid path."""
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    arr = _check_llr(llr, spec)
    lay = _layout(spec, reduce)
    u0 = np.zeros((1, lay.N), dtype=np.uint8)
    u_list, metrics = _kernels.scl_kernel(
        np.ascontiguousarray(arr[None, lay.shift :]),
        u0,
        np.zeros(1),
        lay.kinds[0],
        lay.values[0],
        lay.sources[0],
        int(list_size),
        0,
    )
    return _select(u_list, metrics, spec, lay, crc)


def decode_punctured(
    llr_segment,
    spec: FrozenSpec,
    code: CodeSpec,
    list_size: int = 32,
    crc: CrcSpec | None = None,
) -> DecodeResult:
    """Decode the ``n`` received LLRs of an ``(n, k, N)`` QUP code."""
    seg = np.asarray(llr_segment, dtype=np.float64)
    if seg.ndim != 1 or seg.size != code.n:
        raise ValueError(f"expected {code.n} LLRs, got shape {seg.shape}")
    if spec.N != code.N:
        raise ValueError(f"spec mother length {spec.N} != code mother length {code.N}")
    llr = np.zeros(code.N)
    llr[code.N - code.n :] = seg
    return scl_decode(llr, spec, list_size=list_size, crc=crc)


def list_decode_levels(
    level_llrs: Callable[[int, np.ndarray], np.ndarray],
    spec: FrozenSpec,
    list_size: int = 32,
    crc: CrcSpec | None = None,
    reduce: bool = True,
) -> DecodeResult:
    """SCL over a multilevel code, levels decoded in order with one shared list.

    ``level_llrs(j, c_lower)`` returns the channel LLRs of level ``j`` (0-based)
    for every surviving path, given ``c_lower`` of shape ``(paths, j, N)``: the
    re-encoded codewords of the lower levels of each path, full mother length.
    """
    if list_size < 1:
        raise ValueError("list size must be >= 1")
    lay = _layout(spec, reduce)
    Nr = lay.N
    N = spec.N
    u_list = np.zeros((1, spec.levels * Nr), dtype=np.uint8)
    metrics = np.zeros(1)
    for j in range(spec.levels):
        if j:
            u_red = u_list[:, : j * Nr].reshape(-1, j, Nr)
            c_red = polar_transform(u_red)
            c_lower = np.zeros((u_list.shape[0], j, N), dtype=np.uint8)
            c_lower[..., lay.shift :] = c_red
        else:
            c_lower = np.zeros((1, 0, N), dtype=np.uint8)
        llr = np.asarray(level_llrs(j, c_lower), dtype=np.float64)
        if llr.shape != (u_list.shape[0], N):
            raise ValueError(f"level {j + 1} LLRs have shape {llr.shape}, expected {(u_list.shape[0], N)}")
        u_list, metrics = _kernels.scl_kernel(
            np.ascontiguousarray(llr[:, lay.shift :]),
            u_list,
            metrics,
            lay.kinds[j],
            lay.values[j],
            lay.sources[j],
            int(list_size),
            j * Nr,
        )
    return _select(u_list, metrics, spec, lay, crc)
