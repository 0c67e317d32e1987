"""Binary polar transform and mother-codeword assembly.

Indices in :class:`FrozenSpec` are 1-based, matching the usual ``u_1 .. u_N``
notation; arrays handed to numpy are 0-based internally.

The transform is the natural-order Kronecker power ``c = u F^{(x)m}`` with
``F = [[1, 0], [1, 1]]`` (no bit-reversal permutation).  Because the matrix is
lower triangular, changing ``u_i`` only affects ``c_j`` for ``j <= i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "CodeSpec",
    "FrozenSpec",
    "polar_transform",
    "assemble_u",
    "extract_segment",
    "is_power_of_two",
    "mother_length",
]


def is_power_of_two(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def mother_length(n: int) -> int:
    """Smallest power of two ``>= n``."""
    if n < 1:
        raise ValueError(f"length must be positive, got {n}")
    return 1 << (int(n) - 1).bit_length()


@dataclass(frozen=True)
class CodeSpec:
    """An ``(n, k, N)`` QUP-punctured polar code."""

    n: int
    k: int
    N: int

    def __post_init__(self):
        if not is_power_of_two(self.N):
            raise ValueError(f"mother length N={self.N} is not a power of two")
        if self.N < mother_length(self.n):
            raise ValueError(f"N={self.N} is shorter than 2^ceil(log2 n) for n={self.n}")
        if not 0 < self.k <= self.n <= self.N:
            raise ValueError(f"need 0 < k <= n <= N, got k={self.k}, n={self.n}, N={self.N}")

    @property
    def punct_count(self) -> int:
        return self.N - self.n


@dataclass(frozen=True)
class FrozenSpec:
    """Information set, frozen set and dynamic-freezing constraints of one code.

    ``info_set`` is ordered: message bit ``q`` lives at ``info_set[q]``.  For a
    freshly designed code the order is ascending; after HARQ extensions a bit
    that moved keeps its message slot.

    ``dynamic_constraints`` holds ``(target, source)`` pairs meaning
    ``u[target] = u[source]`` with ``source < target``.

    ``levels > 1`` describes a multilevel code: ``levels`` polar codes of length
    ``N`` stacked level-major, so level ``j`` (1-based) owns global indices
    ``(j-1)*N + 1 .. j*N``.  The first ``punct_count`` positions of every level
    are punctured and implicitly zero.
    """

    N: int
    info_set: tuple[int, ...]
    static_frozen: tuple[int, ...] = ()
    dynamic_constraints: tuple[tuple[int, int], ...] = ()
    punct_count: int = 0
    levels: int = 1

    def __post_init__(self):
        object.__setattr__(self, "info_set", tuple(int(i) for i in self.info_set))
        object.__setattr__(self, "static_frozen", tuple(sorted(int(i) for i in self.static_frozen)))
        object.__setattr__(
            self,
            "dynamic_constraints",
            tuple((int(t), int(s)) for t, s in self.dynamic_constraints),
        )
        self.validate()

    @property
    def total_length(self) -> int:
        return self.N * self.levels

    @property
    def k(self) -> int:
        return len(self.info_set)

    @property
    def targets(self) -> tuple[int, ...]:
        return tuple(t for t, _ in self.dynamic_constraints)

    def level_of(self, index: int) -> int:
        """1-based level of a 1-based global index."""
        return (index - 1) // self.N + 1

    def local_index(self, index: int) -> int:
        """1-based position of a global index inside its level."""
        return (index - 1) % self.N + 1

    def is_punctured(self, index: int) -> bool:
        return self.local_index(index) <= self.punct_count

    def validate(self) -> None:
        if not is_power_of_two(self.N):
            raise ValueError(f"N={self.N} is not a power of two")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not 0 <= self.punct_count < self.N:
            raise ValueError(f"punct_count={self.punct_count} out of range for N={self.N}")
        info = set(self.info_set)
        if len(info) != len(self.info_set):
            raise ValueError("info_set has duplicate indices")
        frozen = set(self.static_frozen)
        targets = [t for t, _ in self.dynamic_constraints]
        tset = set(targets)
        if len(tset) != len(targets):
            raise ValueError("a position is the target of more than one constraint")
        if info & frozen or info & tset or frozen & tset:
            raise ValueError("info_set, static_frozen and dynamic targets must be disjoint")
        total = self.total_length
        for i in info | frozen | tset:
            if not 1 <= i <= total:
                raise ValueError(f"index {i} outside 1..{total}")
            if self.is_punctured(i):
                raise ValueError(f"index {i} lies in the punctured prefix (punct_count={self.punct_count})")
        for t, s in self.dynamic_constraints:
            if s not in info:
                raise ValueError(f"constraint source {s} is not an information position")
            if not s < t:
                raise ValueError(f"constraint source {s} does not precede target {t}")

    def position_kinds(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """0-based per-position arrays ``(kind, value, source)`` for the decoder.

        ``kind`` is 0 for information, 1 for a frozen bit with known ``value``,
        2 for a copy of the 0-based position ``source``.
        """
        total = self.total_length
        kind = np.ones(total, dtype=np.int8)
        value = np.zeros(total, dtype=np.uint8)
        source = np.full(total, -1, dtype=np.int64)
        if self.info_set:
            kind[np.asarray(self.info_set) - 1] = 0
        for t, s in self.dynamic_constraints:
            kind[t - 1] = 2
            source[t - 1] = s - 1
        return kind, value, source

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "levels": self.levels,
            "punct_count": self.punct_count,
            "info_set": list(self.info_set),
            "static_frozen": list(self.static_frozen),
            "dynamic_constraints": [list(c) for c in self.dynamic_constraints],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrozenSpec":
        return cls(
            N=int(d["N"]),
            info_set=tuple(d["info_set"]),
            static_frozen=tuple(d.get("static_frozen", ())),
            dynamic_constraints=tuple(tuple(c) for c in d.get("dynamic_constraints", ())),
            punct_count=int(d.get("punct_count", 0)),
            levels=int(d.get("levels", 1)),
        )


def _as_bits(bits, name: str = "bits") -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0/1")
    return arr.astype(np.uint8, copy=False)


def polar_transform(u) -> np.ndarray:
    """Return ``u F^{(x) log2 N}`` over GF(2).

    Works on the last axis, so a 2-D array encodes a batch of rows.
    """
    x = np.array(u, dtype=np.uint8, copy=True)
    N = x.shape[-1]
    if not is_power_of_two(N):
        raise ValueError(f"length {N} is not a power of two")
    lead = x.shape[:-1]
    half = N // 2
    while half >= 1:
        v = x.reshape(*lead, N // (2 * half), 2, half)
        v[..., 0, :] ^= v[..., 1, :]
        half //= 2
    return x


def assemble_u(
    message,
    spec: FrozenSpec,
    N: int | None = None,
    prior_u=None,
    prior_info: Iterable[int] | None = None,
) -> np.ndarray:
    """Build the length-``N`` input vector ``u`` for ``spec``.

    Fresh code: ``message`` fills ``spec.info_set`` in order, everything else is
    zero and every dynamic target copies its source.

    Extension of an earlier code: pass the earlier ``prior_u`` and the 1-based
    positions that already carried data (``prior_info``, the earlier info set).
    A new information position that is the source of a constraint takes over
    the bit of the position it displaced; ``message`` then fills whatever info
    positions remain unoccupied (normally none).
    """
    total = spec.total_length
    if N is not None and N * spec.levels != total:
        raise ValueError(f"N={N} does not match spec (N={spec.N}, levels={spec.levels})")
    msg = _as_bits(message, "message")
    if prior_u is None:
        u = np.zeros(total, dtype=np.uint8)
        occupied: set[int] = set()
    else:
        u = _as_bits(prior_u, "prior_u").copy()
        if u.size != total:
            raise ValueError(f"prior_u has length {u.size}, expected {total}")
        occupied = set(int(i) for i in (prior_info if prior_info is not None else ()))

    for t, s in spec.dynamic_constraints:
        if s not in occupied and t in occupied:
            u[s - 1] = u[t - 1]
            occupied.add(s)

    free = [i for i in spec.info_set if i not in occupied]
    if msg.size != len(free):
        raise ValueError(f"message has {msg.size} bits but {len(free)} information positions are free")
    if free:
        u[np.asarray(free) - 1] = msg

    info = set(spec.info_set)
    keep = np.zeros(total, dtype=bool)
    keep[np.asarray(spec.info_set, dtype=np.int64) - 1] = True
    for t, s in spec.dynamic_constraints:
        if s not in info:
            raise RuntimeError(f"constraint source {s} carries no bit")
        u[t - 1] = u[s - 1]
        keep[t - 1] = True
    u[~keep] = 0
    return u


def extract_segment(c, plan_offsets: Sequence[int]) -> np.ndarray:
    """Return ``c_start .. c_end`` (1-based, inclusive)."""
    arr = np.asarray(c)
    start, end = (int(v) for v in plan_offsets)
    if not 1 <= start <= end <= arr.shape[-1]:
        raise ValueError(f"segment ({start}, {end}) outside 1..{arr.shape[-1]}")
    return arr[..., start - 1 : end].copy()
