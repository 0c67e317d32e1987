"""Incremental-redundancy HARQ with punctured polar codes.

Every transmission extends one mother code of length ``N``.  Transmission
``t`` sends the block of positions just in front of everything sent so far,
so after ``t`` transmissions the receiver holds a QUP-punctured code of
length ``n_1 + .. + n_t``.  Each stage is redesigned for its own operating
point; information positions that lose their place are kept as copies of
the new positions that replace them (dynamic freezing), so bits that were
already transmitted never change.

For multilevel codes (``modulation > 1``) all lengths count bits; a stage of
``n_t`` bits carries ``n_t / m`` symbols and every level code is extended
over the same symbol positions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .construction import design_mis, multilevel_profile, select_info_set
from .crc import CrcSpec
from .decoder import DecodeResult, list_decode_levels, scl_decode
from .modem import Constellation, demap_level, map_symbols
from .polar import FrozenSpec, assemble_u, mother_length, polar_transform

__all__ = [
    "HarqPlan",
    "PlanError",
    "SessionError",
    "HeavyPuncturingWarning",
    "build_plan",
    "HarqTx",
    "HarqRx",
]


class PlanError(ValueError):
    """The requested chain of codes cannot be built."""


class SessionError(RuntimeError):
    """A HARQ session was driven past its last stage or fed bad input."""


class HeavyPuncturingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class HarqPlan:
    """Designed chain of codes.

    ``n`` and ``k`` count bits.  ``N`` is the mother length per level (symbol
    positions when ``modulation > 1``).  ``segments[t]`` is the 1-based
    inclusive range of mother positions sent in transmission ``t + 1``.
    ``design_mi[t]`` holds one MI per level.
    """

    k: int
    n: tuple[int, ...]
    N: int
    modulation: int
    design_snr_db: tuple[float | None, ...]
    design_mi: tuple[tuple[float, ...], ...]
    segments: tuple[tuple[int, int], ...]
    stages: tuple[FrozenSpec, ...]

    @property
    def t_max(self) -> int:
        return len(self.n)

    def symbols(self, t: int) -> int:
        """Symbols (mother positions per level) sent in stage ``t`` (1-based)."""
        return self.n[t - 1] // self.modulation

    def received_length(self, t: int) -> int:
        """Mother positions per level received after ``t`` transmissions."""
        return sum(self.n[:t]) // self.modulation

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n": list(self.n),
            "N": self.N,
            "modulation": self.modulation,
            "design_snr_db": list(self.design_snr_db),
            "design_mi": [list(v) for v in self.design_mi],
            "segments": [list(s) for s in self.segments],
            "stages": [s.to_dict() for s in self.stages],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "HarqPlan":
        return cls(
            k=int(d["k"]),
            n=tuple(int(v) for v in d["n"]),
            N=int(d["N"]),
            modulation=int(d.get("modulation", 1)),
            design_snr_db=tuple(None if v is None else float(v) for v in d["design_snr_db"]),
            design_mi=tuple(tuple(float(x) for x in v) for v in d["design_mi"]),
            segments=tuple((int(a), int(b)) for a, b in d["segments"]),
            stages=tuple(FrozenSpec.from_dict(s) for s in d["stages"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "HarqPlan":
        return cls.from_dict(json.loads(text))


def _design_point(point, m: int) -> tuple[float | None, tuple[float, ...]]:
    """``{"snr_db": x}`` / ``{"mi": x}`` / bare number (SNR in dB)."""
    if isinstance(point, dict):
        if "mi" in point:
            mi = np.atleast_1d(np.asarray(point["mi"], dtype=np.float64))
            if mi.size == 1:
                mi = np.repeat(mi, m)
            if mi.size != m or np.any((mi < 0) | (mi > 1)):
                raise PlanError(f"design MI must be {m} values in [0, 1]")
            return None, tuple(float(v) for v in mi)
        point = point["snr_db"]
    snr = float(point)
    return snr, tuple(design_mis(snr, m).values)


def _decoder_view(classes: list[list[int]]) -> tuple[tuple[int, ...], dict[int, int]]:
    """Info positions and copy constraints from the positions tied to each message bit.

    All positions of one class carry the same bit.  The one decoded first
    holds it and the rest copy it; within one binary code that is always
    the newest position, across levels it need not be.
    """
    info = []
    copies = {}
    for members in classes:
        head = min(members)
        info.append(head)
        for x in members:
            if x != head:
                copies[x] = head
    return tuple(info), copies


def build_plan(
    k: int,
    n_list: Sequence[int],
    design_points: Sequence,
    modulation: int = 1,
    N: int | None = None,
) -> HarqPlan:
    """Design every stage of an IR-HARQ chain.

    ``design_points`` gives one operating point per transmission, either an
    SNR in dB or ``{"mi": value}``.  For ``modulation = m > 1`` every ``n_t``
    must be a multiple of ``m``.
    """
    m = int(modulation)
    if m < 1:
        raise PlanError("modulation order must be >= 1")
    ns = tuple(int(v) for v in n_list)
    if not ns:
        raise PlanError("need at least one transmission")
    if any(v <= 0 for v in ns):
        raise PlanError("transmission lengths must be positive")
    if any(v % m for v in ns):
        raise PlanError(f"transmission lengths must be multiples of {m} bits")
    if len(design_points) != len(ns):
        raise PlanError(f"{len(ns)} transmissions but {len(design_points)} design points")
    if not 0 < k <= ns[0]:
        raise PlanError(f"need 0 < k <= n_1, got k={k}, n_1={ns[0]}")

    sym = [v // m for v in ns]
    total = sum(sym)
    if N is None:
        N = mother_length(total)
    elif N < mother_length(total) or N & (N - 1):
        raise PlanError(f"N={N} must be a power of two >= {mother_length(total)}")

    snrs, mis, segments, stages = [], [], [], []
    # classes[q]: positions tied to message bit q, most recent choice last
    classes: list[list[int]] = []
    blocked: set[int] = set()
    sent = 0
    for t, (n_sym, point) in enumerate(zip(sym, design_points), start=1):
        snr, level_mi = _design_point(point, m)
        snrs.append(snr)
        mis.append(level_mi)
        start = N - sent - n_sym + 1
        segments.append((start, N - sent))
        sent += n_sym
        punct = N - sent
        if t < len(sym) and 0 < punct < N // 8:
            warnings.warn(
                f"after transmission {t} only {punct} of {N} positions remain punctured; "
                "later extensions have little room",
                HeavyPuncturingWarning,
                stacklevel=2,
            )
        profile = multilevel_profile(sent, N, level_mi)
        region = [j * N + i for j in range(m) for i in range(punct + 1, N + 1)]
        chosen = select_info_set(profile.pe, k, region, blocked)

        if t == 1:
            classes = [[i] for i in chosen]
        else:
            current = {c[-1]: q for q, c in enumerate(classes)}
            keep = set(chosen)
            demoted = sorted(i for i in current if i not in keep)
            promoted = sorted(i for i in chosen if i not in current)
            for old, new in zip(demoted, promoted):
                classes[current[old]].append(new)
        info, copies = _decoder_view(classes)
        tied = {x for c in classes for x in c}
        frozen = tuple(sorted(set(region) - tied))
        try:
            spec = FrozenSpec(
                N=N,
                info_set=info,
                static_frozen=frozen,
                dynamic_constraints=tuple(sorted(copies.items())),
                punct_count=punct,
                levels=m,
            )
        except ValueError as exc:
            raise PlanError(f"stage {t}: {exc}") from exc
        stages.append(spec)
        blocked = set(region) - set(chosen)

    return HarqPlan(
        k=int(k),
        n=ns,
        N=int(N),
        modulation=m,
        design_snr_db=tuple(snrs),
        design_mi=tuple(mis),
        segments=tuple(segments),
        stages=tuple(stages),
    )


def _level_view(x: np.ndarray, plan: HarqPlan) -> np.ndarray:
    return x.reshape(plan.modulation, plan.N)


class HarqTx:
    """Transmitter side of one HARQ session."""

    def __init__(self, plan: HarqPlan, message):
        self.plan = plan
        self.message = np.asarray(message, dtype=np.uint8)
        if self.message.size != plan.k:
            raise SessionError(f"message has {self.message.size} bits, plan expects {plan.k}")
        self.stage = 0
        self.u: np.ndarray | None = None
        self.codeword: np.ndarray | None = None

    def next(self) -> np.ndarray:
        """Bits of the next transmission, shape ``(m, symbols)`` or ``(n,)`` for ``m = 1``."""
        plan = self.plan
        if self.stage >= plan.t_max:
            raise SessionError(f"all {plan.t_max} transmissions already sent")
        t = self.stage + 1
        spec = plan.stages[t - 1]
        if t == 1:
            u = assemble_u(self.message, spec)
        else:
            u = assemble_u(
                np.zeros(0, dtype=np.uint8), spec, prior_u=self.u, prior_info=plan.stages[t - 2].info_set
            )
        c = _level_view(polar_transform(_level_view(u, plan)), plan)
        if self.codeword is not None:
            lo = plan.N - plan.received_length(t - 1)
            if not np.array_equal(c[:, lo:], self.codeword[:, lo:]):
                raise AssertionError(f"stage {t} changed already transmitted bits")
        self.u, self.codeword = u, c
        self.stage = t
        start, end = plan.segments[t - 1]
        seg = c[:, start - 1 : end]
        return seg[0].copy() if plan.modulation == 1 else seg.copy()

    def next_symbols(self, constellation: Constellation | None = None) -> np.ndarray:
        """Modulated next transmission."""
        bits = self.next()
        const = constellation or Constellation(self.plan.modulation)
        return map_symbols(bits if bits.ndim == 2 else bits[None, :], const)


@dataclass
class StageTrace:
    stage: int
    segment: tuple[int, int]
    crc_ok: bool
    path_metric: float
    list_rank: int

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "segment": list(self.segment),
            "crc_ok": self.crc_ok,
            "path_metric": self.path_metric,
            "list_rank": self.list_rank,
        }


class HarqRx:
    """Receiver side of one HARQ session.

    Binary sessions accumulate LLRs; multilevel sessions keep the raw channel
    outputs and demap them again for every decoding attempt.
    """

    def __init__(self, plan: HarqPlan, list_size: int = 32, crc: CrcSpec | None = None, sigma: float | None = None):
        self.plan = plan
        self.list_size = list_size
        self.crc = crc
        self.sigma = sigma
        self.stage = 0
        self.llr = np.zeros(plan.N)
        self.y = np.zeros(plan.N)
        self.received = np.zeros(plan.N, dtype=bool)
        self.results: list[DecodeResult] = []
        self.trace: list[StageTrace] = []

    def _take_segment(self, values) -> tuple[int, int, np.ndarray]:
        plan = self.plan
        if self.stage >= plan.t_max:
            raise SessionError(f"all {plan.t_max} transmissions already received")
        t = self.stage + 1
        start, end = plan.segments[t - 1]
        seg = np.asarray(values, dtype=np.float64)
        if seg.shape != (end - start + 1,):
            raise SessionError(f"stage {t} expects {end - start + 1} values, got shape {seg.shape}")
        if not np.all(np.isfinite(seg)):
            raise SessionError("received values must be finite")
        return start, end, seg

    def next(self, llr_segment) -> DecodeResult:
        """Binary stage: add the segment LLRs and decode the extended code."""
        if self.plan.modulation != 1:
            raise SessionError("multilevel sessions take channel outputs via next_symbols")
        start, end, seg = self._take_segment(llr_segment)
        self.llr[start - 1 : end] = seg
        self.received[start - 1 : end] = True
        self.stage += 1
        res = scl_decode(self.llr, self.plan.stages[self.stage - 1], list_size=self.list_size, crc=self.crc)
        return self._record(res, (start, end))

    def next_symbols(self, y_segment, constellation: Constellation | None = None) -> DecodeResult:
        """Stage from raw channel outputs (any modulation)."""
        if self.sigma is None:
            raise SessionError("noise sigma is needed to demap channel outputs")
        const = constellation or Constellation(self.plan.modulation)
        if self.plan.modulation == 1:
            return self.next(demap_level(np.asarray(y_segment, dtype=np.float64), 1, None, const, self.sigma))
        start, end, seg = self._take_segment(y_segment)
        self.y[start - 1 : end] = seg
        self.received[start - 1 : end] = True
        self.stage += 1
        spec = self.plan.stages[self.stage - 1]
        y, mask, sigma = self.y, self.received, self.sigma

        def level_llrs(j: int, c_lower: np.ndarray) -> np.ndarray:
            if j == 0:
                return demap_level(y, 1, None, const, sigma, mask)[None, :]
            return demap_level(y, j + 1, c_lower, const, sigma, mask)

        res = list_decode_levels(level_llrs, spec, list_size=self.list_size, crc=self.crc)
        return self._record(res, (start, end))

    def _record(self, res: DecodeResult, segment: tuple[int, int]) -> DecodeResult:
        self.results.append(res)
        self.trace.append(StageTrace(self.stage, segment, res.crc_ok, res.path_metric, res.list_rank))
        return res

    def trace_json(self) -> str:
        return json.dumps([s.to_dict() for s in self.trace])
