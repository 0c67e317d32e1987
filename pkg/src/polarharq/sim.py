"""Monte Carlo FER campaigns for single codes and IR-HARQ chains.

Frames are simulated in fixed-size batches.  Batch ``b`` of SNR point ``i``
draws its randomness from ``SeedSequence(seed, spawn_key=(i, b))`` and the
stop rule is evaluated on batches in index order, so the counts do not depend
on how many worker processes ran the batches.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .construction import estimate_fer_sc, multilevel_profile, snr_db_to_sigma
from .crc import CRC16, _linear_map
from .decoder import scl_decode
from .harq import HarqPlan, build_plan
from .modem import Constellation, map_symbols, mlpc_decode
from .polar import polar_transform

__all__ = [
    "SimConfig",
    "SimResult",
    "StageRecord",
    "ConfigError",
    "CampaignAborted",
    "run_fer",
    "run_construct",
    "CSV_HEADER",
]

CSV_HEADER = ("stage", "snr_db", "frames", "errors", "fer", "seconds")
CRC_BITS = 16


class ConfigError(ValueError):
    pass


class CampaignAborted(RuntimeError):
    """A batch failed; ``partial`` holds every SNR point finished before it."""

    def __init__(self, message: str, partial: "SimResult"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SimConfig:
    """One campaign.

    ``k`` counts message bits; with ``crc`` on the codes carry ``k + 16``.
    ``n_list`` lengths are in bits (``n_t / modulation`` symbols each).
    ``design_points`` hold one SNR in dB or ``{"mi": x}`` per transmission.
    ``stages`` restricts which HARQ stages are decoded and reported
    (default: all).  With ``timing`` off the ``seconds`` column is written
    as 0 so that repeated runs give byte-identical CSV files.
    """

    mode: str = "fer"
    k: int = 128
    n_list: tuple[int, ...] = (250,)
    design_points: tuple[Any, ...] = (3.0,)
    modulation: int = 1
    list_size: int = 32
    crc: bool = True
    snr_start: float = 2.0
    snr_stop: float = 2.0
    snr_step: float = 0.25
    min_frames: int = 0
    min_errors: int = 100
    max_frames: int = 1_000_000
    batch_size: int = 200
    seed: int = 0
    workers: int = 1
    stages: tuple[int, ...] | None = None
    timing: bool = True

    def __post_init__(self):
        if self.mode not in ("construct", "fer", "harq"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        if len(self.design_points) != len(self.n_list):
            raise ConfigError("need one design point per transmission")
        if self.snr_step <= 0:
            raise ConfigError("snr_step must be positive")
        if self.snr_stop < self.snr_start:
            raise ConfigError("snr_stop must not be below snr_start")
        if self.min_errors < 1:
            raise ConfigError("min_errors must be >= 1")
        if self.max_frames < 1 or self.batch_size < 1 or self.workers < 1:
            raise ConfigError("max_frames, batch_size and workers must be positive")
        if self.list_size < 1:
            raise ConfigError("list_size must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be positive")
        if self.stages is not None:
            t_max = self.t_max
            if not self.stages or any(not 1 <= s <= t_max for s in self.stages):
                raise ConfigError(f"stages must lie in 1..{t_max}")

    @property
    def code_k(self) -> int:
        return self.k + (CRC_BITS if self.crc else 0)

    @property
    def t_max(self) -> int:
        return 1 if self.mode == "fer" else len(self.n_list)

    @property
    def report_stages(self) -> tuple[int, ...]:
        if self.stages is None:
            return tuple(range(1, self.t_max + 1))
        return tuple(sorted(set(self.stages)))

    def snr_points(self) -> list[float]:
        count = int(np.floor((self.snr_stop - self.snr_start) / self.snr_step + 1e-9)) + 1
        return [round(self.snr_start + i * self.snr_step, 10) for i in range(count)]

    def plan(self) -> HarqPlan:
        return _plan(self.code_k, self.n_list[: self.t_max], _freeze(self.design_points[: self.t_max]), self.modulation)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        kw = dict(d)
        try:
            for key in ("n_list", "design_points"):
                if key in kw:
                    kw[key] = tuple(kw[key])
            if kw.get("stages") is not None:
                kw["stages"] = tuple(int(s) for s in kw["stages"])
            for key in ("k", "modulation", "list_size", "min_frames", "min_errors", "max_frames", "batch_size", "seed", "workers"):
                if key in kw:
                    kw[key] = int(kw[key])
            if "n_list" in kw:
                kw["n_list"] = tuple(int(v) for v in kw["n_list"])
            for key in ("snr_start", "snr_stop", "snr_step"):
                if key in kw:
                    kw[key] = float(kw[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc
        return cls(**kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["n_list"] = list(self.n_list)
        d["design_points"] = list(self.design_points)
        if self.stages is not None:
            d["stages"] = list(self.stages)
        return d


def _freeze(points) -> tuple:
    # dict design points are not hashable; json text is
    return tuple(json.dumps(p, sort_keys=True) for p in points)


@lru_cache(maxsize=16)
def _plan(k: int, n_list: tuple[int, ...], points: tuple[str, ...], m: int) -> HarqPlan:
    return build_plan(k, n_list, [json.loads(p) for p in points], m)


@dataclass
class StageRecord:
    stage: int
    snr_db: float
    frames: int
    errors: int
    seconds: float
    undetected: int = 0

    @property
    def fer(self) -> float:
        return self.errors / self.frames if self.frames else float("nan")


@dataclass
class SimResult:
    records: list[StageRecord] = field(default_factory=list)
    plan: HarqPlan | None = None

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.records:
            secs = f"{r.seconds:.3f}" if timing else "0"
            w.writerow([r.stage, f"{r.snr_db:g}", r.frames, r.errors, f"{r.fer:.6e}", secs])
        return buf.getvalue()


def _crc_rows(messages: np.ndarray) -> np.ndarray:
    # the check bits are an affine map of the message bits
    T, offset = _linear_map(messages.shape[1], CRC16)
    rem = (messages.astype(np.int64) @ T.astype(np.int64) + offset) & 1
    return np.concatenate([messages, rem.astype(np.uint8)], axis=1)


def _encode_batch(words: np.ndarray, plan: HarqPlan) -> np.ndarray:
    """Final-stage codewords, shape ``(B, m, N)``.

    Earlier transmissions are prefixes of the final codeword, so one encoding
    per frame serves every stage.
    """
    spec = plan.stages[-1]
    B = words.shape[0]
    u = np.zeros((B, spec.total_length), dtype=np.uint8)
    u[:, np.asarray(spec.info_set) - 1] = words
    if spec.dynamic_constraints:
        cons = np.asarray(spec.dynamic_constraints) - 1
        u[:, cons[:, 0]] = u[:, cons[:, 1]]
    return polar_transform(u.reshape(B, plan.modulation, plan.N))


def _run_batch(cfg: SimConfig, snr_index: int, batch: int, size: int) -> np.ndarray:
    """Errors and undetected errors per reported stage: shape ``(stages, 2)``."""
    plan = cfg.plan()
    snr = cfg.snr_points()[snr_index]
    m = plan.modulation
    const = Constellation(m)
    sigma = snr_db_to_sigma(snr, m)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(snr_index, batch)))
    msgs = rng.integers(0, 2, size=(size, cfg.k), dtype=np.uint8)
    words = _crc_rows(msgs) if cfg.crc else msgs
    c = _encode_batch(words, plan)
    lo = plan.N - plan.received_length(plan.t_max)
    x = np.asarray(map_symbols(c.transpose(1, 0, 2).reshape(m, -1), const)).reshape(size, plan.N)
    y = x + sigma * rng.standard_normal(x.shape)
    y[:, :lo] = 0.0
    crc = CRC16 if cfg.crc else None
    stages = cfg.report_stages
    out = np.zeros((len(stages), 2), dtype=np.int64)
    if m == 1:
        llr = 2.0 * y / (sigma * sigma)
    for si, t in enumerate(stages):
        spec = plan.stages[t - 1]
        start = plan.N - plan.received_length(t)
        mask = np.zeros(plan.N, dtype=bool)
        mask[start:] = True
        for f in range(size):
            if m == 1:
                frame = np.where(mask, llr[f], 0.0)
                res = scl_decode(frame, spec, list_size=cfg.list_size, crc=crc)
            else:
                res = mlpc_decode(y[f], spec, const, sigma, cfg.list_size, crc, received=mask)
            if not np.array_equal(res.info_bits, words[f]):
                out[si, 0] += 1
                if res.crc_ok:
                    out[si, 1] += 1
    return out


def _stop(cfg: SimConfig, frames: int, errors: np.ndarray) -> bool:
    if frames >= cfg.max_frames:
        return True
    return frames >= cfg.min_frames and bool(np.all(errors >= cfg.min_errors))


def run_fer(cfg: SimConfig, progress=None) -> SimResult:
    """Simulate every SNR point until the stop rule fires."""
    if cfg.mode not in ("fer", "harq"):
        raise ConfigError("run_fer needs mode 'fer' or 'harq'")
    result = SimResult(plan=cfg.plan())
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        _sweep(cfg, pool, result, progress)
    except (KeyboardInterrupt, ConfigError):
        raise
    except Exception as exc:
        raise CampaignAborted(f"campaign aborted: {exc!r}", result) from exc
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return result


def _sweep(cfg: SimConfig, pool, result: SimResult, progress) -> None:
    stages = cfg.report_stages
    for i, snr in enumerate(cfg.snr_points()):
        t0 = time.perf_counter()
        frames, counts = _simulate_point(cfg, pool, i)
        secs = time.perf_counter() - t0
        for si, t in enumerate(stages):
            rec = StageRecord(t, snr, frames, int(counts[si, 0]), secs, int(counts[si, 1]))
            result.records.append(rec)
            if progress is not None:
                progress(rec)


def _simulate_point(cfg: SimConfig, pool, snr_index: int) -> tuple[int, np.ndarray]:
    frames = 0
    counts = np.zeros((len(cfg.report_stages), 2), dtype=np.int64)
    batch = 0
    while True:
        # one round hands every worker a batch; results are consumed in batch order
        sizes = []
        for _ in range(cfg.workers):
            left = cfg.max_frames - frames - sum(sizes)
            if left <= 0:
                break
            sizes.append(min(cfg.batch_size, left))
        if not sizes:
            return frames, counts
        ids = range(batch, batch + len(sizes))
        if pool is None:
            outs = (_run_batch(cfg, snr_index, b, n) for b, n in zip(ids, sizes))
        else:
            outs = pool.map(_run_batch, [cfg] * len(sizes), [snr_index] * len(sizes), ids, sizes)
        for n, o in zip(sizes, outs):
            frames += n
            counts += o
            batch += 1
            if _stop(cfg, frames, counts[:, 0]):
                return frames, counts


def run_construct(cfg: SimConfig) -> tuple[HarqPlan, list[float]]:
    """Plan for ``cfg`` and the SC FER estimate of every stage at its design point."""
    plan = _plan(cfg.code_k, cfg.n_list, _freeze(cfg.design_points), cfg.modulation)
    estimates = []
    for t, spec in enumerate(plan.stages, start=1):
        profile = multilevel_profile(plan.received_length(t), plan.N, plan.design_mi[t - 1])
        estimates.append(estimate_fer_sc(profile, spec.info_set))
    return plan, estimates
