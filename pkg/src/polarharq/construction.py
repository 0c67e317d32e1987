"""Gaussian-approximation construction of (punctured) polar codes.

Reliabilities are tracked as mutual informations through the butterfly of the
natural-order transform.  ``J`` maps the standard deviation of a consistent
Gaussian LLR (mean ``s**2 / 2``, variance ``s**2``) to the mutual information
it carries; the closed-form fits below are the two-piece approximations of
Brannstrom, Rasmussen and Grant.

Multilevel construction (MI-DGA) first computes the per-level mutual
informations ``I(B_j; Y | B_1..B_{j-1})`` of set-partitioned ``2^m``-ASK and
then runs the same GA on every level.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erfc, logsumexp

from .polar import FrozenSpec, is_power_of_two, mother_length

__all__ = [
    "ReliabilityProfile",
    "LevelMis",
    "j_function",
    "j_inverse",
    "q_function",
    "ga_basic_transform",
    "build_reliability",
    "qup_initial_mis",
    "estimate_fer_sc",
    "select_info_set",
    "biawgn_mi",
    "mi_dga_levels",
    "symbol_mi",
    "snr_db_to_sigma",
    "sigma_to_snr_db",
    "design_mis",
    "design_qup_code",
    "profile_to_json",
]

# Two-piece fits of J and J^-1.
_J_SPLIT = 1.6363
_A1, _B1, _C1 = -0.0421061, 0.209252, -0.00640081
_A2, _B2, _C2, _D2 = 0.00181491, -0.142675, -0.0822054, 0.0549608
_J_SAT = 10.0

# Below this std the cubic turns negative near zero; J is quadratic there
# anyway, so use c*s^2 matched to the fit at the joint.
_J_SMALL = 0.1
_J_SMALL_MI = ((_A1 * _J_SMALL + _B1) * _J_SMALL + _C1) * _J_SMALL

# The upper piece starts ~6e-4 below the end of the lower one; it is held at
# that value until it catches up so J stays non-decreasing.
_J_SPLIT_MI = ((_A1 * _J_SPLIT + _B1) * _J_SPLIT + _C1) * _J_SPLIT
_LOG_C_SPLIT = float(np.log1p(-_J_SPLIT_MI))
# Past _J_SAT, log(1 - J) continues along its tangent instead of J snapping
# to 1, so the minus transform of two weak channels never yields exactly 0.
_E_SAT = ((_A2 * _J_SAT + _B2) * _J_SAT + _C2) * _J_SAT + _D2
_E_SAT_SLOPE = (3 * _A2 * _J_SAT + 2 * _B2) * _J_SAT + _C2

_JI_SPLIT = 0.3646
_AI1, _BI1, _CI1 = 1.09542, 0.214217, 2.33727
_AI2, _BI2, _CI2 = 0.706692, 0.386013, -1.75017


def _fit_low(s):
    out = ((_A1 * s + _B1) * s + _C1) * s
    tiny = s < _J_SMALL
    out[tiny] = _J_SMALL_MI * (s[tiny] / _J_SMALL) ** 2
    return out


def _log_jc_high(s):
    """``log(1 - J(s))`` above the split, before the clamp."""
    inner = np.minimum(s, _J_SAT)
    e = ((_A2 * inner + _B2) * inner + _C2) * inner + _D2
    return np.where(s > _J_SAT, _E_SAT + _E_SAT_SLOPE * (s - _J_SAT), e)


def _log_jc_high_prime(s):
    return np.where(s > _J_SAT, _E_SAT_SLOPE, (3 * _A2 * s + 2 * _B2) * s + _C2)


def _check_sigma(sigma) -> np.ndarray:
    s = np.asarray(sigma, dtype=np.float64)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("J is defined for non-negative arguments")
    return s


def _j_pair(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(J(s), 1 - J(s))``, each computed without cancellation."""
    low = s <= _J_SPLIT
    j = np.empty_like(s)
    jc = np.empty_like(s)
    j[low] = _fit_low(s[low])
    jc[low] = 1.0 - j[low]
    with np.errstate(invalid="ignore"):
        e = np.minimum(_log_jc_high(s[~low]), _LOG_C_SPLIT)
    jc[~low] = np.exp(e)
    j[~low] = -np.expm1(e)
    return j, jc


def j_function(sigma):
    """Mutual information of a consistent Gaussian LLR with std ``sigma``."""
    j, _ = _j_pair(_check_sigma(sigma))
    return j if j.ndim else float(j)


def _j_complement(sigma) -> np.ndarray:
    return _j_pair(_check_sigma(sigma))[1]


def _inverse(x: np.ndarray, c: np.ndarray, steps: int = 8) -> np.ndarray:
    """Solve ``J(s) = x`` given both ``x`` and ``c = 1 - x`` (whichever is exact).

    The closed-form inverse fits only start the iteration; Newton then makes
    ``J(J^-1(x)) == x`` to rounding, in ``log(1 - J)`` on the upper piece so
    that MIs within 1e-300 of one stay resolvable.
    """
    out = np.empty_like(x)
    low = x <= _J_SPLIT_MI
    xl = x[low]
    t = _AI1 * xl * xl + _BI1 * xl + _CI1 * np.sqrt(xl)
    t = np.clip(t, _J_SMALL, _J_SPLIT)
    for _ in range(steps):
        d = (3 * _A1 * t + 2 * _B1) * t + _C1
        t = np.clip(t - (((_A1 * t + _B1) * t + _C1) * t - xl) / d, _J_SMALL, _J_SPLIT)
    tiny = xl <= _J_SMALL_MI
    t[tiny] = _J_SMALL * np.sqrt(xl[tiny] / _J_SMALL_MI)
    out[low] = t

    ch = c[~low]
    with np.errstate(divide="ignore"):
        log_c = np.log(ch)
        t = -_AI2 * np.log(_BI2 * ch) - _CI2 * (1.0 - ch)
    beyond = log_c <= _E_SAT
    t[beyond] = _J_SAT + (log_c[beyond] - _E_SAT) / _E_SAT_SLOPE
    inner = ~beyond
    ti = np.clip(t[inner], _J_SPLIT, _J_SAT)
    target = log_c[inner]
    for _ in range(steps):
        ti = np.clip(ti - (_log_jc_high(ti) - target) / _log_jc_high_prime(ti), _J_SPLIT, _J_SAT)
    t[inner] = ti
    out[~low] = t
    return out


def j_inverse(mi):
    """Inverse of :func:`j_function`; ``j_inverse(1) = inf``."""
    x = np.asarray(mi, dtype=np.float64)
    if np.any(x < 0) or np.any(x > 1) or np.any(np.isnan(x)):
        raise ValueError("mutual information must lie in [0, 1]")
    out = _inverse(np.atleast_1d(x), np.atleast_1d(1.0 - x)).reshape(x.shape)
    return out if out.ndim else float(out)


def _j_inverse_complement(c: np.ndarray) -> np.ndarray:
    """``J^-1(1 - c)``, accurate for tiny ``c``."""
    c = np.asarray(c, dtype=np.float64)
    return _inverse(np.atleast_1d(1.0 - c), np.atleast_1d(c)).reshape(c.shape)


def q_function(x):
    """Gaussian tail probability ``P(Z > x)``."""
    return 0.5 * erfc(np.asarray(x, dtype=np.float64) / np.sqrt(2.0))


def _minus(i1: np.ndarray, i2: np.ndarray) -> np.ndarray:
    # 1 - I^- = J(hypot(J^-1(1 - i1), J^-1(1 - i2))), kept in complements
    s = np.hypot(_j_inverse_complement(i1), _j_inverse_complement(i2))
    return np.clip(_j_complement(s), 0.0, 1.0)


def _plus(i1: np.ndarray, i2: np.ndarray) -> np.ndarray:
    return np.clip(j_function(np.hypot(j_inverse(i1), j_inverse(i2))), 0.0, 1.0)


def ga_basic_transform(i1, i2):
    """MI pair ``(I^-, I^+)`` of the 2x2 kernel fed by channels ``i1``, ``i2``."""
    a = np.asarray(i1, dtype=np.float64)
    b = np.asarray(i2, dtype=np.float64)
    lo, hi = _minus(a, b) + 0.0, _plus(a, b) + 0.0
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


@dataclass(frozen=True)
class ReliabilityProfile:
    """Per-position MI and SC error probability (0-based arrays of length N)."""

    mi: np.ndarray
    pe: np.ndarray

    @property
    def N(self) -> int:
        return int(self.mi.size)


def _polarize(mi: np.ndarray) -> np.ndarray:
    x = np.array(mi, dtype=np.float64)
    N = x.size
    half = N // 2
    while half >= 1:
        v = x.reshape(N // (2 * half), 2, half)
        a = v[:, 0, :].copy()
        b = v[:, 1, :].copy()
        v[:, 0, :] = _minus(a, b)
        v[:, 1, :] = _plus(a, b)
        half //= 2
    return x


def pe_from_mi(mi) -> np.ndarray:
    return q_function(0.5 * j_inverse(mi))


def build_reliability(initial_mis) -> ReliabilityProfile:
    """Run GA through all ``log2 N`` stages starting from per-codebit MIs."""
    init = np.asarray(initial_mis, dtype=np.float64)
    if init.ndim != 1 or not is_power_of_two(init.size):
        raise ValueError("initial MI vector length must be a power of two")
    mi = _polarize(init)
    return ReliabilityProfile(mi=mi, pe=pe_from_mi(mi))


def qup_initial_mis(n: int, N: int, channel_mi: float) -> np.ndarray:
    """Zeros on the ``N - n`` punctured leading code bits, ``channel_mi`` after."""
    if not 0 <= n <= N:
        raise ValueError(f"need 0 <= n <= N, got n={n}, N={N}")
    if not 0.0 <= channel_mi <= 1.0:
        raise ValueError("channel MI must lie in [0, 1]")
    out = np.zeros(N)
    out[N - n :] = channel_mi
    return out


def estimate_fer_sc(profile: ReliabilityProfile, info_set: Iterable[int]) -> float:
    """Union-free SC estimate ``1 - prod(1 - pe_i)`` over 1-based ``info_set``."""
    idx = np.asarray(list(info_set), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    pe = profile.pe[idx - 1]
    return float(-np.expm1(np.sum(np.log1p(-np.minimum(pe, 1.0 - 1e-300)))))


def select_info_set(pe, k: int, allowed: Iterable[int], blocked: Iterable[int] = ()) -> tuple[int, ...]:
    """The ``k`` allowed 1-based indices with smallest ``pe``, ascending.

    Positions in ``blocked`` get ``pe = 1`` and are never chosen.  Ties go to
    the larger index.
    """
    pe = np.asarray(pe, dtype=np.float64)
    blocked = set(int(b) for b in blocked)
    cand = np.array(sorted(int(a) for a in allowed if int(a) not in blocked), dtype=np.int64)
    if cand.size < k:
        raise ValueError(f"only {cand.size} candidate positions for k={k}")
    if k == 0:
        return ()
    order = np.lexsort((-cand, pe[cand - 1]))
    return tuple(sorted(int(i) for i in cand[order[:k]]))


# -- channel mutual informations -------------------------------------------------

_GH_NODES = 200


@lru_cache(maxsize=None)
def _hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = np.polynomial.hermite.hermgauss(n)
    return np.sqrt(2.0) * t, w / np.sqrt(np.pi)


def _ask_points(m: int) -> np.ndarray:
    return 2.0 * np.arange(1 << m) - ((1 << m) - 1)


def _expected_log2_ratio(points_num: np.ndarray, points_all: np.ndarray, sigma: float, nodes: int) -> float:
    """``E[log2(sum_all w / sum_num w)]`` for x uniform on ``points_num``."""
    z, w = _hermite(nodes)
    y = points_num[:, None] + sigma * z[None, :]
    e_all = -((y[:, :, None] - points_all[None, None, :]) ** 2) / (2 * sigma * sigma)
    e_num = -((y[:, :, None] - points_num[None, None, :]) ** 2) / (2 * sigma * sigma)
    val = (logsumexp(e_all, axis=2) - logsumexp(e_num, axis=2)) / np.log(2.0)
    return float(np.mean(val @ w))


def biawgn_mi(sigma: float, nodes: int = _GH_NODES) -> float:
    """MI of BPSK (+-1) over AWGN with noise std ``sigma`` (bits)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return 1.0 - _expected_log2_ratio(np.array([1.0]), np.array([1.0, -1.0]), sigma, nodes)


@dataclass(frozen=True)
class LevelMis:
    """Per-level MIs ``I(B_j; Y | B_1..B_{j-1})`` for ``j = 1..m``."""

    values: tuple[float, ...]

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def total(self) -> float:
        return float(sum(self.values))

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, j):
        return self.values[j]


def symbol_mi(m: int, sigma: float, nodes: int = _GH_NODES) -> float:
    """``I(X;Y)`` for uniform unnormalized ``2^m``-ASK."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pts = _ask_points(m)
    total = 0.0
    for x in pts:
        total += _expected_log2_ratio(np.array([x]), pts, sigma, nodes)
    return m - total / pts.size


def _level_mi_quadrature(m: int, sigma: float, nodes: int) -> list[float]:
    pts = _ask_points(m)
    idx = np.arange(1 << m)
    out = []
    for j in range(m):
        acc = 0.0
        for prefix in range(1 << j):
            subset = idx[(idx & ((1 << j) - 1)) == prefix]
            for b in (0, 1):
                num = subset[((subset >> j) & 1) == b]
                acc += _expected_log2_ratio(pts[num], pts[subset], sigma, nodes) * num.size
        out.append(1.0 - acc / (1 << m))
    return out


def _level_mi_monte_carlo(m: int, sigma: float, samples: int, seed: int) -> list[float]:
    rng = np.random.default_rng(seed)
    pts = _ask_points(m)
    M = 1 << m
    labels = rng.integers(0, M, size=samples)
    y = pts[labels] + sigma * rng.standard_normal(samples)
    metric = -((y[:, None] - pts[None, :]) ** 2) / (2 * sigma * sigma)
    idx = np.arange(M)
    out = []
    for j in range(m):
        low = (1 << j) - 1
        same_prefix = (idx[None, :] & low) == (labels[:, None] & low)
        same_bit = same_prefix & (((idx[None, :] >> j) & 1) == ((labels[:, None] >> j) & 1))
        den = logsumexp(np.where(same_prefix, metric, -np.inf), axis=1)
        num = logsumexp(np.where(same_bit, metric, -np.inf), axis=1)
        out.append(1.0 - float(np.mean(den - num)) / np.log(2.0))
    return out


def mi_dga_levels(m: int, noise_sigma: float, nodes: int = _GH_NODES, mc_samples: int = 1_000_000, seed: int = 0) -> LevelMis:
    """Conditional per-level MIs of set-partitioned ``2^m``-ASK.

    Level 1 is the least significant label bit (the weakest level).  Uses
    Gauss-Hermite quadrature for ``m <= 4`` and seeded Monte Carlo above.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not noise_sigma > 0:
        raise ValueError("noise sigma must be positive")
    if m <= 4:
        vals = _level_mi_quadrature(m, float(noise_sigma), nodes)
    else:
        vals = _level_mi_monte_carlo(m, float(noise_sigma), mc_samples, seed)
    return LevelMis(tuple(float(np.clip(v, 0.0, 1.0)) for v in vals))


def snr_db_to_sigma(snr_db: float, m: int = 1) -> float:
    """Noise std for SNR ``E[X^2]/sigma^2`` (dB) on unnormalized ``2^m``-ASK."""
    es = ((1 << (2 * m)) - 1) / 3.0
    return float(np.sqrt(es / 10.0 ** (snr_db / 10.0)))


def sigma_to_snr_db(sigma: float, m: int = 1) -> float:
    es = ((1 << (2 * m)) - 1) / 3.0
    return float(10.0 * np.log10(es / sigma**2))


def design_mis(snr_db: float, m: int = 1) -> LevelMis:
    """Channel MI per level at a design SNR (``m = 1`` gives the biAWGN MI)."""
    return mi_dga_levels(m, snr_db_to_sigma(snr_db, m))


def design_qup_code(
    n: int,
    k: int,
    channel_mi: float | Sequence[float],
    N: int | None = None,
) -> tuple[FrozenSpec, ReliabilityProfile]:
    """Directly designed ``(n, k, N)`` QUP polar code.

    ``channel_mi`` is a scalar for binary codes or one MI per level for a
    multilevel code, in which case ``n`` counts symbols per level.
    """
    if N is None:
        N = mother_length(n)
    mis = np.atleast_1d(np.asarray(channel_mi, dtype=np.float64))
    levels = mis.size
    if not 0 < k <= levels * n:
        raise ValueError(f"k={k} must lie in 1..{levels * n}")
    if not 0 < n <= N:
        raise ValueError(f"need 0 < n <= N, got n={n}, N={N}")
    prof = multilevel_profile(n, N, mis)
    p = N - n
    allowed = [j * N + i for j in range(levels) for i in range(p + 1, N + 1)]
    info = select_info_set(prof.pe, k, allowed)
    frozen = sorted(set(allowed) - set(info))
    spec = FrozenSpec(N=N, info_set=info, static_frozen=tuple(frozen), punct_count=p, levels=levels)
    return spec, prof


def multilevel_profile(n: int, N: int, level_mis: Sequence[float]) -> ReliabilityProfile:
    """GA on every level with QUP initialization, concatenated level-major."""
    profs = [build_reliability(qup_initial_mis(n, N, float(mi))) for mi in level_mis]
    return ReliabilityProfile(
        mi=np.concatenate([p.mi for p in profs]),
        pe=np.concatenate([p.pe for p in profs]),
    )


def profile_to_json(
    spec: FrozenSpec,
    profile: ReliabilityProfile,
    n: int,
    design_mi: float | Sequence[float],
) -> str:
    doc = {
        "n": int(n),
        "k": spec.k,
        "N": spec.N,
        "levels": spec.levels,
        "design_mi": np.atleast_1d(design_mi).astype(float).tolist()
        if spec.levels > 1
        else float(np.asarray(design_mi).reshape(-1)[0]),
        "info_set": list(spec.info_set),
        "static_frozen": list(spec.static_frozen),
        "dynamic_constraints": [list(c) for c in spec.dynamic_constraints],
        "mi": profile.mi.tolist(),
        "pe": profile.pe.tolist(),
    }
    return json.dumps(doc)
