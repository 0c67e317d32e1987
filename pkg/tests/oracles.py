"""Slow, independent reference implementations used only by the tests."""

import itertools

import numpy as np
from scipy import integrate


def kron_generator(N):
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    while G.shape[0] < N:
        G = np.kron(G, F)
    return G


def encode_by_matrix(u):
    u = np.asarray(u, dtype=np.int64)
    return (u @ kron_generator(u.size)) % 2


def _f(a, b):
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def bit_llr(i, llr, u_prev):
    """Min-sum LLR of ``u_i`` given ``u_0..u_{i-1}`` by plain tree recursion (0-based)."""
    N = len(llr)
    if N == 1:
        return float(llr[0])
    h = N // 2
    a, b = np.asarray(llr[:h], dtype=float), np.asarray(llr[h:], dtype=float)
    if i < h:
        return bit_llr(i, _f(a, b), u_prev)
    v = encode_by_matrix(np.asarray(u_prev[:h], dtype=np.int64)) if h > 1 else np.asarray(u_prev[:1])
    return bit_llr(i - h, b + (1 - 2.0 * v) * a, u_prev[h:])


def reference_sc(llr, kind, value, source):
    """SC decisions from the recursive LLRs; ``kind`` etc. as in ``position_kinds``."""
    u = []
    for i in range(len(llr)):
        ell = bit_llr(i, llr, u)
        if kind[i] == 0:
            d = 1 if ell < 0 else 0
        elif kind[i] == 1:
            d = int(value[i])
        else:
            d = u[source[i]]
        u.append(d)
    return np.array(u, dtype=np.uint8)


def path_metric(u, llr):
    m = 0.0
    for i in range(len(u)):
        ell = bit_llr(i, llr, list(u[:i]))
        if (u[i] == 0 and ell < 0) or (u[i] == 1 and ell > 0):
            m += abs(ell)
    return m


def exhaustive_best(llr, spec, assemble):
    """Lowest-metric valid ``u`` over all messages (first one wins ties)."""
    best = None
    for msg in itertools.product((0, 1), repeat=spec.k):
        u = assemble(np.array(msg, dtype=np.uint8), spec)
        m = path_metric(u, llr)
        if best is None or m < best[0] - 1e-12:
            best = (m, u)
    return best


def crc_long_division(message, poly=0x11021, width=16):
    """Remainder of ``message * x^width`` modulo ``poly`` by schoolbook division."""
    buf = list(int(b) for b in message) + [0] * width
    p = [(poly >> (width - i)) & 1 for i in range(width + 1)]
    for i in range(len(message)):
        if buf[i]:
            for j in range(width + 1):
                buf[i + j] ^= p[j]
    return np.array(buf[-width:], dtype=np.uint8)


def j_exact(s):
    """MI of a consistent Gaussian LLR, by adaptive quadrature."""
    if s <= 0:
        return 0.0
    mean, var = s * s / 2, s * s

    def integrand(x):
        return np.exp(-((x - mean) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var) * np.logaddexp(0, -x) / np.log(2)

    val, _ = integrate.quad(integrand, mean - 12 * s, mean + 12 * s, limit=200)
    return 1.0 - val


def ask_mi_quad(m, sigma):
    """``I(X;Y)`` of uniform ``2^m``-ASK {+-1, +-3, ..} by adaptive quadrature over y."""
    pts = 2.0 * np.arange(1 << m) - ((1 << m) - 1)

    def integrand(y, x):
        p_y_x = np.exp(-((y - x) ** 2) / (2 * sigma**2))
        p_y = np.mean(np.exp(-((y - pts) ** 2) / (2 * sigma**2)))
        return p_y_x / np.sqrt(2 * np.pi * sigma**2) * np.log2(p_y_x / p_y) if p_y_x > 0 else 0.0

    total = 0.0
    for x in pts:
        val, _ = integrate.quad(integrand, x - 12 * sigma, x + 12 * sigma, args=(x,), limit=200)
        total += val
    return total / pts.size


def _penalty(d, ell):
    return abs(ell) if (d == 0 and ell < 0) or (d == 1 and ell > 0) else 0.0


def reference_scl(llr, kind, value, source, L):
    """List decoding by explicit path copies; stable sort keeps lower index on ties."""
    paths = [([], 0.0)]
    for i in range(len(llr)):
        grown = []
        for u, m in paths:
            ell = bit_llr(i, llr, u)
            if kind[i] == 0:
                grown += [(u + [d], m + _penalty(d, ell)) for d in (0, 1)]
            else:
                d = int(value[i]) if kind[i] == 1 else u[source[i]]
                grown.append((u + [d], m + _penalty(d, ell)))
        grown.sort(key=lambda p: p[1])
        paths = grown[:L]
    return [(np.array(u, dtype=np.uint8), m) for u, m in paths]


def lift_spec(spec, cls):
    """The same code on a mother twice as long: everything moves up by ``N``."""
    N = spec.N
    return cls(
        N=2 * N,
        info_set=tuple(i + N for i in spec.info_set),
        static_frozen=tuple(i + N for i in spec.static_frozen),
        dynamic_constraints=tuple((t + N, s + N) for t, s in spec.dynamic_constraints),
        punct_count=spec.punct_count + N,
    )
