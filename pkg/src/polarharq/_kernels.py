"""Compiled min-sum SC / SCL kernels for natural-order polar codes.

Position kinds: 0 information, 1 frozen with a known value, 2 copy of an
earlier decided bit (dynamic freezing).  Sources index the caller's decision
row, which may be longer than one code when several levels share a list.

The list decoder follows the lazy-copy layout of Tal and Vardy: every layer
keeps a pool of ``L`` arrays and paths only point at them, cloning an array
when they are about to write into one that is shared.
"""

import numpy as np
from numba import njit

# LLR magnitudes are clipped here so path metrics stay finite.
LLR_CLIP = 64.0


@njit(cache=True, inline="always")
def _f(a, b):
    s = 1.0
    if a < 0.0:
        s = -s
        a = -a
    if b < 0.0:
        s = -s
        b = -b
    if a == 0.0 or b == 0.0:
        return 0.0
    return s * (a if a < b else b)


@njit(cache=True, inline="always")
def _g(a, b, u):
    if u:
        return b - a
    return b + a


@njit(cache=True)
def _log2(n):
    m = 0
    while (1 << m) < n:
        m += 1
    return m


@njit(cache=True)
def _trailing_zeros(x, m):
    if x == 0:
        return m
    t = 0
    while (x & 1) == 0:
        x >>= 1
        t += 1
    return t


@njit(cache=True)
def sc_kernel(llr, kind, value, source, u, offset):
    """Single-path SC; writes decisions into ``u[offset:offset+N]``."""
    N = llr.size
    m = _log2(N)
    off = np.zeros(m + 1, dtype=np.int64)
    for lam in range(1, m + 1):
        off[lam] = off[lam - 1] + (N >> (lam - 1))
    total = off[m] + 1
    P = np.empty(total)
    C = np.zeros((total, 2), dtype=np.uint8)
    for i in range(N):
        v = llr[i]
        if v > LLR_CLIP:
            v = LLR_CLIP
        elif v < -LLR_CLIP:
            v = -LLR_CLIP
        P[i] = v
    metric = 0.0
    for phi in range(N):
        start = m - _trailing_zeros(phi, m)
        if start < 1:
            start = 1
        for lam in range(start, m + 1):
            size = N >> lam
            po = off[lam]
            pp = off[lam - 1]
            if ((phi >> (m - lam)) & 1) == 0:
                for b in range(size):
                    P[po + b] = _f(P[pp + b], P[pp + b + size])
            else:
                for b in range(size):
                    P[po + b] = _g(P[pp + b], P[pp + b + size], C[po + b, 0])
        ell = P[off[m]]
        k = kind[phi]
        if k == 0:
            d = 1 if ell < 0.0 else 0
        elif k == 1:
            d = value[phi]
        else:
            d = u[source[phi]]
        if d == 0 and ell < 0.0:
            metric -= ell
        elif d == 1 and ell > 0.0:
            metric += ell
        u[offset + phi] = d
        if m == 0:
            continue
        C[off[m], phi & 1] = d
        lam = m
        ph = phi
        while (ph & 1) == 1 and lam >= 2:
            size = N >> lam
            col = (ph >> 1) & 1
            po = off[lam]
            pd = off[lam - 1]
            for b in range(size):
                C[pd + b, col] = C[po + b, 0] ^ C[po + b, 1]
                C[pd + b + size, col] = C[po + b, 1]
            lam -= 1
            ph >>= 1
    return metric


@njit(cache=True)
def _clone(lam, l, ptr, refc, free_arr, free_top, P, C, offL, N):
    # callers check the refcount first; a call per array access is too slow
    s = ptr[lam, l]
    free_top[lam] -= 1
    s2 = free_arr[lam, free_top[lam]]
    size = N >> lam
    a = offL[lam] + s * size
    b = offL[lam] + s2 * size
    for i in range(size):
        P[b + i] = P[a + i]
        C[b + i, 0] = C[a + i, 0]
        C[b + i, 1] = C[a + i, 1]
    refc[lam, s] -= 1
    refc[lam, s2] = 1
    ptr[lam, l] = s2
    return s2


@njit(cache=True)
def scl_kernel(llr0, u_in, metric_in, kind, value, source, L, offset):
    """List decoding of one length-N code for a batch of incoming paths.

    ``llr0[i]`` are the channel LLRs seen by incoming path ``i`` and
    ``u_in[i]`` its decision row (positions ``< offset`` already decided).
    Returns ``(u_out, metric_out)`` sorted by metric, ties by slot.
    """
    n_in, N = llr0.shape
    width = u_in.shape[1]
    m = _log2(N)
    offL = np.zeros(m + 2, dtype=np.int64)
    for lam in range(m + 1):
        offL[lam + 1] = offL[lam] + L * (N >> lam)
    P = np.empty(offL[m + 1])
    C = np.zeros((offL[m + 1], 2), dtype=np.uint8)
    ptr = np.zeros((m + 1, L), dtype=np.int64)
    refc = np.zeros((m + 1, L), dtype=np.int64)
    free_arr = np.zeros((m + 1, L), dtype=np.int64)
    free_top = np.zeros(m + 1, dtype=np.int64)
    for lam in range(m + 1):
        for s in range(L):
            free_arr[lam, s] = L - 1 - s
        free_top[lam] = L

    active = np.zeros(L, dtype=np.bool_)
    free_path = np.zeros(L, dtype=np.int64)
    for s in range(L):
        free_path[s] = L - 1 - s
    free_path_top = L
    u = np.zeros((L, width), dtype=np.uint8)
    metric = np.zeros(L)

    n_start = n_in if n_in < L else L
    for i in range(n_start):
        free_path_top -= 1
        l = free_path[free_path_top]
        active[l] = True
        for lam in range(m + 1):
            free_top[lam] -= 1
            s = free_arr[lam, free_top[lam]]
            ptr[lam, l] = s
            refc[lam, s] = 1
        base = offL[0] + ptr[0, l] * N
        for b in range(N):
            v = llr0[i, b]
            if v > LLR_CLIP:
                v = LLR_CLIP
            elif v < -LLR_CLIP:
                v = -LLR_CLIP
            P[base + b] = v
        for b in range(width):
            u[l, b] = u_in[i, b]
        metric[l] = metric_in[i]

    cand = np.empty(2 * L)
    keep0 = np.zeros(L, dtype=np.bool_)
    keep1 = np.zeros(L, dtype=np.bool_)
    pm0 = np.zeros(L)
    pm1 = np.zeros(L)
    slots = np.zeros(L, dtype=np.int64)

    for phi in range(N):
        pos = offset + phi
        start = m - _trailing_zeros(phi, m)
        if start < 1:
            start = 1
        for l in range(L):
            if not active[l]:
                continue
            for lam in range(start, m + 1):
                size = N >> lam
                s = ptr[lam, l]
                if refc[lam, s] != 1:
                    s = _clone(lam, l, ptr, refc, free_arr, free_top, P, C, offL, N)
                po = offL[lam] + s * size
                pp = offL[lam - 1] + ptr[lam - 1, l] * (2 * size)
                if ((phi >> (m - lam)) & 1) == 0:
                    for b in range(size):
                        P[po + b] = _f(P[pp + b], P[pp + b + size])
                else:
                    for b in range(size):
                        P[po + b] = _g(P[pp + b], P[pp + b + size], C[po + b, 0])

        k = kind[phi]
        if k != 0:
            for l in range(L):
                if not active[l]:
                    continue
                ell = P[offL[m] + ptr[m, l]]
                if k == 1:
                    d = value[phi]
                else:
                    d = u[l, source[phi]]
                if d == 0 and ell < 0.0:
                    metric[l] -= ell
                elif d == 1 and ell > 0.0:
                    metric[l] += ell
                u[l, pos] = d
        else:
            nact = 0
            for l in range(L):
                if active[l]:
                    ell = P[offL[m] + ptr[m, l]]
                    pm0[l] = metric[l] - ell if ell < 0.0 else metric[l]
                    pm1[l] = metric[l] + ell if ell > 0.0 else metric[l]
                    slots[nact] = l
                    cand[2 * nact] = pm0[l]
                    cand[2 * nact + 1] = pm1[l]
                    nact += 1
            for i in range(nact):
                keep0[slots[i]] = False
                keep1[slots[i]] = False
            if 2 * nact <= L:
                for i in range(nact):
                    keep0[slots[i]] = True
                    keep1[slots[i]] = True
            else:
                order = np.argsort(cand[: 2 * nact], kind="mergesort")
                for r in range(L):
                    c = order[r]
                    if c & 1:
                        keep1[slots[c >> 1]] = True
                    else:
                        keep0[slots[c >> 1]] = True
            # kill before cloning so the pools never overflow
            for i in range(nact):
                l = slots[i]
                if not keep0[l] and not keep1[l]:
                    active[l] = False
                    for lam in range(m + 1):
                        s = ptr[lam, l]
                        refc[lam, s] -= 1
                        if refc[lam, s] == 0:
                            free_arr[lam, free_top[lam]] = s
                            free_top[lam] += 1
                    free_path[free_path_top] = l
                    free_path_top += 1
            for i in range(nact):
                l = slots[i]
                if keep0[l] and keep1[l]:
                    free_path_top -= 1
                    l2 = free_path[free_path_top]
                    active[l2] = True
                    for lam in range(m + 1):
                        s = ptr[lam, l]
                        ptr[lam, l2] = s
                        refc[lam, s] += 1
                    for b in range(pos):
                        u[l2, b] = u[l, b]
                    u[l, pos] = 0
                    metric[l] = pm0[l]
                    u[l2, pos] = 1
                    metric[l2] = pm1[l]
                elif keep0[l]:
                    u[l, pos] = 0
                    metric[l] = pm0[l]
                elif keep1[l]:
                    u[l, pos] = 1
                    metric[l] = pm1[l]

        if m == 0:
            continue
        for l in range(L):
            if not active[l]:
                continue
            s = ptr[m, l]
            if refc[m, s] != 1:
                s = _clone(m, l, ptr, refc, free_arr, free_top, P, C, offL, N)
            C[offL[m] + s, phi & 1] = u[l, pos]
            lam = m
            ph = phi
            while (ph & 1) == 1 and lam >= 2:
                size = N >> lam
                col = (ph >> 1) & 1
                src = offL[lam] + ptr[lam, l] * size
                sd = ptr[lam - 1, l]
                if refc[lam - 1, sd] != 1:
                    sd = _clone(lam - 1, l, ptr, refc, free_arr, free_top, P, C, offL, N)
                dst = offL[lam - 1] + sd * (2 * size)
                for b in range(size):
                    C[dst + b, col] = C[src + b, 0] ^ C[src + b, 1]
                    C[dst + b + size, col] = C[src + b, 1]
                lam -= 1
                ph >>= 1

    n_out = 0
    for l in range(L):
        if active[l]:
            slots[n_out] = l
            n_out += 1
    ms = np.empty(n_out)
    for i in range(n_out):
        ms[i] = metric[slots[i]]
    order = np.argsort(ms, kind="mergesort")
    u_out = np.empty((n_out, width), dtype=np.uint8)
    m_out = np.empty(n_out)
    for i in range(n_out):
        l = slots[order[i]]
        m_out[i] = metric[l]
        for b in range(width):
            u_out[i, b] = u[l, b]
    return u_out, m_out
