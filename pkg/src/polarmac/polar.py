"""Single-user polar coset codes: transform, encoder and SCL decoder.

Frozen rows use the convention of the rest of the package: an int8 row of
length N holding 0 or 1 at frozen positions and ``INFO`` (-1) at
information positions.  Indices refer to the decoding order u_1..u_N.

LLRs are ``log P(bit=0) / P(bit=1)``; bit 0 is sent as ``+sqrt(P)``.
"""

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .group_pmf import TIE_TOL

__all__ = [
    "INFO",
    "LLR_MAX",
    "CandidateList",
    "bit_reversal",
    "polar_transform",
    "encode",
    "info_positions",
    "scl_decode",
]

INFO = -1
LLR_MAX = 40.0


def _log2_exact(n):
    m = int(n).bit_length() - 1
    if n < 1 or (1 << m) != n:
        raise ValueError(f"length must be a power of two, got {n}")
    return m


@lru_cache(maxsize=None)
def bit_reversal(n_log):
    """Bit-reversal permutation of ``range(2**n_log)`` (cached, read-only)."""
    idx = np.arange(1 << n_log)
    rev = np.zeros_like(idx)
    for b in range(n_log):
        rev |= ((idx >> b) & 1) << (n_log - 1 - b)
    rev.flags.writeable = False
    return rev


def _butterfly(w):
    """In-place ``w <- w F^{(x)n}`` along the last axis (XOR on integer entries)."""
    n = w.shape[-1]
    h = 1
    while h < n:
        v = w.reshape(w.shape[:-1] + (-1, 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return w


def polar_transform(u):
    """Return ``u G_N`` with ``G_N = B_N G_2^{(x)n}`` over GF(2).

    Works on the last axis; integer entries other than bits are combined with
    XOR, which is the group law on tuple indices.  The map is an involution.
    """
    u = np.asarray(u)
    n_log = _log2_exact(u.shape[-1])
    w = _butterfly(np.array(u, copy=True))
    return w[..., bit_reversal(n_log)]


def info_positions(frozen_row):
    return np.flatnonzero(np.asarray(frozen_row) == INFO)


def encode(info_bits, frozen_row):
    """Encode ``info_bits`` into the coset code described by ``frozen_row``."""
    frozen_row = np.asarray(frozen_row)
    info_bits = np.asarray(info_bits, dtype=np.int8)
    pos = info_positions(frozen_row)
    if info_bits.shape[-1] != pos.size:
        raise ValueError(
            f"expected {pos.size} information bits, got {info_bits.shape[-1]}"
        )
    u = np.where(frozen_row == INFO, 0, frozen_row).astype(np.int8)
    u = np.broadcast_to(u, info_bits.shape[:-1] + u.shape).copy()
    u[..., pos] = info_bits
    return polar_transform(u)


@dataclass
class CandidateList:
    """Output of :func:`scl_decode`, best candidate first.

    ``metrics`` are path log-likelihoods ``log P(c | llr)`` (non-increasing).
    """

    info_bits: np.ndarray  # (n_cand, k)
    codewords: np.ndarray  # (n_cand, N)
    metrics: np.ndarray  # (n_cand,)

    def __len__(self):
        return self.metrics.size


# --------------------------------------------------------------------------
# numba kernel
#
# Decoding runs on w = u F^{(x)n}; the channel is read through the
# bit-reversal permutation so every recursion split is a contiguous half.
# Level l arrays have 2**l entries and sit at offset 2**l - 1 of a flat
# buffer.  Every write replaces a whole level array, so copy-on-write
# needs no data copy: a shared slot is simply swapped for a fresh one.


@numba.njit(cache=True)
def _softplus(x):
    if x > 0.0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@numba.njit(cache=True)
def _boxplus(a, b):
    x, y = abs(a), abs(b)
    big, small = (x, y) if x > y else (y, x)
    if small < 1.0:
        # cancellation-free near zero: u = e^small - 1, e = e^-big
        u = np.expm1(small)
        e = np.exp(-big)
        mag = np.log1p(u * -np.expm1(-big) / (1.0 + (1.0 + u) * e))
    else:
        mag = small + np.log((1.0 + np.exp(-(big + small))) / (1.0 + np.exp(small - big)))
    return -mag if (a < 0.0) != (b < 0.0) else mag


@numba.njit(cache=True)
def _trailing_zeros(i, n_log):
    if i == 0:
        return n_log
    t = 0
    while (i >> t) & 1 == 0:
        t += 1
    return t


@numba.njit(cache=True)
def _fresh_slot(ptr, refc, free, nfree, path, lev):
    s = ptr[path, lev]
    if refc[lev, s] == 1:
        return s
    refc[lev, s] -= 1
    nfree[lev] -= 1
    s = free[lev, nfree[lev]]
    refc[lev, s] = 1
    ptr[path, lev] = s
    return s


@numba.njit(cache=True)
def _release(ptr, refc, free, nfree, path, n_log):
    for lev in range(n_log):
        s = ptr[path, lev]
        refc[lev, s] -= 1
        if refc[lev, s] == 0:
            free[lev, nfree[lev]] = s
            nfree[lev] += 1


@numba.njit(cache=True)
def _share(ptr, refc, src, dst, n_log):
    for lev in range(n_log):
        ptr[dst, lev] = ptr[src, lev]
        refc[lev, ptr[src, lev]] += 1


@numba.njit(cache=True)
def _rank_paths(metric, n, rank, tmp):
    """Stable merge sort of ``range(n)`` into ``rank`` by descending metric.

    Metrics closer than ``TIE_TOL`` count as equal, so round-off never
    overrides the lexicographic order of the decision histories.
    """
    if n <= 32:
        for c in range(n):
            r = c
            while r > 0 and metric[c] > metric[rank[r - 1]] + TIE_TOL:
                rank[r] = rank[r - 1]
                r -= 1
            rank[r] = c
        return
    for c in range(n):
        rank[c] = c
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if metric[rank[j]] > metric[rank[i]] + TIE_TOL:
                    tmp[k] = rank[j]
                    j += 1
                else:
                    tmp[k] = rank[i]
                    i += 1
                k += 1
            while i < mid:
                tmp[k] = rank[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = rank[j]
                j += 1
                k += 1
        for c in range(n):
            rank[c] = tmp[c]
        width *= 2


@numba.njit(cache=True)
def _select_survivors(metric, nc, limit, keep, rank, tmp):
    """Mark in ``keep[:nc]`` the ``limit`` best candidates (see :func:`_rank_paths`)."""
    for c in range(nc):
        keep[c] = True
    if nc <= limit:
        return
    _rank_paths(metric, nc, rank, tmp)
    for r in range(limit, nc):
        keep[rank[r]] = False


@numba.njit(cache=True)
def _scl_kernel(chan, frozen, list_size):
    """chan: LLRs of w in natural order. frozen: int8 row (INFO = -1)."""
    n = chan.size
    n_log = 0
    while (1 << n_log) < n:
        n_log += 1
    cap = list_size
    nl = max(n_log, 1)
    # LLR and left-codeword buffers, pointer-indexed per level
    pbuf = np.zeros((cap, max(n - 1, 1)))
    cbuf = np.zeros((cap, max(n - 1, 1)), dtype=np.uint8)
    pptr = np.zeros((cap, nl), dtype=np.int64)
    cptr = np.zeros((cap, nl), dtype=np.int64)
    prefc = np.zeros((nl, cap), dtype=np.int64)
    crefc = np.zeros((nl, cap), dtype=np.int64)
    pfree = np.zeros((nl, cap), dtype=np.int64)
    cfree = np.zeros((nl, cap), dtype=np.int64)
    pnfree = np.zeros(nl, dtype=np.int64)
    cnfree = np.zeros(nl, dtype=np.int64)
    for lev in range(nl):
        for s in range(cap):
            pfree[lev, s] = cap - 1 - s
            cfree[lev, s] = cap - 1 - s
        pnfree[lev] = cap - 1
        cnfree[lev] = cap - 1
        prefc[lev, 0] = 1
        crefc[lev, 0] = 1
    # path 0 owns slot 0 on every level
    free_paths = np.zeros(cap, dtype=np.int64)
    for s in range(cap - 1):
        free_paths[s] = cap - 1 - s
    n_free_paths = cap - 1
    order = np.zeros(cap, dtype=np.int64)  # active path ids, lexicographic history
    n_active = 1
    metric = np.zeros(cap)
    final_w = np.zeros((cap, n), dtype=np.uint8)
    scratch = np.zeros(n, dtype=np.uint8)
    scratch2 = np.zeros(n, dtype=np.uint8)
    leaf = np.zeros(cap)

    cand_metric = np.empty(2 * cap)
    cand_parent = np.empty(2 * cap, dtype=np.int64)
    cand_bit = np.empty(2 * cap, dtype=np.uint8)
    keep = np.empty(2 * cap, dtype=np.bool_)
    rank_buf = np.empty(2 * cap, dtype=np.int64)
    tmp_buf = np.empty(2 * cap, dtype=np.int64)
    children = np.zeros((cap, 2), dtype=np.uint8)
    nchild = np.zeros(cap, dtype=np.int64)
    new_order = np.zeros(cap, dtype=np.int64)
    new_bit = np.zeros(cap, dtype=np.uint8)

    for i in range(n):
        # ---- descend: recompute levels tz(i) .. 0 for each active path
        top = _trailing_zeros(i, n_log)
        for a in range(n_active):
            p = order[a]
            for lev in range(top, -1, -1):
                if lev == n_log:
                    continue
                size = 1 << lev
                dst = _fresh_slot(pptr, prefc, pfree, pnfree, p, lev)
                doff = size - 1
                if lev + 1 == n_log:
                    src_row = -1
                    soff = 0
                else:
                    src_row = pptr[p, lev + 1]
                    soff = 2 * size - 1
                right = (i >> lev) & 1
                if right == 0:
                    for j in range(size):
                        if src_row < 0:
                            x = chan[j]
                            y = chan[j + size]
                        else:
                            x = pbuf[src_row, soff + j]
                            y = pbuf[src_row, soff + j + size]
                        pbuf[dst, doff + j] = _boxplus(x, y)
                else:
                    crow = cptr[p, lev]
                    for j in range(size):
                        if src_row < 0:
                            x = chan[j]
                            y = chan[j + size]
                        else:
                            x = pbuf[src_row, soff + j]
                            y = pbuf[src_row, soff + j + size]
                        if cbuf[crow, doff + j]:
                            pbuf[dst, doff + j] = y - x
                        else:
                            pbuf[dst, doff + j] = y + x
            if n_log == 0:
                leaf[p] = chan[0]
            else:
                leaf[p] = pbuf[pptr[p, 0], 0]

        # ---- extend paths
        if frozen[i] != INFO:
            b = frozen[i]
            for a in range(n_active):
                p = order[a]
                lam = leaf[p]
                metric[p] -= _softplus(-lam if b == 0 else lam)
                new_bit[a] = b
            # path set unchanged
        else:
            nc = 0
            for a in range(n_active):
                p = order[a]
                lam = leaf[p]
                for b in range(2):
                    cand_metric[nc] = metric[p] - _softplus(-lam if b == 0 else lam)
                    cand_parent[nc] = a
                    cand_bit[nc] = b
                    nc += 1
            _select_survivors(cand_metric, nc, list_size, keep, rank_buf, tmp_buf)
            for a in range(n_active):
                nchild[a] = 0
            for c in range(nc):
                if keep[c]:
                    a = cand_parent[c]
                    children[a, nchild[a]] = cand_bit[c]
                    nchild[a] += 1
            # kill first so their ids can be reused by clones
            for a in range(n_active):
                if nchild[a] == 0:
                    p = order[a]
                    _release(pptr, prefc, pfree, pnfree, p, n_log)
                    _release(cptr, crefc, cfree, cnfree, p, n_log)
                    free_paths[n_free_paths] = p
                    n_free_paths += 1
            m = 0
            for a in range(n_active):
                p = order[a]
                if nchild[a] == 0:
                    continue
                base = metric[p]
                lam = leaf[p]
                for c in range(nchild[a]):
                    b = children[a, c]
                    if c == 0:
                        q = p
                    else:
                        n_free_paths -= 1
                        q = free_paths[n_free_paths]
                        _share(pptr, prefc, p, q, n_log)
                        _share(cptr, crefc, p, q, n_log)
                    metric[q] = base - _softplus(-lam if b == 0 else lam)
                    new_order[m] = q
                    new_bit[m] = b
                    m += 1
            n_active = m
            for a in range(n_active):
                order[a] = new_order[a]

        # ---- propagate partial sums upward
        for a in range(n_active):
            p = order[a]
            scratch[0] = new_bit[a]
            size = 1
            lev = 0
            while True:
                if lev == n_log:
                    for j in range(n):
                        final_w[p, j] = scratch[j]
                    break
                if (i >> lev) & 1 == 0:
                    dst = _fresh_slot(cptr, crefc, cfree, cnfree, p, lev)
                    for j in range(size):
                        cbuf[dst, size - 1 + j] = scratch[j]
                    break
                crow = cptr[p, lev]
                for j in range(size):
                    scratch2[j] = cbuf[crow, size - 1 + j] ^ scratch[j]
                    scratch2[j + size] = scratch[j]
                for j in range(2 * size):
                    scratch[j] = scratch2[j]
                size *= 2
                lev += 1

    out_w = np.zeros((n_active, n), dtype=np.uint8)
    out_m = np.zeros(n_active)
    for a in range(n_active):
        out_m[a] = metric[order[a]]
    rank = np.empty(n_active, dtype=np.int64)
    _rank_paths(out_m, n_active, rank, np.empty(n_active, dtype=np.int64))
    sorted_m = np.zeros(n_active)
    for r in range(n_active):
        a = rank[r]
        out_w[r] = final_w[order[a]]
        sorted_m[r] = out_m[a]
    return out_w, sorted_m


def _scl_words(llr, frozen_row, list_size):
    """Run the list kernel; returns ``(w, codewords, metrics)``, w in the u F domain."""
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    llr = np.clip(np.asarray(llr, dtype=float), -LLR_MAX, LLR_MAX)
    frozen_row = np.asarray(frozen_row, dtype=np.int8)
    n_log = _log2_exact(llr.size)
    if frozen_row.size != llr.size:
        raise ValueError("frozen row and LLR vector differ in length")
    rev = bit_reversal(n_log)
    w, metrics = _scl_kernel(llr[rev], frozen_row, int(list_size))
    return w, w[:, rev].astype(np.int8), metrics


def scl_decode(llr, frozen_row, list_size=1):
    """Successive-cancellation list decoding of a single-user coset code.

    Parameters
    ----------
    llr : array_like, shape (N,)
        Channel LLRs, clipped to ``±LLR_MAX``.
    frozen_row : array_like, shape (N,)
        Frozen values or ``INFO``.
    list_size : int
        Number of surviving paths ``L``.

    Returns
    -------
    CandidateList
        At most ``L`` candidates sorted by descending metric; equal metrics
        keep the lexicographic order of their decision histories.
    """
    w, codewords, metrics = _scl_words(llr, frozen_row, list_size)
    u = _butterfly(w.astype(np.int8))
    return CandidateList(
        info_bits=u[:, info_positions(frozen_row)],
        codewords=codewords,
        metrics=metrics,
    )
