"""Joint successive cancellation (JSC) decoding over Z_2^K.

All K users are decoded as a single polar code whose symbols are bit
tuples.  Messages are pmfs (see :mod:`polarmac.group_pmf`); a frozen bit
matrix ``F`` has shape (K, N) with entries 0, 1 or ``INFO``.
"""

from dataclasses import dataclass

import numba
import numpy as np

from . import group_pmf as gp
from .crc import crc_check
from .polar import (
    INFO,
    _butterfly,
    _fresh_slot,
    _log2_exact,
    _rank_paths,
    _select_survivors,
    _release,
    _share,
    _trailing_zeros,
    bit_reversal,
)

__all__ = [
    "TupleCandidateList",
    "demod_init",
    "column_constraints",
    "jsc_decode",
    "jsc_list_decode",
    "select_candidate",
    "tuple_signal_levels",
    "split_users",
    "join_users",
]

MAX_USERS_LIST = 8


def tuple_signal_levels(k_users, power):
    """Noiseless channel output ``sum_i tau(b_i)`` for every tuple index."""
    g = np.arange(1 << k_users)
    weight = np.zeros_like(g)
    for i in range(k_users):
        weight += (g >> i) & 1
    return np.sqrt(power) * (k_users - 2 * weight)


def join_users(bits):
    """(K, ...) user bits -> tuple indices (user 1 = MSB)."""
    bits = np.asarray(bits, dtype=np.int64)
    out = np.zeros(bits.shape[1:], dtype=np.int64)
    for row in bits:
        out = (out << 1) | row
    return out


def split_users(tuples, k_users):
    """Tuple indices (...) -> (..., K) user bits; inverse of :func:`join_users` up to axis order."""
    tuples = np.asarray(tuples, dtype=np.int64)
    shifts = np.arange(k_users - 1, -1, -1)
    return ((tuples[..., None] >> shifts) & 1).astype(np.int8)


def demod_init(y, power, k_users, coset=None):
    """Initial tuple pmfs ``mu_k(g) ∝ exp(-(y_k - sum_i tau(b_i))^2 / 2)``.

    Parameters
    ----------
    y : array_like, shape (N,)
    power : float
        Per-user power P; ``tau(0) = +sqrt(P)``, unit noise variance.
    k_users : int
    coset : array_like, shape (K, N), optional
        Symmetrizing bits added at the transmitter; the receiver removes
        them by shifting each position's pmf.

    Returns
    -------
    ndarray, shape (N, 2**K)
    """
    if power <= 0:
        raise ValueError("power must be positive")
    y = np.asarray(y, dtype=float)
    levels = tuple_signal_levels(k_users, power)
    logits = -0.5 * (y[:, None] - levels[None, :]) ** 2
    logits -= logits.max(axis=1, keepdims=True)
    pmf = np.exp(logits)
    pmf /= pmf.sum(axis=1, keepdims=True)
    if coset is not None:
        pmf = gp.coset_shift(pmf, join_users(coset))
    return pmf


def column_constraints(frozen):
    """Per-column (mask, value) tuple constraints from a (K, N) frozen matrix."""
    frozen = np.asarray(frozen)
    k_users = frozen.shape[0]
    mask = np.zeros(frozen.shape[1], dtype=np.int64)
    value = np.zeros(frozen.shape[1], dtype=np.int64)
    for i in range(k_users):
        bit = 1 << (k_users - 1 - i)
        fixed = frozen[i] != INFO
        mask[fixed] |= bit
        value[frozen[i] == 1] |= bit
    return mask, value


def _user_info(u_tuples, frozen):
    """Extract each user's information bits from decided tuples u (..., N)."""
    k_users = frozen.shape[0]
    bits = split_users(u_tuples, k_users)
    return [bits[..., frozen[i] == INFO, i] for i in range(k_users)]


# -------------------------------------------------------------- reference SC


def _polar_decode(pmfs, frozen):
    n = pmfs.shape[0]
    if n == 1:
        g = gp.hard_decision(pmfs[0], frozen[:, 0])
        return np.array([g]), np.array([g])
    p_odd, p_even = pmfs[0::2], pmfs[1::2]
    p1 = gp.cnop(p_even, p_odd)
    u1, x1 = _polar_decode(p1, frozen[:, : n // 2])
    p2 = gp.vnop(gp.coset_shift(p_odd, x1), p_even)
    u2, x2 = _polar_decode(p2, frozen[:, n // 2 :])
    x = np.empty(n, dtype=np.int64)
    x[0::2] = x1 ^ x2
    x[1::2] = x2
    return np.concatenate([u1, u2]), x


def jsc_decode(pmfs, frozen):
    """Joint SC decoding, a direct transcription of the recursive algorithm.

    The pmf vector is split into odd/even channel uses; the first branch
    decodes their convolution, the second the product of the even stream
    with the odd stream shifted by the first branch's re-encoded tuples.

    Returns
    -------
    info : list of K int8 arrays
        Each user's information bits.
    x : ndarray of tuple indices, shape (N,)
        Estimated tuple codeword.

    Raises
    ------
    DegenerateMessageError
        If a variable-node product vanishes.
    """
    pmfs = np.asarray(pmfs, dtype=float)
    frozen = np.asarray(frozen)
    _log2_exact(pmfs.shape[0])
    if frozen.shape != (gp.num_users(pmfs), pmfs.shape[0]):
        raise ValueError(f"frozen matrix shape {frozen.shape} does not match pmfs {pmfs.shape}")
    u, x = _polar_decode(pmfs, frozen)
    return _user_info(u, frozen), x


# ---------------------------------------------------------------- list kernel


# log of the smallest subnormal; an underflowed leaf stays comparable
LOG_FLOOR = float(np.log(np.nextafter(0.0, 1.0)))


@numba.njit(cache=True)
def _leaf_log(pr):
    return np.log(pr) if pr > 0.0 else LOG_FLOOR


@numba.njit(cache=True)
def _wht(v, a_size):
    h = 1
    while h < a_size:
        for s in range(0, a_size, 2 * h):
            for j in range(s, s + h):
                x = v[j]
                y = v[j + h]
                v[j] = x + y
                v[j + h] = x - y
        h *= 2


@numba.njit(cache=True)
def _jsc_kernel(chan, mask, value, list_size):
    """chan: (N, A) pmfs of w in natural order.  Returns (w, metrics, ok)."""
    n, a_size = chan.shape
    n_log = 0
    while (1 << n_log) < n:
        n_log += 1
    cap = list_size
    nl = max(n_log, 1)
    rows = max(n - 1, 1)
    pbuf = np.zeros((cap, rows, a_size))
    cbuf = np.zeros((cap, rows), dtype=np.uint8)
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
    free_paths = np.zeros(cap, dtype=np.int64)
    for s in range(cap - 1):
        free_paths[s] = cap - 1 - s
    n_free_paths = cap - 1
    order = np.zeros(cap, dtype=np.int64)
    n_active = 1
    metric = np.zeros(cap)
    dead = np.zeros(cap, dtype=np.bool_)
    final_w = np.zeros((cap, n), dtype=np.uint8)
    scratch = np.zeros(n, dtype=np.uint8)
    scratch2 = np.zeros(n, dtype=np.uint8)
    leaf = np.zeros((cap, a_size))
    ta = np.zeros(a_size)
    tb = np.zeros(a_size)

    ncand_max = cap * a_size
    cand_metric = np.empty(ncand_max)
    cand_parent = np.empty(ncand_max, dtype=np.int64)
    cand_tuple = np.empty(ncand_max, dtype=np.uint8)
    keep = np.empty(ncand_max, dtype=np.bool_)
    rank_buf = np.empty(ncand_max, dtype=np.int64)
    tmp_buf = np.empty(ncand_max, dtype=np.int64)
    children = np.zeros((cap, a_size), dtype=np.uint8)
    nchild = np.zeros(cap, dtype=np.int64)
    new_order = np.zeros(cap, dtype=np.int64)
    new_tuple = np.zeros(cap, dtype=np.uint8)
    inv_a = 1.0 / a_size

    for i in range(n):
        top = _trailing_zeros(i, n_log)
        for act in range(n_active):
            p = order[act]
            dead[p] = False
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
                crow = cptr[p, lev]
                for j in range(size):
                    if src_row < 0:
                        for g in range(a_size):
                            ta[g] = chan[j, g]
                            tb[g] = chan[j + size, g]
                    else:
                        for g in range(a_size):
                            ta[g] = pbuf[src_row, soff + j, g]
                            tb[g] = pbuf[src_row, soff + j + size, g]
                    total = 0.0
                    if right == 0:
                        _wht(ta, a_size)
                        _wht(tb, a_size)
                        for g in range(a_size):
                            ta[g] *= tb[g]
                        _wht(ta, a_size)
                        for g in range(a_size):
                            v = ta[g] * inv_a
                            if v < 0.0:
                                v = 0.0
                            ta[g] = v
                            total += v
                        for g in range(a_size):
                            pbuf[dst, doff + j, g] = ta[g] / total
                    else:
                        shift = cbuf[crow, doff + j]
                        for g in range(a_size):
                            v = ta[g ^ shift] * tb[g]
                            pbuf[dst, doff + j, g] = v
                            total += v
                        if total <= 0.0:
                            dead[p] = True
                            break
                        for g in range(a_size):
                            pbuf[dst, doff + j, g] /= total
                if dead[p]:
                    break
            if not dead[p]:
                for g in range(a_size):
                    if n_log == 0:
                        leaf[p, g] = chan[0, g]
                    else:
                        leaf[p, g] = pbuf[pptr[p, 0], 0, g]

        # ---- branch over tuples allowed by the column constraint
        cm = mask[i]
        cv = value[i]
        nc = 0
        for act in range(n_active):
            p = order[act]
            if dead[p]:
                continue
            for g in range(a_size):
                if (g & cm) != cv:
                    continue
                cand_metric[nc] = metric[p] + _leaf_log(leaf[p, g])
                cand_parent[nc] = act
                cand_tuple[nc] = g
                nc += 1
        _select_survivors(cand_metric, nc, list_size, keep, rank_buf, tmp_buf)
        for act in range(n_active):
            nchild[act] = 0
        for c in range(nc):
            if keep[c]:
                act = cand_parent[c]
                children[act, nchild[act]] = cand_tuple[c]
                nchild[act] += 1
        for act in range(n_active):
            if nchild[act] == 0:
                p = order[act]
                _release(pptr, prefc, pfree, pnfree, p, n_log)
                _release(cptr, crefc, cfree, cnfree, p, n_log)
                free_paths[n_free_paths] = p
                n_free_paths += 1
        m = 0
        for act in range(n_active):
            p = order[act]
            if nchild[act] == 0:
                continue
            base = metric[p]
            for c in range(nchild[act]):
                g = children[act, c]
                if c == 0:
                    q = p
                else:
                    n_free_paths -= 1
                    q = free_paths[n_free_paths]
                    _share(pptr, prefc, p, q, n_log)
                    _share(cptr, crefc, p, q, n_log)
                metric[q] = base + _leaf_log(leaf[p, g])
                new_order[m] = q
                new_tuple[m] = g
                m += 1
        n_active = m
        if n_active == 0:
            return np.zeros((0, n), dtype=np.uint8), np.zeros(0), False
        for act in range(n_active):
            order[act] = new_order[act]

        # ---- partial sums
        for act in range(n_active):
            p = order[act]
            scratch[0] = new_tuple[act]
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

    out_m = np.zeros(n_active)
    for act in range(n_active):
        out_m[act] = metric[order[act]]
    rank = np.empty(n_active, dtype=np.int64)
    _rank_paths(out_m, n_active, rank, np.empty(n_active, dtype=np.int64))
    out_w = np.zeros((n_active, n), dtype=np.uint8)
    sorted_m = np.zeros(n_active)
    for r in range(n_active):
        out_w[r] = final_w[order[rank[r]]]
        sorted_m[r] = out_m[rank[r]]
    return out_w, sorted_m, True


@dataclass
class TupleCandidateList:
    """Joint list-decoder output, best candidate first.

    ``info_bits[c][i]`` is user ``i``'s information word in candidate ``c``;
    ``metrics`` are ``log P(u | y)`` accumulated from normalized leaf pmfs.
    ``degenerate`` flags a decode in which every path hit a zero-probability
    message (the list is then empty).
    """

    info_bits: np.ndarray  # (n_cand, K, k) int8
    codewords: np.ndarray  # (n_cand, N) tuple indices
    metrics: np.ndarray
    capacity: int
    degenerate: bool = False

    def __len__(self):
        return self.metrics.size


def jsc_list_decode(pmfs, frozen, list_size=1):
    """JSC list decoding: keep the ``list_size`` best tuple paths.

    At each column every surviving path branches over all tuples allowed by
    the frozen constraints; the best ``list_size`` extensions survive, with
    equal metrics resolved by lexicographic path history.  ``list_size=1``
    makes the same decisions as :func:`jsc_decode`.
    """
    if list_size < 1:
        raise ValueError("list_size must be >= 1")
    pmfs = np.asarray(pmfs, dtype=float)
    frozen = np.asarray(frozen)
    k_users = gp.num_users(pmfs)
    if k_users > MAX_USERS_LIST:
        raise ValueError(f"list decoder supports K <= {MAX_USERS_LIST}")
    n_log = _log2_exact(pmfs.shape[0])
    if frozen.shape != (k_users, pmfs.shape[0]):
        raise ValueError(f"frozen matrix shape {frozen.shape} does not match pmfs {pmfs.shape}")
    rev = bit_reversal(n_log)
    mask, value = column_constraints(frozen)
    w, metrics, ok = _jsc_kernel(np.ascontiguousarray(pmfs[rev]), mask, value, int(list_size))
    if not ok:
        k_max = int(np.max(np.sum(frozen == INFO, axis=1), initial=0))
        return TupleCandidateList(
            info_bits=np.zeros((0, k_users, k_max), dtype=np.int8),
            codewords=np.zeros((0, pmfs.shape[0]), dtype=np.int64),
            metrics=np.zeros(0),
            capacity=list_size,
            degenerate=True,
        )
    u = _butterfly(w.astype(np.int64))
    info = np.stack(_user_info(u, frozen), axis=1)
    return TupleCandidateList(
        info_bits=info, codewords=w[:, rev].astype(np.int64), metrics=metrics, capacity=list_size
    )


def select_candidate(candidates, mode="genie", true_info=None, crc_bits=None):
    """Pick one candidate from a joint list.

    Parameters
    ----------
    candidates : TupleCandidateList
    mode : {"genie", "crc"}
        ``"genie"`` reports whether ``true_info`` (K, k) is anywhere in the
        list.  ``"crc"`` returns the best candidate whose every user word
        passes a ``crc_bits`` CRC.

    Returns
    -------
    info : ndarray (K, k) or None
    found : bool
    """
    if len(candidates) == 0:
        return None, False
    if mode == "genie":
        if true_info is None:
            raise ValueError("genie selection needs the transmitted words")
        hits = np.all(candidates.info_bits == np.asarray(true_info)[None], axis=(1, 2))
        if hits.any():
            return candidates.info_bits[int(np.argmax(hits))], True
        return None, False
    if mode == "crc":
        if crc_bits is None:
            raise ValueError("crc selection needs crc_bits")
        passing = np.all(crc_check(candidates.info_bits, crc_bits), axis=1)
        if passing.any():
            return candidates.info_bits[int(np.argmax(passing))], True
        return None, False
    raise ValueError(f"unknown selection mode {mode!r}")
