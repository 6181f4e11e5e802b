"""Probability mass functions over the group Z_2^K.

A pmf is a numpy array whose last axis has length ``2**K``; leading axes
are treated as a batch (one pmf per channel use, per path, ...).  The
tuple ``(b_1, ..., b_K)`` lives at index ``sum(b_i << (K - i))``, i.e. user
1 is the most significant bit.  Group addition is bitwise XOR on indices.
"""

import numpy as np

__all__ = [
    "DegenerateMessageError",
    "num_users",
    "tuple_index",
    "index_tuple",
    "group_transform",
    "normalize",
    "cnop",
    "vnop",
    "coset_shift",
    "hard_decision",
    "uniform",
    "delta",
]

FREE = -1
# log-probability gap below which two tuples count as equally likely
TIE_TOL = 1e-9


class DegenerateMessageError(ArithmeticError):
    """A pointwise product of pmfs vanished everywhere."""


def num_users(p):
    """Number of users K encoded by the trailing axis length of ``p``."""
    size = np.shape(p)[-1]
    k = size.bit_length() - 1
    if size < 2 or (1 << k) != size:
        raise ValueError(f"pmf length must be 2**K with K >= 1, got {size}")
    return k


def tuple_index(bits):
    """Map a bit tuple ``(b_1, ..., b_K)`` to its pmf index."""
    index = 0
    for b in bits:
        index = (index << 1) | int(b)
    return index


def index_tuple(index, k_users):
    """Inverse of :func:`tuple_index`."""
    return tuple((int(index) >> (k_users - 1 - i)) & 1 for i in range(k_users))


def uniform(k_users):
    return np.full(1 << k_users, 1.0 / (1 << k_users))


def delta(g, k_users):
    """Point mass at tuple ``g`` (index or bit tuple)."""
    if not np.isscalar(g):
        g = tuple_index(g)
    p = np.zeros(1 << k_users)
    p[g] = 1.0
    return p


def group_transform(p):
    """Character-sum (Walsh-Hadamard) transform along the last axis.

    ``out[s] = sum_g p[g] * (-1)**popcount(g & s)``.  Unnormalized, so
    applying it twice multiplies by ``2**K``.
    """
    k = num_users(p)
    out = np.array(p, dtype=float, copy=True)
    shape = out.shape
    for level in range(k):
        h = 1 << level
        v = out.reshape(shape[:-1] + (-1, 2, h))
        a = v[..., 0, :].copy()
        b = v[..., 1, :]
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
    return out


def _mass(p):
    # left-to-right sum, so the compiled decoders reproduce it bit for bit
    return np.cumsum(p, axis=-1)[..., -1:]


def normalize(p):
    """Clamp round-off negatives to zero and rescale to unit mass."""
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    total = _mass(p)
    if np.any(total <= 0.0):
        raise DegenerateMessageError("pmf has no positive mass")
    return p / total


def _check_same_group(a, b):
    if np.shape(a)[-1] != np.shape(b)[-1]:
        raise ValueError(
            f"pmfs live on different groups: {np.shape(a)[-1]} vs {np.shape(b)[-1]}"
        )


def cnop(a, b):
    """Check-node operation: pmf of the XOR-sum of independent tuples."""
    _check_same_group(a, b)
    size = np.shape(a)[-1]
    product = group_transform(a) * group_transform(b)
    return normalize(group_transform(product) / size)


def coset_shift(p, h):
    """Return ``q`` with ``q[..., g] = p[..., g ^ h]``.

    ``h`` may be a scalar index/bit tuple, or an integer array broadcast
    against the batch axes of ``p`` (one shift per pmf).
    """
    p = np.asarray(p)
    size = p.shape[-1]
    num_users(p)
    if isinstance(h, tuple):
        h = tuple_index(h)
    h = np.asarray(h, dtype=np.int64)
    idx = np.arange(size) ^ h[..., None]
    idx = np.broadcast_to(idx, p.shape)
    return np.take_along_axis(p, idx, axis=-1)


def vnop(a, b, g_hat=0):
    """Variable-node operation: ``out(g) ∝ a(g ^ g_hat) * b(g)``."""
    _check_same_group(a, b)
    product = coset_shift(a, g_hat) * np.asarray(b, dtype=float)
    total = _mass(product)
    if np.any(total <= 0.0):
        raise DegenerateMessageError("vnop product vanished; inconsistent hard decisions")
    return product / total


def _allowed_mask(k_users, constraint):
    mask = 0
    value = 0
    for i, c in enumerate(constraint):
        if c is None or c == FREE:
            continue
        bit = 1 << (k_users - 1 - i)
        mask |= bit
        if int(c) == 1:
            value |= bit
        elif int(c) != 0:
            raise ValueError(f"constraint entries must be 0, 1 or free, got {c!r}")
    return mask, value


def hard_decision(p, constraint=None):
    """Most likely tuple index consistent with per-user constraints.

    ``constraint`` has one entry per user: 0 or 1 pins that user's bit,
    ``None`` or ``-1`` leaves it free.  Probabilities whose logs differ by
    less than ``TIE_TOL`` count as tied; ties go to the smallest index.
    """
    p = np.asarray(p)
    k = num_users(p)
    if constraint is None:
        constraint = [FREE] * k
    if len(constraint) != k:
        raise ValueError(f"constraint has {len(constraint)} entries for K={k}")
    mask, value = _allowed_mask(k, constraint)
    allowed = np.flatnonzero((np.arange(p.shape[-1]) & mask) == value)
    with np.errstate(divide="ignore"):
        logp = np.log(p[allowed])
    best = logp.max()
    return int(allowed[np.flatnonzero(logp + TIE_TOL >= best)[0]])
