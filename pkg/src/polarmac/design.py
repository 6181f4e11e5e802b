"""Frozen-set design for the symmetrized noiseless adder MAC.

The all-zero tuple codeword is sent over the noiseless adder channel with a
uniform random coset; the averaged receiver pmf is pushed through the polar
recursion (convolution for the minus branch, squared product for the plus
branch) and the synthetic channels with the largest probability of the zero
tuple carry information.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from . import group_pmf as gp
from .polar import INFO, _log2_exact, bit_reversal

__all__ = [
    "DESIGN_FORMAT_VERSION",
    "DesignResult",
    "initial_design_pmf",
    "evolve_pmfs",
    "select_frozen",
    "assign_frozen_values",
    "design_code",
    "frozen_matrix",
    "monte_carlo_reliability",
    "rng_stream",
]

DESIGN_FORMAT_VERSION = 1

# purpose tags for counter-based random streams
TAG_INFO = 1
TAG_NOISE = 2
TAG_COSET = 3
TAG_FROZEN = 4
TAG_DESIGN_MC = 5


def rng_stream(seed, tag, *counters):
    """Independent Philox stream keyed by (seed, purpose tag, counters...)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, tag, *counters])))


def _weight(x):
    return bin(x).count("1")


def initial_design_pmf(k_users, exact=False):
    """Receiver pmf of the zero tuple averaged over the symmetrizing coset.

    ``mu0(x) = 2^-K * sum_{h : wt(h ^ x) == wt(h)} 1 / C(K, wt(h))``.
    With ``exact=True`` a list of Fractions is returned.
    """
    if k_users < 1:
        raise ValueError("need at least one user")
    size = 1 << k_users
    mu = [Fraction(0)] * size
    for x in range(size):
        for h in range(size):
            if _weight(h ^ x) == _weight(h):
                mu[x] += Fraction(1, comb(k_users, _weight(h)))
        mu[x] /= size
    if exact:
        return mu
    return np.array([float(v) for v in mu])


def evolve_pmfs(mu0, n_levels, return_levels=False):
    """Polarize ``mu0`` over ``n_levels`` steps.

    Each pmf at step ``v`` produces ``cnop(mu, mu)`` then ``vnop(mu, mu, 0)``
    at positions ``2i`` and ``2i + 1`` of step ``v + 1``, so the first step
    ends up as the most significant bit of the final index, which is the
    decoding order of the SC recursion.

    Returns an array of shape ``(2**n_levels, 2**K)``; with
    ``return_levels`` the list of all steps.
    """
    current = np.asarray(mu0, dtype=float)[None, :]
    levels = [current]
    for _ in range(n_levels):
        nxt = np.empty((2 * current.shape[0], current.shape[1]))
        nxt[0::2] = gp.cnop(current, current)
        nxt[1::2] = gp.vnop(current, current, 0)
        current = nxt
        levels.append(current)
    return levels if return_levels else current


def select_frozen(pmfs, info_length):
    """Pick the ``info_length`` positions with the largest ``mu(0)``.

    Returns ``(info_positions, reliability)`` with positions sorted
    ascending; ties go to the smaller index.
    """
    reliability = np.asarray(pmfs)[:, 0].copy()
    n = reliability.size
    if not 0 <= info_length <= n:
        raise ValueError(f"info length {info_length} outside [0, {n}]")
    order = np.lexsort((np.arange(n), -reliability))
    return np.sort(order[:info_length]), reliability


def assign_frozen_values(n_frozen, k_users, seed):
    """Uniform random frozen bits, one independent stream per user."""
    out = np.zeros((k_users, n_frozen), dtype=np.int8)
    for user in range(k_users):
        out[user] = rng_stream(seed, TAG_FROZEN, user).integers(0, 2, n_frozen, dtype=np.int8)
    return out


def frozen_matrix(info_positions, frozen_values, length):
    """(K, N) matrix with ``INFO`` at information columns."""
    frozen_values = np.asarray(frozen_values, dtype=np.int8)
    k_users = frozen_values.shape[0]
    frozen_pos = np.setdiff1d(np.arange(length), info_positions)
    out = np.full((k_users, length), INFO, dtype=np.int8)
    out[:, frozen_pos] = frozen_values
    return out


@dataclass
class DesignResult:
    k_users: int
    length: int
    info_length: int
    seed: int
    info_positions: np.ndarray
    reliability: np.ndarray
    frozen_values: np.ndarray  # (K, N - k), aligned to sorted frozen positions
    version: int = field(default=DESIGN_FORMAT_VERSION)

    @property
    def frozen_positions(self):
        return np.setdiff1d(np.arange(self.length), self.info_positions)

    def frozen_matrix(self):
        return frozen_matrix(self.info_positions, self.frozen_values, self.length)

    def to_dict(self):
        return {
            "version": self.version,
            "K": self.k_users,
            "N": self.length,
            "k": self.info_length,
            "seed": self.seed,
            "info_positions": [int(i) for i in self.info_positions],
            "reliabilities": [float(r) for r in self.reliability],
            "frozen_values": [[int(b) for b in row] for row in self.frozen_values],
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("version") != DESIGN_FORMAT_VERSION:
            raise ValueError(f"unsupported design format version {data.get('version')!r}")
        k_users, length, info_length = int(data["K"]), int(data["N"]), int(data["k"])
        _log2_exact(length)
        info = np.array(data["info_positions"], dtype=np.int64)
        frozen_values = np.array(data["frozen_values"], dtype=np.int8).reshape(k_users, -1)
        reliability = np.array(data["reliabilities"], dtype=float)
        if info.size != info_length or np.unique(info).size != info_length:
            raise ValueError("info_positions must list k distinct indices")
        if info_length and (info.min() < 0 or info.max() >= length):
            raise ValueError("info position out of range")
        if frozen_values.shape != (k_users, length - info_length):
            raise ValueError("frozen_values must hold K rows of N - k bits")
        if reliability.size != length:
            raise ValueError("need one reliability per position")
        if not np.isin(frozen_values, (0, 1)).all():
            raise ValueError("frozen values must be bits")
        return cls(
            k_users=k_users,
            length=length,
            info_length=info_length,
            seed=int(data["seed"]),
            info_positions=np.sort(info),
            reliability=reliability,
            frozen_values=frozen_values,
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def design_code(k_users, length, info_length, seed=0):
    """Full design: reliabilities, common information set, random frozen bits."""
    n_levels = _log2_exact(length)
    pmfs = evolve_pmfs(initial_design_pmf(k_users), n_levels)
    info, reliability = select_frozen(pmfs, info_length)
    return DesignResult(
        k_users=k_users,
        length=length,
        info_length=info_length,
        seed=seed,
        info_positions=info,
        reliability=reliability,
        frozen_values=assign_frozen_values(length - info_length, k_users, seed),
    )


def _genie_leaves(pmfs):
    """Leaf pmfs of SC decoding with genie zero decisions (batch over axis 0)."""
    n = pmfs.shape[-2]
    if n == 1:
        return pmfs
    a, b = pmfs[..., : n // 2, :], pmfs[..., n // 2 :, :]
    return np.concatenate([_genie_leaves(gp.cnop(a, b)), _genie_leaves(gp.vnop(a, b, 0))], axis=-2)


def monte_carlo_reliability(k_users, length, frames, seed=0):
    """Cross-check of the analytic design by simulation.

    Sends the zero codeword through the noiseless symmetrized adder MAC,
    runs genie-aided joint SC and returns, per decoding-order position, the
    frequency with which some nonzero tuple was at least as likely as zero.
    """
    n_levels = _log2_exact(length)
    rng = rng_stream(seed, TAG_DESIGN_MC)
    size = 1 << k_users
    weights = np.array([_weight(g) for g in range(size)])
    coset = rng.integers(0, size, size=(frames, length))
    # receiver knows the output weight and the coset: uniform over tuples
    # x with wt(x ^ h) == wt(h)
    consistent = weights[np.arange(size)[None, None, :] ^ coset[..., None]] == weights[coset][..., None]
    pmfs = consistent / consistent.sum(axis=-1, keepdims=True)
    leaves = _genie_leaves(pmfs[:, bit_reversal(n_levels), :])
    errors = leaves[..., 1:].max(axis=-1) >= leaves[..., 0]
    return errors.mean(axis=0)
