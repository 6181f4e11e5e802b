"""K-user real adder channel with BPSK and unit-variance Gaussian noise."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NOISE_VARIANCE",
    "GmacChannel",
    "bpsk_modulate",
    "ebn0_to_power",
    "power_to_ebn0",
]

NOISE_VARIANCE = 1.0


def bpsk_modulate(bits, power):
    """Map bit 0 to ``+sqrt(P)`` and bit 1 to ``-sqrt(P)``."""
    return np.sqrt(power) * (1.0 - 2.0 * np.asarray(bits, dtype=float))


def ebn0_to_power(ebn0_db, length, info_length):
    """Per-user power P such that ``Eb/N0 = N P / (2 k)``."""
    if info_length <= 0:
        raise ValueError("Eb/N0 is undefined without information bits")
    return 2.0 * info_length * 10.0 ** (ebn0_db / 10.0) / length


def power_to_ebn0(power, length, info_length):
    """Inverse of :func:`ebn0_to_power`, in dB."""
    if info_length <= 0:
        raise ValueError("Eb/N0 is undefined without information bits")
    return 10.0 * np.log10(length * power / (2.0 * info_length))


@dataclass(frozen=True)
class GmacChannel:
    k_users: int
    power: float
    symmetrize: bool = False

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("power must be positive")

    def transmit(self, codewords, rng, noise=None, coset=None):
        """Send a (K, N) block of codewords.

        With ``symmetrize`` a uniform coset matrix is XOR-ed onto the
        codewords before modulation (drawn from ``rng`` unless given) and
        returned so the receiver can undo it.  ``noise`` overrides the
        Gaussian draw, e.g. zeros for a noiseless check.

        Returns
        -------
        y : ndarray, shape (N,)
        coset : ndarray (K, N) of int8, or None
        """
        codewords = np.asarray(codewords, dtype=np.int8)
        if codewords.ndim != 2 or codewords.shape[0] != self.k_users:
            raise ValueError(f"expected ({self.k_users}, N) codewords, got {codewords.shape}")
        sent = codewords
        if self.symmetrize:
            if coset is None:
                coset = rng.integers(0, 2, size=codewords.shape, dtype=np.int8)
            coset = np.asarray(coset, dtype=np.int8)
            sent = codewords ^ coset
        else:
            coset = None
        if noise is None:
            noise = rng.standard_normal(codewords.shape[1]) * np.sqrt(NOISE_VARIANCE)
        y = bpsk_modulate(sent, self.power).sum(axis=0) + noise
        return y, coset
