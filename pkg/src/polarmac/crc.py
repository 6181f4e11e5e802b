"""Short CRCs used to pick a codeword out of a decoder list."""

import numpy as np

__all__ = ["CRC_POLYNOMIALS", "crc_remainder", "crc_attach", "crc_check"]

# generator polynomials including the leading x^r term
CRC_POLYNOMIALS = {
    3: 0b1011,  # x^3 + x + 1
    4: 0b10011,  # x^4 + x + 1
    5: 0b100101,  # x^5 + x^2 + 1
}


def _poly(r):
    try:
        return CRC_POLYNOMIALS[r]
    except KeyError:
        raise ValueError(f"unsupported CRC length {r}; choose from {sorted(CRC_POLYNOMIALS)}") from None


def crc_remainder(bits, r):
    """Remainder of the bit polynomial (first bit = highest degree) modulo g(x).

    Batched over leading axes; returns an integer array of remainders.
    """
    poly = _poly(r)
    bits = np.asarray(bits, dtype=np.int64)
    rem = np.zeros(bits.shape[:-1], dtype=np.int64)
    for t in range(bits.shape[-1]):
        rem = (rem << 1) | bits[..., t]
        rem ^= np.where((rem >> r) & 1, poly, 0)
    return rem


def _to_bits(rem, r):
    shifts = np.arange(r - 1, -1, -1)
    return ((np.asarray(rem)[..., None] >> shifts) & 1).astype(np.int8)


def crc_attach(bits, r):
    """Append ``r`` CRC bits to ``bits`` (last axis)."""
    bits = np.asarray(bits, dtype=np.int8)
    padded = np.concatenate([bits, np.zeros(bits.shape[:-1] + (r,), dtype=np.int8)], axis=-1)
    return np.concatenate([bits, _to_bits(crc_remainder(padded, r), r)], axis=-1)


def crc_check(bits, r):
    """True where the last ``r`` bits are the CRC of the preceding ones."""
    return crc_remainder(bits, r) == 0
