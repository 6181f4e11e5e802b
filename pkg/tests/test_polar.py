import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import codeword_loglik, dense_generator, dense_transform
from polarmac.group_pmf import TIE_TOL
from polarmac.polar import INFO, LLR_MAX, bit_reversal, encode, polar_transform, scl_decode


def all_codewords(frozen):
    k = int(np.sum(frozen == INFO))
    infos = np.array(list(itertools.product((0, 1), repeat=k)), dtype=np.int8).reshape(-1, k)
    return infos, encode(infos, frozen)


def sc_by_marginalization(llr, frozen):
    """SC decisions from brute-force marginals P(u_i | y, u_<i) (small N only)."""
    n = llr.size
    g = dense_generator(int(np.log2(n)))
    us = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    logl = np.array([codeword_loglik(u @ g % 2, llr) for u in us])
    decided = []
    for i in range(n):
        match = np.all(us[:, :i] == decided, axis=1) if i else np.ones(len(us), bool)
        p = [np.logaddexp.reduce(logl[match & (us[:, i] == b)]) for b in (0, 1)]
        decided.append(frozen[i] if frozen[i] != INFO else int(p[1] > p[0]))
    return np.array(decided)


@pytest.mark.parametrize("n", range(0, 11))
def test_transform_matches_dense_matrix(n):
    rng = np.random.default_rng(n)
    u = rng.integers(0, 2, (4, 1 << n))
    np.testing.assert_array_equal(polar_transform(u), dense_transform(u, n))


@pytest.mark.parametrize("n", [1, 4, 10])
def test_transform_is_involution(n):
    u = np.random.default_rng(0).integers(0, 2, (3, 1 << n))
    np.testing.assert_array_equal(polar_transform(polar_transform(u)), u)


def test_transform_on_tuple_indices_is_per_user():
    rng = np.random.default_rng(1)
    bits = rng.integers(0, 2, (3, 64))
    tuples = (bits[0] << 2) | (bits[1] << 1) | bits[2]
    x = polar_transform(tuples)
    xb = polar_transform(bits)
    np.testing.assert_array_equal(x, (xb[0] << 2) | (xb[1] << 1) | xb[2])


def test_bit_reversal():
    np.testing.assert_array_equal(bit_reversal(3), [0, 4, 2, 6, 1, 5, 3, 7])
    assert not bit_reversal(3).flags.writeable


def test_non_power_of_two_rejected():
    with pytest.raises(ValueError):
        polar_transform(np.zeros(6, dtype=int))


def test_encode_places_frozen_values():
    frozen = np.array([1, 0, INFO, 1, INFO, 0, INFO, INFO], dtype=np.int8)
    info = np.array([1, 0, 1, 1], dtype=np.int8)
    u = np.array([1, 0, 1, 1, 0, 0, 1, 1])
    np.testing.assert_array_equal(encode(info, frozen), u @ dense_generator(3) % 2)
    with pytest.raises(ValueError):
        encode(info[:3], frozen)


def test_sc_matches_marginalization_oracle():
    rng = np.random.default_rng(7)
    frozen = np.array([0, 1, 0, INFO, 1, INFO, INFO, INFO], dtype=np.int8)
    for _ in range(40):
        llr = rng.normal(1.0, 2.0, 8)
        out = scl_decode(llr, frozen, 1)
        expected = sc_by_marginalization(llr, frozen)
        np.testing.assert_array_equal(out.info_bits[0], expected[frozen == INFO])


def test_full_list_is_ml_and_metrics_are_loglik():
    rng = np.random.default_rng(11)
    frozen = np.array([0, 1, INFO, 0, INFO, INFO, 1, INFO], dtype=np.int8)
    infos, words = all_codewords(frozen)
    for _ in range(100):
        llr = rng.normal(0.5, 2.0, 8)
        out = scl_decode(llr, frozen, 16)
        assert len(out) == 16
        ll = np.array([codeword_loglik(c, llr) for c in words])
        np.testing.assert_array_equal(out.codewords[0], words[np.argmax(ll)])
        for info, c, m in zip(out.info_bits, out.codewords, out.metrics):
            np.testing.assert_array_equal(encode(info, frozen), c)
            assert m == pytest.approx(codeword_loglik(c, llr), abs=1e-9)
        assert np.all(np.diff(out.metrics) <= TIE_TOL)


def test_noiseless_high_snr_decodes():
    rng = np.random.default_rng(3)
    frozen = np.full(256, INFO, dtype=np.int8)
    frozen[:128] = rng.integers(0, 2, 128)
    info = rng.integers(0, 2, 128, dtype=np.int8)
    c = encode(info, frozen)
    out = scl_decode(LLR_MAX * (1 - 2.0 * c), frozen, 4)
    np.testing.assert_array_equal(out.info_bits[0], info)


def test_rate_one_code_is_hard_decision():
    llr = np.random.default_rng(5).normal(0, 3, 64)
    frozen = np.full(64, INFO, dtype=np.int8)
    out = scl_decode(llr, frozen, 1)
    np.testing.assert_array_equal(out.codewords[0], (llr < 0).astype(np.int8))


def test_all_frozen_code():
    frozen = np.array([1, 0, 1, 1], dtype=np.int8)
    out = scl_decode(np.zeros(4), frozen, 4)
    assert len(out) == 1
    assert out.info_bits.shape == (1, 0)
    np.testing.assert_array_equal(out.codewords[0], encode(np.zeros(0, np.int8), frozen))


def test_equal_metrics_keep_history_order():
    # zero LLRs: all candidates tie; bit 0 before bit 1 at every step
    frozen = np.array([0, INFO, INFO, INFO], dtype=np.int8)
    out = scl_decode(np.zeros(4), frozen, 8)
    expected = np.array(list(itertools.product((0, 1), repeat=3)))
    np.testing.assert_array_equal(out.info_bits, expected)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([1, 2, 4, 8]))
def test_list_holds_distinct_sorted_codewords(seed, list_size):
    rng = np.random.default_rng(seed)
    frozen = np.full(32, INFO, dtype=np.int8)
    frozen[rng.permutation(32)[:16]] = rng.integers(0, 2, 16)
    llr = rng.normal(1.0, 2.0, 32)
    out = scl_decode(llr, frozen, list_size)
    assert len(out) == list_size
    assert len({c.tobytes() for c in out.codewords}) == list_size
    assert np.all(np.diff(out.metrics) <= TIE_TOL)
    for info, c, m in zip(out.info_bits, out.codewords, out.metrics):
        np.testing.assert_array_equal(encode(info, frozen), c)
        assert m == pytest.approx(codeword_loglik(c, llr), abs=1e-9)
