import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import design_mu0_bruteforce, naive_convolution
from polarmac import group_pmf as gp
from polarmac.design import (
    DesignResult,
    assign_frozen_values,
    design_code,
    evolve_pmfs,
    initial_design_pmf,
    monte_carlo_reliability,
    select_frozen,
)
from polarmac.polar import INFO


def test_mu0_two_users():
    np.testing.assert_allclose(initial_design_pmf(2), [0.75, 0, 0, 0.25], atol=1e-15)


def test_mu0_single_user():
    np.testing.assert_array_equal(initial_design_pmf(1), [1.0, 0.0])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_mu0_matches_enumeration(k):
    exact = initial_design_pmf(k, exact=True)
    assert exact == design_mu0_bruteforce(k)
    assert sum(exact) == 1


def test_mu0_rejects_no_users():
    with pytest.raises(ValueError):
        initial_design_pmf(0)


def test_evolution_first_level():
    mu0 = initial_design_pmf(2)
    np.testing.assert_allclose(evolve_pmfs(mu0, 0), [mu0])
    lvl = evolve_pmfs(mu0, 1)
    np.testing.assert_allclose(lvl[0], [5 / 8, 0, 0, 3 / 8], atol=1e-15)
    np.testing.assert_allclose(lvl[1], [0.9, 0, 0, 0.1], atol=1e-15)


def test_single_user_evolution_is_fixed():
    np.testing.assert_array_equal(evolve_pmfs(initial_design_pmf(1), 5), np.tile([1.0, 0.0], (32, 1)))


def naive_evolve(mu0, n):
    pmfs = [np.asarray(mu0, dtype=float)]
    for _ in range(n):
        nxt = []
        for p in pmfs:
            minus = naive_convolution(p, p)
            plus = p * p
            nxt += [minus / minus.sum(), plus / plus.sum()]
        pmfs = nxt
    return np.array(pmfs)


@pytest.mark.parametrize("k", [2, 3])
def test_evolution_matches_naive_recursion(k):
    mu0 = initial_design_pmf(k)
    np.testing.assert_allclose(evolve_pmfs(mu0, 6), naive_evolve(mu0, 6), atol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_polarization_ordering(k):
    levels = evolve_pmfs(initial_design_pmf(k), 10, return_levels=True)
    for parent, child in zip(levels[:-1], levels[1:]):
        minus, plus = child[0::2, 0], child[1::2, 0]
        assert np.all(minus <= parent[:, 0] + 1e-12)
        assert np.all(parent[:, 0] <= plus + 1e-12)
        top = parent.argmax(axis=1) == 0
        assert np.all(plus[top] >= parent[top, 0] - 1e-12)
    rel = levels[-1][:, 0]
    assert rel.min() >= 2.0**-k - 1e-12
    assert rel.max() <= 1 + 1e-12


def test_select_frozen_small_code():
    pmfs = naive_evolve(initial_design_pmf(2), 2)
    rel = pmfs[:, 0]
    expected = sorted(sorted(range(4), key=lambda i: (-rel[i], i))[:2])
    info, reliability = select_frozen(evolve_pmfs(initial_design_pmf(2), 2), 2)
    assert list(info) == expected
    np.testing.assert_allclose(reliability, rel, atol=1e-12)


def test_select_frozen_extremes_and_ties():
    pmfs = np.tile([0.5, 0.5], (8, 1))
    assert list(select_frozen(pmfs, 3)[0]) == [0, 1, 2]
    assert select_frozen(pmfs, 0)[0].size == 0
    assert list(select_frozen(pmfs, 8)[0]) == list(range(8))
    with pytest.raises(ValueError):
        select_frozen(pmfs, 9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=8, max_size=8), st.integers(0, 8))
def test_select_frozen_depends_only_on_pairs(levels, k):
    rel = np.array(levels) / 4.0
    pmfs = np.stack([rel, 1 - rel], axis=1)
    info, _ = select_frozen(pmfs, k)
    oracle = sorted(sorted(range(8), key=lambda i: (-rel[i], i))[:k])
    assert list(info) == oracle


def test_frozen_values_statistics():
    a = assign_frozen_values(4000, 3, seed=11)
    np.testing.assert_array_equal(a, assign_frozen_values(4000, 3, seed=11))
    assert a.shape == (3, 4000)
    diff = np.mean(a[0] != a[1])
    assert abs(diff - 0.5) < 5 * np.sqrt(0.25 / 4000)
    assert assign_frozen_values(0, 2, seed=1).shape == (2, 0)
    assert not np.array_equal(a, assign_frozen_values(4000, 3, seed=12))


def test_design_code_layout():
    d = design_code(2, 256, 100, seed=4)
    fm = d.frozen_matrix()
    assert fm.shape == (2, 256)
    assert np.all((fm[0] == INFO) == (fm[1] == INFO))
    np.testing.assert_array_equal(np.flatnonzero(fm[0] == INFO), d.info_positions)
    np.testing.assert_array_equal(fm[:, d.frozen_positions], d.frozen_values)
    assert d.reliability[d.info_positions].min() >= d.reliability[d.frozen_positions].max()


def test_design_round_trip(tmp_path):
    d = design_code(3, 64, 20, seed=9)
    path = tmp_path / "d.json"
    d.save(path)
    e = DesignResult.load(path)
    np.testing.assert_array_equal(e.frozen_matrix(), d.frozen_matrix())
    np.testing.assert_array_equal(e.reliability, d.reliability)
    assert (e.k_users, e.length, e.info_length, e.seed) == (3, 64, 20, 9)


@pytest.mark.parametrize(
    "patch",
    [
        {"version": 99},
        {"N": 48},
        {"info_positions": [0] * 20},
        {"info_positions": list(range(44, 64)) + [64]},
        {"frozen_values": [[0] * 44] * 2},
        {"reliabilities": [0.5] * 10},
    ],
)
def test_design_validation(patch):
    data = design_code(3, 64, 20).to_dict()
    data.update(patch)
    if "N" in patch:
        data["reliabilities"] = [0.5] * 48
    with pytest.raises(ValueError):
        DesignResult.from_dict(json.loads(json.dumps(data)))


def test_monte_carlo_agrees_with_recursion():
    k, n = 2, 64
    rel = evolve_pmfs(initial_design_pmf(k), 6)[:, 0]
    err = monte_carlo_reliability(k, n, 4000, seed=3)
    # positions that are perfect in the analysis never fail in simulation
    assert np.all(err[rel > 1 - 1e-12] == 0)
    # the analytic best half sees far fewer errors than the worst half
    order = np.argsort(-rel, kind="stable")
    assert err[order[:32]].mean() < 0.25 * err[order[32:]].mean()


def test_vnop_design_step_is_square():
    mu = initial_design_pmf(3)
    sq = mu * mu
    np.testing.assert_allclose(gp.vnop(mu, mu, 0), sq / sq.sum(), atol=1e-15)
