import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netnorm.model import banach_constants
from netnorm.nets import (
    BudgetExceeded,
    attained_delta_basic,
    attained_delta_general,
    attained_delta_injective,
    attained_delta_multipartite,
    choose_k_basic,
    choose_k_general,
    choose_k_injective,
    choose_k_multipartite,
    counts_block,
    enumerate_net,
    largest_affordable_k,
    net_size,
    net_spec_basic,
    rank,
    unrank,
)
from netnorm.matlib import ParameterError


@pytest.mark.parametrize("d2, delta, k", [(4, 0.5, 50), (2, 1.0, 7), (2, 3.0, 1)])
def test_choose_k_basic(d2, delta, k):
    assert choose_k_basic(d2, delta) == k


def test_choose_k_basic_rejects():
    with pytest.raises(ParameterError):
        choose_k_basic(2, 0)
    with pytest.raises(ParameterError):
        choose_k_basic(1, 0.5)


@pytest.mark.parametrize(
    "family, alpha, delta, k",
    [("schatten", 2.0, 0.1, 200), ("schatten", 5.0, 1.0, 8), ("schatten", 1.5, 0.5, 32)],
)
def test_choose_k_general(family, alpha, delta, k):
    assert choose_k_general(banach_constants(family, alpha, 2), delta, 1.0) == k


def test_choose_k_general_gamma_15_rederived():
    # (2 delta^-gamma)^(1/(gamma-1)) with gamma = 1.5, delta = 0.5
    assert choose_k_general(banach_constants("schatten", 1.5, 2), 0.5, 1.0) == math.ceil((2 * 0.5**-1.5) ** 2 - 1e-9)


@pytest.mark.parametrize("d, l, delta, k", [(2, 2, 1.0, 25), (2, 3, 1.0, 57)])
def test_choose_k_multipartite(d, l, delta, k):
    assert choose_k_multipartite(d, l, delta) == k


def test_choose_k_multipartite_rejects_one_party():
    with pytest.raises(ParameterError):
        choose_k_multipartite(2, 1, 0.5)


def test_attained_delta_basic():
    assert attained_delta_basic(2, 7) == pytest.approx(math.sqrt(9 * math.log(2) / 7))
    assert attained_delta_basic(2, 7) == pytest.approx(0.94403, abs=1e-5)
    assert attained_delta_basic(4, 50) <= 0.5
    vals = [attained_delta_basic(3, k) for k in (1, 10, 100, 1000, 10**6)]
    assert all(a > b for a, b in zip(vals, vals[1:])) and vals[-1] < 0.01


@given(st.integers(2, 16), st.floats(0.05, 3.0))
def test_k_and_attained_delta_are_consistent(d2, delta):
    k = choose_k_basic(d2, delta)
    assert attained_delta_basic(d2, k) <= delta * (1 + 1e-9) or k == 1
    if k > 1:
        assert attained_delta_basic(d2, k - 1) > delta * (1 - 1e-9)


@given(st.floats(0.05, 2.0), st.sampled_from([1.5, 2.0, 3.0, 6.0]), st.floats(0.2, 2.0))
def test_general_consistency(delta, alpha, max_y):
    desc = banach_constants("schatten", alpha, 3)
    k = choose_k_general(desc, delta, max_y)
    assert attained_delta_general(desc, max_y, k) <= delta * (1 + 1e-9) or k == 1


@given(st.integers(2, 6), st.integers(2, 4), st.floats(0.3, 3.0))
def test_multipartite_consistency(d, l, delta):
    k = choose_k_multipartite(d, l, delta)
    assert attained_delta_multipartite(d, l, k) <= delta * (1 + 1e-9) or k == 1


@given(st.floats(1.0, 3.0), st.floats(1.2, 2.0), st.floats(0.2, 2.0))
def test_injective_consistency(C, gamma, delta):
    k = choose_k_injective(C, gamma, delta)
    assert attained_delta_injective(C, gamma, k) <= delta * (1 + 1e-9) or k == 1


@pytest.mark.parametrize("n, k, size", [(3, 2, 6), (1, 5, 1), (2, 3, 4)])
def test_net_size_and_enumeration(n, k, size):
    pts = list(enumerate_net(n, k))
    assert net_size(n, k) == size == len(pts)
    assert len({p.indices for p in pts}) == size


def test_single_outcome_net():
    (p,) = enumerate_net(1, 5)
    assert p.indices == (0, 0, 0, 0, 0)
    np.testing.assert_array_equal(p.probabilities(), [1.0])


@given(st.integers(1, 5), st.integers(1, 6))
def test_enumeration_is_colex_and_ranked(n, k):
    pts = list(enumerate_net(n, k))
    for r, p in enumerate(pts):
        assert p.rank() == r
        assert unrank(r, n, k) == p.indices
        assert list(p.indices) == sorted(p.indices)
    # colex: compare reversed tuples
    keys = [tuple(reversed(p.indices)) for p in pts]
    assert keys == sorted(keys)


@given(st.integers(1, 5), st.integers(1, 6), st.data())
def test_counts_block_matches_enumeration(n, k, data):
    total = net_size(n, k)
    start = data.draw(st.integers(0, total - 1))
    stop = data.draw(st.integers(start, total))
    pts = list(enumerate_net(n, k))[start:stop]
    block = counts_block(n, k, start, stop)
    assert block.shape == (stop - start, n)
    for row, p in zip(block, pts):
        np.testing.assert_array_equal(row, p.counts())
    assert np.all(block.sum(axis=1) == k)


def test_unrank_rejects_out_of_range():
    with pytest.raises(ParameterError):
        unrank(6, 3, 2)
    assert rank((0, 0)) == 0


def test_budget():
    with pytest.raises(BudgetExceeded) as e:
        list(enumerate_net(10, 10, budget=100, attained=lambda k: attained_delta_basic(2, k)))
    assert e.value.max_k == largest_affordable_k(10, 100, 10)
    assert net_size(10, e.value.max_k) <= 100 < net_size(10, e.value.max_k + 1)


@given(st.integers(2, 30), st.integers(1, 10**6))
def test_largest_affordable_k(n, budget):
    k = largest_affordable_k(n, budget)
    if n > budget:
        assert k == 0
    else:
        assert net_size(n, k) <= budget < net_size(n, k + 1)


def test_largest_affordable_k_one_outcome():
    assert largest_affordable_k(1, 5, 40) == 40
    with pytest.raises(ParameterError):
        largest_affordable_k(1, 5)


def test_spec_caps_and_reports():
    spec = net_spec_basic(20, 2, 0.1, budget=10**4)
    assert spec.capped and spec.size <= 10**4
    assert spec.attained_delta == pytest.approx(attained_delta_basic(2, spec.k))
    assert spec.attained_delta > 0.1
    free = net_spec_basic(2, 2, 0.5)
    assert not free.capped and free.k == choose_k_basic(2, 0.5)
