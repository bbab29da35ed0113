import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_column
from nitrosearch.core import MAX_SENTINEL, SortedColumn, build_column, oracle_search
from nitrosearch.sorted_search import (
    BinarySearchConfig, binary_search, binary_search_batch, branch_by_key_ranges, build_kary,
    count_less, count_less_vector, kary_search, kary_search_batch,
)
from nitrosearch.trace import SearchStats

unique_keys = st.lists(st.integers(0, MAX_SENTINEL - 1), unique=True, max_size=300).map(sorted)


def col_of(keys):
    return SortedColumn(np.array(keys, dtype=np.uint32), np.arange(len(keys), dtype=np.uint32) * 3 + 1)


def steps_of(fn, *args):
    stats = SearchStats()
    result = fn(*args, trace=stats)
    return result, stats


# -- branch_by_key_ranges ---------------------------------------------------------

@pytest.mark.parametrize("key,expected", [(5, 0), (35, 3), (10, 0), (25, 2), (20, 1), (30, 2)])
def test_branch_examples(key, expected):
    assert branch_by_key_ranges([10, 20, 30], key) == expected


@given(st.lists(st.integers(0, 1000), max_size=40).map(sorted), st.integers(0, 1001))
def test_branch_counts_strictly_smaller(node, key):
    expected = sum(1 for k in node if k < key)
    assert branch_by_key_ranges(node, key) == expected
    # the linear and bisecting node searches agree
    assert count_less(node, 0, len(node), key, linear_max=0) == expected
    assert count_less(node, 0, len(node), key, linear_max=100) == expected
    assert count_less_vector(np.array(node, dtype=np.int64), 0, len(node), key) == expected


# -- binary search ---------------------------------------------------------------

def test_binary_empty():
    assert not binary_search(build_column([]), 3).found


def test_binary_fifteen_keys_four_steps():
    col = dense_column(15)
    cfg = BinarySearchConfig(linear_cutoff=1)
    for key in col.keys.tolist():
        result, stats = steps_of(binary_search, col, key, cfg)
        assert result.found
        assert stats.steps == 4


def test_cutoff_must_be_positive():
    with pytest.raises(ValueError):
        BinarySearchConfig(0)


@given(unique_keys, st.lists(st.integers(0, 2**32 - 1), max_size=30), st.integers(1, 20))
def test_binary_matches_oracle_for_any_cutoff(keys, extra, cutoff):
    col = col_of(keys)
    cfg = BinarySearchConfig(cutoff)
    bound = math.ceil(math.log2(col.n + 1)) if col.n else 0
    for key in keys + extra:
        result, stats = steps_of(binary_search, col, key, cfg)
        assert result == oracle_search(col, key)
        assert result == binary_search(col, key, BinarySearchConfig(1))
        assert stats.steps <= bound


def test_binary_random_column_against_oracle(column_factory, probes):
    col = column_factory(4096)
    keys = probes(col, 1000)
    found, values = binary_search_batch(col, keys)
    for key, f, v in zip(keys, found, values):
        expected = oracle_search(col, key)
        assert binary_search(col, key) == expected
        assert (bool(f), int(v)) == ((True, expected.value) if expected.found else (False, -1))


def test_binary_duplicates_return_first_match():
    col = build_column([(4, 1), (4, 2), (4, 3), (9, 4)])
    assert binary_search(col, 4) == (True, 1)


# -- k-ary linearized tree -------------------------------------------------------

def inorder(t):
    """In-order walk of the breadth-first (k+1)-ary tree, sentinels skipped."""
    k, m = t.k, t.k + 1
    out = []

    def walk(node, level):
        if level == t.depth:
            return
        for j in range(k + 1):
            walk(node * m + j + 1, level + 1)
            if j < k:
                slot = node * k + j
                if t.perm[slot] >= 0:
                    out.append(int(t.keys[slot]))
    walk(0, 0)
    return out


def test_kary_fifteen_keys_three_separators():
    col = dense_column(15)
    t = build_kary(col, k=3)
    assert t.depth == 2 and t.fanout == 4
    assert t.perm[:3].tolist() == [3, 7, 11]
    assert sorted(t.perm[3:].tolist()) == [p for p in range(15) if p not in (3, 7, 11)]
    for key in col.keys.tolist():
        result, stats = steps_of(kary_search, t, col, key)
        assert result.found and stats.steps == 2


def test_kary_empty_is_one_sentinel_root():
    t = build_kary(build_column([]), k=4)
    assert t.depth == 1 and t.keys.tolist() == [MAX_SENTINEL] * 4
    assert not kary_search(t, build_column([]), 0).found


@given(unique_keys, st.integers(1, 8))
def test_kary_layout_invariants(keys, k):
    col = col_of(keys)
    t = build_kary(col, k)
    m = k + 1
    assert t.keys.shape[0] == (m**t.depth - 1)
    assert m**t.depth - 1 >= col.n and (t.depth == 1 or m ** (t.depth - 1) - 1 < col.n)
    assert inorder(t) == keys
    real = t.perm[t.perm >= 0]
    assert sorted(real.tolist()) == list(range(col.n))
    assert (t.keys[t.perm < 0] == MAX_SENTINEL).all()
    for node in range(t.node_count):
        seps = t.node_keys(node)
        assert (np.diff(seps.astype(np.int64)) >= 0).all()


@given(unique_keys, st.lists(st.integers(0, 2**32 - 1), max_size=30), st.integers(1, 8))
def test_kary_matches_oracle_scalar_and_vector(keys, extra, k):
    col = col_of(keys)
    t = build_kary(col, k)
    queries = keys + extra
    found, values = kary_search_batch(t, col, queries)
    for key, f, v in zip(queries, found, values):
        expected = oracle_search(col, key)
        scalar, s1 = steps_of(kary_search, t, col, key)
        vector, s2 = steps_of(lambda *a, trace: kary_search(*a, trace=trace, vectorized=True), t, col, key)
        assert scalar == vector == expected
        assert s1.branches == s2.branches
        if key < MAX_SENTINEL:
            assert s1.steps == t.depth == (math.ceil(math.log(col.n + 1, k + 1) - 1e-12) if col.n else 1)
        assert bool(f) == expected.found and (not f or v == expected.value)


@pytest.mark.parametrize("k,depth", [(3, 3), (4, 3), (1, 6), (7, 2)])
def test_each_step_keeps_at_most_a_fanout_share(k, depth):
    """Full trees: after step i at most ceil(n / (k+1)**i) candidates remain."""
    m = k + 1
    n = m**depth - 1
    col = dense_column(n)
    t = build_kary(col, k)
    for key in col.keys.tolist()[::7] + [0, int(col.keys[-1]) + 1]:
        lo, hi = 0, n - 1
        node = 0
        for i in range(1, t.depth + 1):
            start = node * k
            b = branch_by_key_ranges(t.node_keys(node), key)
            if b > 0:
                lo = max(lo, int(t.perm[start + b - 1]) + 1)
            if b < k:
                hi = min(hi, int(t.perm[start + b]))
            assert hi - lo + 1 <= math.ceil(n / m**i)
            node = node * m + b + 1
