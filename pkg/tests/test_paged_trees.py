import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import dense_column
from nitrosearch.core import MAX_SENTINEL, SortedColumn, build_column, oracle_search
from nitrosearch.paged_trees import (
    BPlusInternal, build_bplus, build_csb, build_css, css_child, css_from_bytes, css_leaf_blocks,
    css_level_of, css_min_depth, css_search, css_search_batch, css_search_from, css_to_bytes,
)
from nitrosearch.trace import SearchStats
from reference_trees import full_reference_tree, reference_descent

unique_keys = st.lists(st.integers(0, MAX_SENTINEL - 1), unique=True, max_size=400).map(sorted)
geometry = st.tuples(st.integers(2, 20), st.integers(1, 20))


def col_of(keys):
    return SortedColumn(np.array(keys, dtype=np.uint32), np.arange(len(keys), dtype=np.uint32) + 7)


def branches(search, *args):
    stats = SearchStats()
    result = search(*args, trace=stats)
    return result, stats.branches


# -- CSS-tree --------------------------------------------------------------------

def test_css_empty():
    t = build_css(build_column([]), 4, 4)
    assert t.depth == 0 and t.node_count == 0 and t.internal.shape == (0, 3)
    assert not css_search(t, t.col, 5).found


def test_css_single_node_separators():
    col = dense_column(16)
    t = build_css(col, f=4, Lc=4)
    assert t.depth == 1
    assert t.internal.tolist() == [[int(col.keys[3]), int(col.keys[7]), int(col.keys[11])]]


def test_css_node_count_closed_form():
    t = build_css(dense_column(5), f=4, Lc=1, depth=3)
    assert t.node_count == 21 == t.internal.shape[0]
    with pytest.raises(ValueError, match="shallow"):
        build_css(dense_column(100), f=2, Lc=1, depth=2)


def test_child_arithmetic_examples():
    assert css_child(0, 4, 2) == 3
    assert css_child(3, 4, 0) == 13
    assert [css_level_of(i, 4) for i in (0, 1, 4, 5, 20, 21)] == [0, 1, 1, 2, 2, 3]


@given(st.integers(0, 3000), st.integers(2, 40), st.integers(1, 70))
def test_css_depth_is_minimal(n, f, Lc):
    d = css_min_depth(n, f, Lc)
    assert Lc * f**d >= n
    assert d == 0 or Lc * f ** (d - 1) < n


@pytest.mark.parametrize("f", [2, 4, 16])
@pytest.mark.parametrize("depth", [1, 2, 3])
def test_css_arithmetic_matches_pointer_tree(f, depth):
    """Every descent visits the same breadth-first ids as an explicit pointer tree."""
    Lc = 2
    n = max(1, Lc * f**depth - 3)
    col = dense_column(n, step=3, start=2)
    t = build_css(col, f, Lc, depth=depth)
    ref = full_reference_tree(col, f, Lc, depth)
    for key in range(0, 3 * n + 4):
        ids, ref_branches, block = reference_descent(ref, key)
        result, path = branches(css_search, t, col, key)
        node, seen = 0, [0]
        for b in path:
            node = css_child(node, f, b)
            seen.append(node)
        assert path == ref_branches
        assert seen == ids
        assert node - t.node_count == block
        assert result == oracle_search(col, key)


@given(unique_keys, geometry)
def test_css_separator_ordering(keys, geo):
    f, Lc = geo
    col = col_of(keys)
    t = build_css(col, f, Lc)
    # every real key routes into the block that holds it
    blocks = css_leaf_blocks(t, keys)
    positions = np.arange(len(keys))
    assert (blocks == positions // Lc).all()
    for node in range(t.node_count):
        seps = t.internal[node].astype(np.int64)
        assert (np.diff(seps) >= 0).all()


@given(unique_keys, st.lists(st.integers(0, 2**32 - 1), max_size=30), geometry)
def test_all_trees_match_oracle(keys, extra, geo):
    f, Lc = geo
    col = col_of(keys)
    css, bp, csb = build_css(col, f, Lc), build_bplus(col, f, Lc), build_csb(col, f, Lc)
    queries = keys + extra
    found, values = css_search_batch(css, col, queries)
    for key, hit, v in zip(queries, found, values):
        expected = oracle_search(col, key)
        assert css.search(key) == bp.search(key) == csb.search(key) == expected
        assert bool(hit) == expected.found and (not hit or v == expected.value)


@given(unique_keys.filter(bool), geometry, st.data())
def test_branch_sequences_agree_up_to_the_largest_key(keys, geo, data):
    f, Lc = geo
    col = col_of(keys)
    css, bp, csb = build_css(col, f, Lc), build_bplus(col, f, Lc), build_csb(col, f, Lc)
    probes = keys + data.draw(st.lists(st.integers(0, keys[-1]), max_size=20))
    for key in probes:
        _, a = branches(css.search, key)
        _, b = branches(bp.search, key)
        _, c = branches(csb.search, key)
        assert a == b == c


def test_resume_from_any_node(column_factory):
    col = column_factory(3000)
    t = build_css(col, 5, 7)
    for key in col.keys.tolist()[::37] + [1, 2**31]:
        expected = css_search(t, col, key)
        _, path = branches(css_search, t, col, key)
        node = 0
        for level, b in enumerate(path):
            assert css_search_from(t, col, key, node, level) == expected
            node = css_child(node, t.f, b)
        assert css_search_from(t, col, key, node, t.depth) == expected


def test_css_serialization(tmp_path):
    col = dense_column(1000)
    t = build_css(col, 16, 8)
    raw = css_to_bytes(t)
    assert raw[:4] == b"CSS1"
    internal = t.node_count * (t.f - 1) * 4
    assert len(raw) == 24 + internal + 12 + col.n * 8
    back = css_from_bytes(raw)
    assert (back.f, back.Lc, back.depth, back.n) == (16, 8, t.depth, 1000)
    assert np.array_equal(back.internal, t.internal) and back.col == col
    assert t.internal_bytes == internal
    with pytest.raises(ValueError, match="magic"):
        css_from_bytes(b"XXXX" + raw[4:])


def test_sentinel_never_matches(column_factory):
    col = column_factory(100)
    for t in (build_css(col, 3, 7), build_bplus(col, 3, 7), build_csb(col, 3, 7)):
        assert not t.search(MAX_SENTINEL).found


def test_geometry_is_validated():
    col = dense_column(4)
    for build in (build_css, build_bplus, build_csb):
        with pytest.raises(ValueError):
            build(col, 1, 4)
        with pytest.raises(ValueError):
            build(col, 4, 0)


# -- B+-tree and CSB+-tree ---------------------------------------------------------

def test_bplus_empty_is_single_leaf():
    t = build_bplus(build_column([]), 4, 4)
    assert t.depth == 0 and t.root.keys == [] and not t.search(3).found


def test_bplus_small_shape():
    col = dense_column(8)
    t = build_bplus(col, f=3, Lc=2)
    assert len(t.leaves) == 4 and t.depth == 2
    chain, leaf = [], t.leaves[0]
    while leaf is not None:
        chain.extend(leaf.keys)
        leaf = leaf.next
    assert chain == col.keys.tolist()
    # separators are the largest key of the subtree on their left
    assert t.root.keys == [int(col.keys[5])]
    assert t.root.children[0].keys == [int(col.keys[1]), int(col.keys[3])]


def subtree_max(node):
    while isinstance(node, BPlusInternal):
        node = node.children[-1]
    return node.keys[-1]


@given(unique_keys.filter(bool), geometry)
def test_bplus_invariants(keys, geo):
    f, Lc = geo
    t = build_bplus(col_of(keys), f, Lc)
    assert [k for leaf in t.leaves for k in leaf.keys] == keys
    assert all(len(leaf.keys) == Lc for leaf in t.leaves[:-1])
    for level in t.levels[:-1]:
        for node in level:
            assert len(node.children) == len(node.keys) + 1 <= f
            assert node.keys == [subtree_max(c) for c in node.children[:-1]]


@given(unique_keys.filter(bool), geometry)
def test_csb_children_are_contiguous(keys, geo):
    f, Lc = geo
    t = build_csb(col_of(keys), f, Lc)
    assert [k for leaf in t.levels[-1] for k in leaf.keys] == keys
    for level in range(t.depth):
        expected_first = 0
        for node in t.levels[level]:
            # each node's group starts where the previous group ended
            assert node.first_child == expected_first
            expected_first += len(node.keys) + 1
            for b in range(len(node.keys) + 1):
                assert t.child(level, node, b) is t.levels[level + 1][node.first_child + b]
        assert expected_first == len(t.levels[level + 1])


def test_node_sizes():
    col = dense_column(10)
    assert build_bplus(col, 16, 64).internal_node_bytes == 15 * 4 + 16 * 4
    assert build_csb(col, 16, 64).internal_node_bytes == 15 * 4 + 4
    css = build_css(col, 16, 64)
    assert css.node_bytes == 60 and css.node_stride_bytes == 64
