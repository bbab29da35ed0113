"""Searches over a sorted array or a reordered copy of one.

Binary search narrows a window of candidate insertion positions, so the
result is always the first position whose key is >= the query (the lower
bound). k-ary search runs over a linearized complete (k+1)-ary tree whose
nodes hold k consecutive separators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NOT_FOUND, SearchResult
from .validation import MAX_SENTINEL, check_positive_int

KEY_BYTES = 4
DEFAULT_CUTOFF = 8
DEFAULT_K = 4
LINEAR_NODE_MAX = 8
"""Nodes with at most this many keys are scanned linearly, larger ones bisected."""


# -- branching inside one node -----------------------------------------------

def count_less(seq, start, count, key, trace=None, region=None, base=0, linear_max=LINEAR_NODE_MAX):
    """Number of ``seq[start:start+count]`` entries strictly below ``key``.

    ``seq`` must be ascending over that range. ``base`` is the byte offset of
    ``seq[start]`` inside ``region``, used only for tracing.
    """
    if count <= linear_max:
        for i in range(count):
            if trace is not None:
                trace.compare()
                trace.touch(region, base + i * KEY_BYTES)
            if seq[start + i] >= key:
                return i
        return count
    lo, hi = 0, count
    while lo < hi:
        mid = (lo + hi) >> 1
        if trace is not None:
            trace.compare()
            trace.touch(region, base + mid * KEY_BYTES)
        if seq[start + mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def count_less_vector(arr, start, count, key, trace=None, region=None, base=0):
    """Same as :func:`count_less`, comparing the whole node at once."""
    if trace is not None:
        trace.compare(count)
        trace.touch(region, base, count * KEY_BYTES)
    return int(np.count_nonzero(arr[start:start + count] < key))


def branch_by_key_ranges(node_keys, key, linear_max=LINEAR_NODE_MAX):
    """Child index for ``key``: how many node keys are strictly smaller.

    Equal keys route to the left child, matching separators that hold the
    maximum key of their left subtree.
    """
    return count_less(node_keys, 0, len(node_keys), key, linear_max=linear_max)


# -- binary search -------------------------------------------------------------

@dataclass(frozen=True)
class BinarySearchConfig:
    linear_cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        check_positive_int(self.linear_cutoff, "linear_cutoff")


def narrow(keys, key, lo, hi, cutoff, trace=None, region="column.keys"):
    """Lower bound of ``key`` given that it lies in positions ``lo..hi``.

    ``hi`` may equal ``len(keys)`` (past the end). The window is halved
    while it holds more than ``cutoff`` candidates, then scanned forward.
    """
    while hi - lo + 1 > cutoff:
        mid = (lo + hi) >> 1
        if trace is not None:
            trace.step()
            trace.compare()
            trace.touch(region, mid * KEY_BYTES)
        if key > keys[mid]:
            lo = mid + 1
        else:
            hi = mid
    for i in range(lo, hi):
        if trace is not None:
            trace.compare()
            trace.touch(region, i * KEY_BYTES)
        if keys[i] >= key:
            return i
    return hi


def _finish(col, pos, key, trace):
    if pos >= col.n:
        return NOT_FOUND
    if trace is not None:
        trace.compare()
        trace.touch("column.keys", pos * KEY_BYTES)
    if col.key_view[pos] != key:
        return NOT_FOUND
    if trace is not None:
        trace.touch("column.values", pos * KEY_BYTES, value=True)
    return SearchResult(True, col.value_view[pos])


def binary_search(col, key, cfg=None, trace=None):
    """Cutoff binary search over ``col``; returns the first match."""
    cutoff = DEFAULT_CUTOFF if cfg is None else cfg.linear_cutoff
    if col.n == 0 or key >= MAX_SENTINEL:
        return NOT_FOUND
    pos = narrow(col.key_view, key, 0, col.n, cutoff, trace)
    return _finish(col, pos, key, trace)


def resume_binary_search(col, key, lo, hi, cfg=None, trace=None):
    """Continue a binary search whose candidate window is already ``lo..hi``."""
    cutoff = DEFAULT_CUTOFF if cfg is None else cfg.linear_cutoff
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    pos = narrow(col.key_view, key, lo, hi, cutoff, trace)
    return _finish(col, pos, key, trace)


def _gather(col, queries, pos):
    n = col.n
    found = pos < n
    safe = np.minimum(pos, max(n - 1, 0))
    if n:
        found &= col.keys[safe] == queries
        values = np.where(found, col.values[safe].astype(np.int64), -1)
    else:
        values = np.full(queries.shape[0], -1, dtype=np.int64)
    return found, values


def binary_search_batch(col, queries):
    """Vectorized lower-bound search for many queries at once.

    Returns ``(found, values)`` with ``-1`` in ``values`` for misses.
    """
    q = np.asarray(queries, dtype=np.int64)
    lo = np.zeros(q.shape[0], dtype=np.int64)
    hi = np.full(q.shape[0], col.n, dtype=np.int64)
    keys = col.keys.astype(np.int64)
    while True:
        active = lo < hi
        if not active.any():
            break
        mid = (lo + hi) >> 1
        probe = np.where(active, keys[np.minimum(mid, max(col.n - 1, 0))] if col.n else 0, 0)
        go_right = active & (q > probe)
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(active & ~go_right, mid, hi)
    return _gather(col, q, lo)


# -- k-ary search over a linearized tree -----------------------------------------

@dataclass(frozen=True, eq=False)
class KaryLinearizedTree:
    """Complete (k+1)-ary search tree stored breadth first in one array.

    ``perm[slot]`` is the sorted position held in ``slot``, or -1 for padding.
    """

    k: int
    depth: int
    n: int
    keys: np.ndarray
    perm: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "view", memoryview(self.keys))

    @property
    def fanout(self):
        return self.k + 1

    @property
    def node_count(self):
        m = self.fanout
        return (m**self.depth - 1) // (m - 1)

    def node_keys(self, node):
        return self.keys[node * self.k:(node + 1) * self.k]


def _inorder_ranks(k, depth):
    """In-order rank of every breadth-first slot of a complete (k+1)-ary tree."""
    m = k + 1
    ranks = np.empty(m**depth - 1, dtype=np.int64)
    sep = np.arange(1, k + 1, dtype=np.int64)
    for level in range(depth):
        subtree = m ** (depth - level) - 1
        child = m ** (depth - level - 1) - 1
        q = np.arange(m**level, dtype=np.int64)
        level_ranks = q[:, None] * (subtree + 1) + sep[None, :] * (child + 1) - 1
        first = (m**level - 1) // (m - 1) * k
        ranks[first:first + level_ranks.size] = level_ranks.ravel()
    return ranks


def build_kary(col, k=DEFAULT_K):
    """Reorder ``col.keys`` into a linearized (k+1)-ary tree."""
    k = check_positive_int(k, "k")
    m = k + 1
    depth = 1
    while m**depth - 1 < col.n:
        depth += 1
    ranks = _inorder_ranks(k, depth)
    real = ranks < col.n
    keys = np.full(ranks.shape[0], MAX_SENTINEL, dtype=np.uint32)
    keys[real] = col.keys[ranks[real]]
    perm = np.where(real, ranks, -1)
    keys.setflags(write=False)
    perm.setflags(write=False)
    return KaryLinearizedTree(k=k, depth=depth, n=col.n, keys=keys, perm=perm)


def kary_search(t, col, key, trace=None, vectorized=False):
    """Descend all levels of ``t`` and check the tightest separator >= key."""
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    k, m = t.k, t.k + 1
    view = t.view
    node = 0
    cand = -1
    for _ in range(t.depth):
        start = node * k
        if trace is not None:
            trace.step()
        if vectorized:
            b = count_less_vector(t.keys, start, k, key, trace, "kary.keys", start * KEY_BYTES)
        else:
            b = count_less(view, start, k, key, trace, "kary.keys", start * KEY_BYTES)
        if trace is not None:
            trace.branch(b)
        if b < k:
            cand = start + b
        node = node * m + b + 1
    if cand < 0:
        return NOT_FOUND
    if trace is not None:
        trace.compare()
        trace.touch("kary.keys", cand * KEY_BYTES)
    if view[cand] != key:
        return NOT_FOUND
    pos = int(t.perm[cand])
    if trace is not None:
        trace.touch("kary.perm", cand * 8)
        trace.touch("column.values", pos * KEY_BYTES, value=True)
    return SearchResult(True, col.value_view[pos])


def kary_search_batch(t, col, queries):
    q = np.asarray(queries, dtype=np.int64)
    k, m = t.k, t.k + 1
    node = np.zeros(q.shape[0], dtype=np.int64)
    cand = np.full(q.shape[0], -1, dtype=np.int64)
    keys = t.keys.astype(np.int64)
    offs = np.arange(k, dtype=np.int64)
    for _ in range(t.depth):
        start = node * k
        seps = keys[start[:, None] + offs[None, :]]
        b = np.count_nonzero(seps < q[:, None], axis=1)
        cand = np.where(b < k, start + b, cand)
        node = node * m + b + 1
    hit = cand >= 0
    safe = np.maximum(cand, 0)
    # padding slots hold the sentinel, which a sentinel query would otherwise match
    hit &= (keys[safe] == q) & (t.perm[safe] >= 0)
    pos = np.where(hit, t.perm[safe], 0)
    values = np.where(hit, col.values[pos].astype(np.int64) if col.n else -1, -1)
    return hit, values
