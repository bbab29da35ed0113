"""Paged tree indexes bulk-built from a :class:`SortedColumn`.

All three trees share one logical shape: leaf blocks of ``Lc`` pairs packed
left to right, internal nodes of up to ``f - 1`` separators, each separator
the largest key of the subtree to its left. They differ only in how children
are located:

* ``BPlusTree`` stores one reference per child and links its leaves,
* ``CssTree`` stores no references and computes ``node * f + branch + 1``,
* ``CsbTree`` stores one reference per node, to a contiguous child group.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import NOT_FOUND, SearchResult, column_bytes, parse_column
from .sorted_search import KEY_BYTES, count_less
from .validation import MAX_SENTINEL, check_positive_int

DEFAULT_FANOUT = 16
DEFAULT_LEAF = 64
POINTER_BYTES = 4
"""Child references are modelled as 32-bit, as in the classic space argument."""


def pow2ceil(x):
    return 1 if x <= 1 else 1 << (x - 1).bit_length()


def _check_geometry(f, Lc):
    f = check_positive_int(f, "f", minimum=2)
    Lc = check_positive_int(Lc, "Lc")
    return f, Lc


def _leaf_lookup(keys, values, start, count, key, trace, region, base, value_base):
    """Exact search inside one leaf block; shared by every tree."""
    if trace is not None:
        trace.step()
    pos = count_less(keys, start, count, key, trace, region, base)
    if pos == count:
        return NOT_FOUND
    if trace is not None:
        trace.compare()
        trace.touch(region, base + pos * KEY_BYTES)
    if keys[start + pos] != key:
        return NOT_FOUND
    if trace is not None:
        trace.touch(region, value_base + pos * KEY_BYTES, value=True)
    return SearchResult(True, values[start + pos])


# -- CSS-tree ----------------------------------------------------------------

def css_min_depth(n, f, Lc):
    """Smallest d with ``Lc * f**d >= n``."""
    d = 0
    while Lc * f**d < n:
        d += 1
    return d


@dataclass(frozen=True, eq=False)
class CssTree:
    """Full f-ary tree of separators in one breadth-first array.

    Leaves are the column itself, split into ``f**depth`` logical blocks of
    ``Lc`` positions; blocks past ``n`` are implicit padding.
    """

    f: int
    Lc: int
    depth: int
    n: int
    internal: np.ndarray
    col: object

    def __post_init__(self):
        object.__setattr__(self, "view", memoryview(self.internal.reshape(-1)))

    @property
    def node_count(self):
        return (self.f**self.depth - 1) // (self.f - 1)

    @property
    def leaf_count(self):
        return self.f**self.depth

    @property
    def node_bytes(self):
        return (self.f - 1) * KEY_BYTES

    @property
    def node_stride_bytes(self):
        """Modelled distance between nodes; a power of two so no node straddles a line."""
        return pow2ceil(self.node_bytes)

    @property
    def internal_bytes(self):
        return self.node_count * self.node_bytes

    def node_keys(self, node):
        return self.internal[node]

    def search(self, key, trace=None):
        return css_search(self, self.col, key, trace)


def build_css(col, f=DEFAULT_FANOUT, Lc=DEFAULT_LEAF, depth=None):
    """Bulk-build a CSS-tree.

    ``depth`` forces extra (padding) levels; it must be at least the minimum.
    """
    f, Lc = _check_geometry(f, Lc)
    d = css_min_depth(col.n, f, Lc)
    if depth is not None:
        if depth < d:
            raise ValueError(f"depth {depth} is too shallow; at least {d} levels are needed")
        d = depth
    n = col.n
    internal = np.empty(((f**d - 1) // (f - 1), f - 1), dtype=np.uint32)
    sep = np.arange(1, f, dtype=np.int64)
    keys = col.keys
    for level in range(d):
        span = f ** (d - level - 1)  # leaf blocks under one child
        q = np.arange(f**level, dtype=np.int64)
        last = (q[:, None] * f * span + sep[None, :] * span) * Lc - 1
        real = last < n
        seps = np.full(last.shape, MAX_SENTINEL, dtype=np.uint32)
        if n:
            seps[real] = keys[last[real]]
        first = (f**level - 1) // (f - 1)
        internal[first:first + q.shape[0]] = seps
    internal.setflags(write=False)
    return CssTree(f=f, Lc=Lc, depth=d, n=n, internal=internal, col=col)


def css_child(node, f, branch):
    return node * f + branch + 1


def css_level_of(node, f):
    """Depth of breadth-first node ``node`` in a full f-ary tree."""
    level, first = 0, 0
    while node >= first + f**level:
        first += f**level
        level += 1
    return level


def css_search(t, col, key, trace=None):
    return css_search_from(t, col, key, 0, 0, trace)


def css_search_from(t, col, key, node, level, trace=None):
    """Resume a CSS descent at breadth-first ``node`` on ``level``.

    ``node`` may already address a leaf (``level == t.depth``).
    """
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    f, f1 = t.f, t.f - 1
    view, stride = t.view, t.node_stride_bytes
    for _ in range(level, t.depth):
        if trace is not None:
            trace.step()
        b = count_less(view, node * f1, f1, key, trace, "css.internal", node * stride)
        if trace is not None:
            trace.branch(b)
        node = node * f + b + 1
    start = (node - t.node_count) * t.Lc
    if start >= col.n:
        if trace is not None:
            trace.step()
        return NOT_FOUND
    count = min(t.Lc, col.n - start)
    return _leaf_lookup(col.key_view, col.value_view, start, count, key, trace,
                        "column.keys", start * KEY_BYTES, start * KEY_BYTES)


def css_leaf_blocks(t, queries):
    """Leaf block reached by each query (vectorized descent)."""
    q = np.asarray(queries, dtype=np.int64)
    node = np.zeros(q.shape[0], dtype=np.int64)
    internal = t.internal.astype(np.int64)
    for _ in range(t.depth):
        b = np.count_nonzero(internal[node] < q[:, None], axis=1)
        node = node * t.f + b + 1
    return node - t.node_count


def css_search_batch(t, col, queries):
    q = np.asarray(queries, dtype=np.int64)
    return _leaf_batch(col, q, css_leaf_blocks(t, q), t.Lc)


def _leaf_batch(col, q, block, Lc):
    n = col.n
    start = block * Lc
    end = np.minimum(start + Lc, n)
    pos = np.searchsorted(col.keys, q, side="left")
    # a match is only legal inside the reached block
    found = (pos < end) & (pos >= start)
    if n:
        found &= col.keys[np.minimum(pos, n - 1)] == q
        values = np.where(found, col.values[np.minimum(pos, n - 1)].astype(np.int64), -1)
    else:
        values = np.full(q.shape[0], -1, dtype=np.int64)
    return found, values


_CSS_HEADER = struct.Struct("<4sIIIQ")
CSS_MAGIC = b"CSS1"


def css_to_bytes(t):
    """Serialize: header, packed little-endian separators, then the column file."""
    header = _CSS_HEADER.pack(CSS_MAGIC, t.f, t.Lc, t.depth, t.n)
    return header + t.internal.astype("<u4").tobytes() + column_bytes(t.col)


def css_from_bytes(buf):
    buf = memoryview(buf)
    magic, f, Lc, d, n = _CSS_HEADER.unpack_from(buf)
    if magic != CSS_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {CSS_MAGIC!r}")
    nodes = (f**d - 1) // (f - 1)
    start = _CSS_HEADER.size
    end = start + nodes * (f - 1) * KEY_BYTES
    internal = np.frombuffer(buf[start:end], dtype="<u4").astype(np.uint32).reshape(nodes, f - 1)
    col = parse_column(buf[end:])
    if col.n != n:
        raise ValueError("column length does not match header")
    internal.setflags(write=False)
    return CssTree(f=f, Lc=Lc, depth=d, n=n, internal=internal, col=col)


# -- B+-tree -------------------------------------------------------------------

class BPlusLeaf:
    __slots__ = ("keys", "values", "next", "offset")

    def __init__(self, keys, values):
        self.keys = keys
        self.values = values
        self.next = None
        self.offset = 0


class BPlusInternal:
    __slots__ = ("keys", "children", "offset")

    def __init__(self, keys, children):
        self.keys = keys
        self.children = children
        self.offset = 0


def _pack_leaves(col, Lc):
    keys = col.keys.tolist()
    values = col.values.tolist()
    blocks = [(keys[i:i + Lc], values[i:i + Lc]) for i in range(0, col.n, Lc)]
    return blocks or [([], [])]


@dataclass(eq=False)
class BPlusTree:
    root: object
    levels: list
    f: int
    Lc: int
    n: int

    @property
    def depth(self):
        """Number of internal levels."""
        return len(self.levels) - 1

    @property
    def leaves(self):
        return self.levels[-1]

    @property
    def internal_node_bytes(self):
        return (self.f - 1) * KEY_BYTES + self.f * POINTER_BYTES

    @property
    def leaf_bytes(self):
        return self.Lc * 2 * KEY_BYTES + POINTER_BYTES

    def search(self, key, trace=None):
        return bplus_search(self, key, trace)


def build_bplus(col, f=DEFAULT_FANOUT, Lc=DEFAULT_LEAF):
    f, Lc = _check_geometry(f, Lc)
    leaves = [BPlusLeaf(k, v) for k, v in _pack_leaves(col, Lc)]
    for a, b in zip(leaves, leaves[1:]):
        a.next = b
    for i, leaf in enumerate(leaves):
        leaf.offset = i * (Lc * 2 * KEY_BYTES + POINTER_BYTES)
    levels = [leaves]
    level = leaves
    maxes = [leaf.keys[-1] if leaf.keys else MAX_SENTINEL for leaf in leaves]
    while len(level) > 1:
        parents, parent_max = [], []
        for i in range(0, len(level), f):
            width = min(f, len(level) - i)
            parents.append(BPlusInternal(maxes[i:i + width - 1], level[i:i + width]))
            parent_max.append(maxes[i + width - 1])
        level, maxes = parents, parent_max
        levels.insert(0, level)
    offset = 0
    node_bytes = (f - 1) * KEY_BYTES + f * POINTER_BYTES
    for lvl in levels[:-1]:
        for node in lvl:
            node.offset = offset
            offset += node_bytes
    return BPlusTree(root=levels[0][0], levels=levels, f=f, Lc=Lc, n=col.n)


def bplus_search(t, key, trace=None):
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    node = t.root
    ptr_base = (t.f - 1) * KEY_BYTES
    while type(node) is BPlusInternal:
        if trace is not None:
            trace.step()
        b = count_less(node.keys, 0, len(node.keys), key, trace, "bplus.internal", node.offset)
        if trace is not None:
            trace.branch(b)
            trace.touch("bplus.internal", node.offset + ptr_base + b * POINTER_BYTES)
        node = node.children[b]
    return _leaf_lookup(node.keys, node.values, 0, len(node.keys), key, trace,
                        "bplus.leaves", node.offset, node.offset + t.Lc * KEY_BYTES)


# -- CSB+-tree -----------------------------------------------------------------

class CsbNode:
    """Internal node: separators plus the slot of its first child in the level below."""

    __slots__ = ("keys", "first_child", "offset")

    def __init__(self, keys, first_child):
        self.keys = keys
        self.first_child = first_child
        self.offset = 0


class CsbLeaf:
    __slots__ = ("keys", "values", "offset")

    def __init__(self, keys, values):
        self.keys = keys
        self.values = values
        self.offset = 0


@dataclass(eq=False)
class CsbTree:
    """``levels[i]`` is one contiguous allocation holding every node of level i.

    The children of a node occupy ``levels[i + 1][first_child:first_child + len(keys) + 1]``.
    """

    levels: list
    f: int
    Lc: int
    n: int

    @property
    def depth(self):
        return len(self.levels) - 1

    @property
    def root(self):
        return self.levels[0][0]

    @property
    def internal_node_bytes(self):
        return (self.f - 1) * KEY_BYTES + POINTER_BYTES

    def child(self, level, node, branch):
        return self.levels[level + 1][node.first_child + branch]

    def search(self, key, trace=None):
        return csb_search(self, key, trace)


def build_csb(col, f=DEFAULT_FANOUT, Lc=DEFAULT_LEAF):
    f, Lc = _check_geometry(f, Lc)
    leaves = [CsbLeaf(k, v) for k, v in _pack_leaves(col, Lc)]
    for i, leaf in enumerate(leaves):
        leaf.offset = i * Lc * 2 * KEY_BYTES
    levels = [leaves]
    maxes = [leaf.keys[-1] if leaf.keys else MAX_SENTINEL for leaf in leaves]
    count = len(leaves)
    while count > 1:
        parents, parent_max = [], []
        for i in range(0, count, f):
            width = min(f, count - i)
            parents.append(CsbNode(maxes[i:i + width - 1], i))
            parent_max.append(maxes[i + width - 1])
        levels.insert(0, parents)
        maxes, count = parent_max, len(parents)
    offset = 0
    node_bytes = (f - 1) * KEY_BYTES + POINTER_BYTES
    for lvl in levels[:-1]:
        for node in lvl:
            node.offset = offset
            offset += node_bytes
    return CsbTree(levels=levels, f=f, Lc=Lc, n=col.n)


def csb_search(t, key, trace=None):
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    node = t.levels[0][0]
    ptr_off = (t.f - 1) * KEY_BYTES
    for level in range(t.depth):
        if trace is not None:
            trace.step()
        b = count_less(node.keys, 0, len(node.keys), key, trace, "csb.internal", node.offset)
        if trace is not None:
            trace.branch(b)
            trace.touch("csb.internal", node.offset + ptr_off)
        node = t.levels[level + 1][node.first_child + b]
    return _leaf_lookup(node.keys, node.values, 0, len(node.keys), key, trace,
                        "csb.leaves", node.offset, node.offset + t.Lc * KEY_BYTES)
