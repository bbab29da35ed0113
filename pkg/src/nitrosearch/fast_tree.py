"""Hierarchically blocked search tree (SIMD node / cache-line node / page node).

Logically the index is a full ``fS``-ary tree of SIMD nodes, each holding
``fS - 1`` separators, over leaf blocks of the padded column. Physically the
SIMD nodes are reordered so that a descent stays inside one page node for
``dC * dP`` levels and inside one cache-line node for ``dC`` levels:

* page nodes are stored breadth first over the whole tree,
* inside a page node, its cache-line nodes breadth first,
* inside a cache-line node, its SIMD nodes breadth first.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import NOT_FOUND, generate_queries
from .paged_trees import _leaf_batch, _leaf_lookup, pow2ceil
from .sorted_search import KEY_BYTES, count_less, count_less_vector
from .trace import trace_medians
from .validation import MAX_SENTINEL, check_positive_int

DEFAULT_LEAF = 16
MAX_INTERNAL_KEYS = 1 << 28


def _nodes(fanout, levels):
    """Node count of a full tree with ``levels`` levels."""
    return (fanout**levels - 1) // (fanout - 1)


@dataclass(frozen=True)
class FastParams:
    """Blocking depths.

    ``dS`` binary levels form a SIMD node, ``dC`` SIMD levels a cache-line
    node, ``dP`` cache-line levels a page node. ``simd_keys`` overrides the
    SIMD node width (e.g. 4 keys with fanout 5) instead of ``2**dS - 1``.
    """

    dS: int = 2
    dC: int = 2
    dP: int = 2
    simd_keys: int | None = None
    huge_pages: bool = False

    def __post_init__(self):
        for name in ("dS", "dC", "dP"):
            check_positive_int(getattr(self, name), name)
        if self.simd_keys is not None:
            check_positive_int(self.simd_keys, "simd_keys")
        if self.huge_pages:
            raise ValueError("huge-page blocking is not supported")

    @property
    def fS(self):
        return self.simd_keys + 1 if self.simd_keys is not None else 2**self.dS

    @property
    def fC(self):
        return self.fS**self.dC

    @property
    def fP(self):
        return self.fC**self.dP

    @property
    def keys_per_simd_node(self):
        return self.fS - 1

    @property
    def simd_nodes_per_line(self):
        return _nodes(self.fS, self.dC)

    @property
    def keys_per_line(self):
        return self.keys_per_simd_node * self.simd_nodes_per_line

    @property
    def line_bytes(self):
        return self.keys_per_line * KEY_BYTES

    @property
    def lines_per_page(self):
        return _nodes(self.fC, self.dP)

    @property
    def simd_nodes_per_page(self):
        return self.simd_nodes_per_line * self.lines_per_page

    @property
    def keys_per_page(self):
        return self.keys_per_line * self.lines_per_page

    @property
    def page_bytes(self):
        return self.keys_per_page * KEY_BYTES

    @property
    def page_fanout(self):
        return self.fP

    @property
    def simd_levels_per_page(self):
        return self.dC * self.dP

    @property
    def line_stride(self):
        return pow2ceil(self.line_bytes)

    @property
    def page_stride(self):
        return pow2ceil(self.lines_per_page * self.line_stride)


@dataclass(frozen=True, eq=False)
class FastTree:
    params: FastParams
    Lc: int
    n: int
    page_levels: int
    keys: np.ndarray
    col: object
    simd: bool = True

    def __post_init__(self):
        object.__setattr__(self, "view", memoryview(self.keys))

    @property
    def depth(self):
        """SIMD levels from the root page down to the leaves."""
        return self.page_levels * self.params.simd_levels_per_page

    @property
    def page_count(self):
        return _nodes(self.params.fP, self.page_levels)

    @property
    def leaf_count(self):
        return self.params.fP**self.page_levels

    def search(self, key, trace=None):
        return fast_search(self, key, trace)


def fast_page_levels(n, params, Lc):
    levels = 1
    while params.fP**levels * Lc < n:
        levels += 1
    return levels


def simd_node_slot(params, level, q):
    """Array offset of logical SIMD node ``q`` (breadth-first index within ``level``).

    Works elementwise on numpy arrays of ``q``.
    """
    fS, fC, fP = params.fS, params.fC, params.fP
    per_page = params.simd_levels_per_page
    page_level, within = divmod(level, per_page)
    line_level, simd_level = divmod(within, params.dC)
    below = fS**within
    page = _nodes(fP, page_level) + q // below
    rem = q % below
    line = _nodes(fC, line_level) + rem // fS**simd_level
    simd = _nodes(fS, simd_level) + rem % fS**simd_level
    return page * params.keys_per_page + line * params.keys_per_line + simd * params.keys_per_simd_node


def build_fast(col, params=None, Lc=DEFAULT_LEAF, simd=True):
    """Lay the separators of a full ``fS``-ary tree out in blocked order."""
    params = params or FastParams()
    Lc = check_positive_int(Lc, "Lc")
    n = col.n
    P = fast_page_levels(n, params, Lc)
    H = P * params.simd_levels_per_page
    total = _nodes(params.fP, P) * params.keys_per_page
    if total > MAX_INTERNAL_KEYS:
        raise ValueError(f"blocking parameters need {total} internal keys; too large")
    fS, k = params.fS, params.keys_per_simd_node
    keys = np.full(total, MAX_SENTINEL, dtype=np.uint32)
    sep = np.arange(1, fS, dtype=np.int64)
    for level in range(H):
        span = fS ** (H - level - 1)
        q = np.arange(fS**level, dtype=np.int64)
        last = (q[:, None] * fS * span + sep[None, :] * span) * Lc - 1
        seps = np.full(last.shape, MAX_SENTINEL, dtype=np.uint32)
        real = last < n
        if n:
            seps[real] = col.keys[last[real]]
        slots = simd_node_slot(params, level, q)
        keys[slots[:, None] + np.arange(k)[None, :]] = seps
    keys.setflags(write=False)
    return FastTree(params=params, Lc=Lc, n=n, page_levels=P, keys=keys, col=col, simd=simd)


def combine_branches(branches, fanout):
    """Positional combination ``b1 * fanout + b2 ...`` of child indices."""
    out = 0
    for b in branches:
        out = out * fanout + b
    return out


def fast_search(t, key, trace=None, simd=None):
    """Descend page, cache-line and SIMD blocks, then search the leaf block."""
    if key >= MAX_SENTINEL:
        return NOT_FOUND
    p = t.params
    simd = t.simd if simd is None else simd
    fS, fC, fP, k = p.fS, p.fC, p.fP, p.keys_per_simd_node
    kpp, kpl = p.keys_per_page, p.keys_per_line
    pstride, lstride = p.page_stride, p.line_stride
    keys, view = t.keys, t.view
    page = leaf = 0
    for _ in range(t.page_levels):
        line = bp = 0
        for _ in range(p.dP):
            node = bc = 0
            for _ in range(p.dC):
                start = page * kpp + line * kpl + node * k
                base = page * pstride + line * lstride + node * k * KEY_BYTES
                if trace is not None:
                    trace.step()
                if simd:
                    b = count_less_vector(keys, start, k, key, trace, "fast.keys", base)
                else:
                    b = count_less(view, start, k, key, trace, "fast.keys", base)
                if trace is not None:
                    trace.branch(b)
                bc = bc * fS + b
                node = node * fS + b + 1
            bp = bp * fC + bc
            line = line * fC + bc + 1
        leaf = leaf * fP + bp
        page = page * fP + bp + 1
    col = t.col
    start = leaf * t.Lc
    if start >= col.n:
        if trace is not None:
            trace.step()
        return NOT_FOUND
    count = min(t.Lc, col.n - start)
    return _leaf_lookup(col.key_view, col.value_view, start, count, key, trace,
                        "column.keys", start * KEY_BYTES, start * KEY_BYTES)


def fast_leaf_blocks(t, queries):
    p = t.params
    q = np.asarray(queries, dtype=np.int64)
    keys = t.keys.astype(np.int64)
    offs = np.arange(p.keys_per_simd_node, dtype=np.int64)
    page = np.zeros(q.shape[0], dtype=np.int64)
    leaf = np.zeros_like(page)
    for _ in range(t.page_levels):
        line = np.zeros_like(page)
        bp = np.zeros_like(page)
        for _ in range(p.dP):
            node = np.zeros_like(page)
            bc = np.zeros_like(page)
            for _ in range(p.dC):
                start = page * p.keys_per_page + line * p.keys_per_line + node * p.keys_per_simd_node
                b = np.count_nonzero(keys[start[:, None] + offs[None, :]] < q[:, None], axis=1)
                bc = bc * p.fS + b
                node = node * p.fS + b + 1
            bp = bp * p.fC + bc
            line = line * p.fC + bc + 1
        leaf = leaf * p.fP + bp
        page = page * p.fP + bp + 1
    return leaf


def fast_search_batch(t, queries):
    q = np.asarray(queries, dtype=np.int64)
    return _leaf_batch(t.col, q, fast_leaf_blocks(t, q), t.Lc)


# -- feature report ------------------------------------------------------------

FEATURE_COLUMNS = ("dS", "dC", "dP", "simd_on", "clb_on", "pgb_on",
                   "ns_per_lookup", "cmp_per_lookup", "lines_per_lookup", "pages_per_lookup")


def feature_params(base, clb_on, pgb_on):
    """Blocking parameters with cache-line and/or page blocking switched off."""
    return replace(base, dC=base.dC if clb_on else 1, dP=base.dP if pgb_on else 1)


def fast_feature_report(col, workload, params=None, Lc=DEFAULT_LEAF, trace_queries=None):
    """Time and trace every on/off combination of SIMD, line and page blocking.

    ``trace_queries`` caps how many of the workload's queries are replayed
    through the tracer (all of them by default).
    """
    base = params or FastParams()
    queries = [int(q) for q in generate_queries(col, workload)]
    traced = queries if trace_queries is None else queries[:trace_queries]
    trees = {}
    rows = []
    for simd_on, clb_on, pgb_on in itertools.product((False, True), repeat=3):
        p = feature_params(base, clb_on, pgb_on)
        if (p.dC, p.dP) not in trees:
            trees[(p.dC, p.dP)] = build_fast(col, p, Lc)
        tree = trees[(p.dC, p.dP)]
        tree = replace(tree, simd=simd_on)
        checksum = 0
        t0 = time.perf_counter_ns()
        for q in queries:
            checksum ^= tree.search(q).value
        elapsed = time.perf_counter_ns() - t0
        stats = trace_medians(tree, traced)
        rows.append({
            "dS": p.dS, "dC": p.dC, "dP": p.dP,
            "simd_on": int(simd_on), "clb_on": int(clb_on), "pgb_on": int(pgb_on),
            "ns_per_lookup": elapsed / max(len(queries), 1),
            "cmp_per_lookup": stats["median_cmps"],
            "lines_per_lookup": stats["median_lines"],
            "pages_per_lookup": stats["median_pages"],
        })
    return rows
