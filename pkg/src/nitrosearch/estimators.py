"""Estimator-style wrappers: ``fit`` builds an index, ``predict`` looks keys up.

``fit(X, y)`` takes keys and optional values (default: input positions).
``predict(X)`` returns the value of the first matching key for each query,
or ``-1`` when the key is absent.
"""
from __future__ import annotations

import functools
import time

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import SortedColumn
from .fast_tree import DEFAULT_LEAF as FAST_LEAF
from .fast_tree import FastParams, build_fast, fast_search_batch
from .nitrogen import NativeSearch, PythonSearch, compile_binary, compile_css
from .paged_trees import (
    DEFAULT_FANOUT, DEFAULT_LEAF, build_bplus, build_csb, build_css, css_search_batch,
)
from .sorted_search import (
    DEFAULT_CUTOFF, DEFAULT_K, BinarySearchConfig, binary_search, binary_search_batch,
    build_kary, kary_search, kary_search_batch,
)
from .validation import check_key, check_queries


class IndexEstimator(BaseEstimator):
    """Shared fit/predict plumbing; subclasses provide ``_build``."""

    structure = None

    def fit(self, X, y=None):
        self.column_ = SortedColumn.from_arrays(X, y)
        t0 = time.perf_counter_ns()
        self.index_ = self._build(self.column_)
        self.build_ns_ = time.perf_counter_ns() - t0
        self.n_keys_ = self.column_.n
        return self

    def search(self, key, trace=None):
        """Look up one key; returns a ``SearchResult``."""
        check_is_fitted(self, "index_")
        return self._search(check_key(key), trace)

    def _search(self, key, trace):
        return self.index_.search(key, trace=trace)

    def lookup_function(self):
        """Unvalidated ``key -> SearchResult`` callable for timing loops."""
        check_is_fitted(self, "index_")
        return functools.partial(self._search, trace=None)

    def predict(self, X):
        check_is_fitted(self, "index_")
        q = check_queries(X)
        _, values = self._batch(q)
        return values

    def _batch(self, q):
        found = np.zeros(q.shape[0], dtype=bool)
        values = np.full(q.shape[0], -1, dtype=np.int64)
        for i, key in enumerate(q.tolist()):
            r = self._search(key, None)
            if r.found:
                found[i] = True
                values[i] = r.value
        return found, values


class BinarySearchIndex(IndexEstimator):
    structure = "binary"

    def __init__(self, linear_cutoff=DEFAULT_CUTOFF):
        self.linear_cutoff = linear_cutoff

    def _build(self, col):
        self.config_ = BinarySearchConfig(self.linear_cutoff)
        return col

    def _search(self, key, trace):
        return binary_search(self.column_, key, self.config_, trace)

    def _batch(self, q):
        return binary_search_batch(self.column_, q)


class KaryTreeIndex(IndexEstimator):
    structure = "kary"

    def __init__(self, k=DEFAULT_K, vectorized=False):
        self.k = k
        self.vectorized = vectorized

    def _build(self, col):
        return build_kary(col, self.k)

    def _search(self, key, trace):
        return kary_search(self.index_, self.column_, key, trace, vectorized=self.vectorized)

    def _batch(self, q):
        return kary_search_batch(self.index_, self.column_, q)


class CssTreeIndex(IndexEstimator):
    structure = "css"

    def __init__(self, f=DEFAULT_FANOUT, leaf_size=DEFAULT_LEAF, depth=None):
        self.f = f
        self.leaf_size = leaf_size
        self.depth = depth

    def _build(self, col):
        return build_css(col, self.f, self.leaf_size, self.depth)

    def _batch(self, q):
        return css_search_batch(self.index_, self.column_, q)


class BPlusTreeIndex(IndexEstimator):
    structure = "bplus"

    def __init__(self, f=DEFAULT_FANOUT, leaf_size=DEFAULT_LEAF):
        self.f = f
        self.leaf_size = leaf_size

    def _build(self, col):
        return build_bplus(col, self.f, self.leaf_size)


class CsbTreeIndex(IndexEstimator):
    structure = "csb"

    def __init__(self, f=DEFAULT_FANOUT, leaf_size=DEFAULT_LEAF):
        self.f = f
        self.leaf_size = leaf_size

    def _build(self, col):
        return build_csb(col, self.f, self.leaf_size)


class FastTreeIndex(IndexEstimator):
    structure = "fast"

    def __init__(self, dS=2, dC=2, dP=2, simd_keys=None, leaf_size=FAST_LEAF, simd=True):
        self.dS = dS
        self.dC = dC
        self.dP = dP
        self.simd_keys = simd_keys
        self.leaf_size = leaf_size
        self.simd = simd

    def _build(self, col):
        params = FastParams(self.dS, self.dC, self.dP, self.simd_keys)
        return build_fast(col, params, self.leaf_size, self.simd)

    def _batch(self, q):
        return fast_search_batch(self.index_, q)


def _backend(compiled, backend):
    if backend == "interpret":
        return compiled
    if backend == "python":
        return PythonSearch(compiled)
    if backend == "native":
        return NativeSearch(compiled)
    raise ValueError(f"backend must be 'interpret', 'python' or 'native', got {backend!r}")


class NitroBinaryIndex(IndexEstimator):
    """Binary search whose top ``levels`` splits are compiled (default: i-cache budget).

    ``backend`` runs the compiled part through the reference interpreter
    ("interpret"), as generated Python source ("python") or as assembled
    x86-64 code ("native", needs gcc).
    """

    structure = "ng_binary"

    def __init__(self, levels=None, linear_cutoff=DEFAULT_CUTOFF, budget=None, backend="interpret"):
        self.levels = levels
        self.linear_cutoff = linear_cutoff
        self.budget = budget
        self.backend = backend

    def _build(self, col):
        self.compiled_ = compile_binary(col, self.levels, BinarySearchConfig(self.linear_cutoff), self.budget)
        return _backend(self.compiled_, self.backend)


class NitroCssIndex(IndexEstimator):
    """CSS-tree whose top ``levels`` levels are compiled; backends as for NitroBinaryIndex."""

    structure = "ng_css"

    def __init__(self, levels=None, f=DEFAULT_FANOUT, leaf_size=DEFAULT_LEAF, budget=None,
                 backend="interpret"):
        self.levels = levels
        self.f = f
        self.leaf_size = leaf_size
        self.budget = budget
        self.backend = backend

    def _build(self, col):
        self.tree_ = build_css(col, self.f, self.leaf_size)
        self.compiled_ = compile_css(self.tree_, col, self.levels, self.budget)
        return _backend(self.compiled_, self.backend)


STRUCTURES = {cls.structure: cls for cls in (
    BinarySearchIndex, BPlusTreeIndex, CssTreeIndex, CsbTreeIndex, KaryTreeIndex,
    FastTreeIndex, NitroBinaryIndex, NitroCssIndex,
)}


def make_index(structure, **params):
    """Unfitted estimator for ``structure`` (one of :data:`STRUCTURES`)."""
    try:
        cls = STRUCTURES[structure]
    except KeyError:
        raise ValueError(f"unknown structure {structure!r}; choose from {sorted(STRUCTURES)}") from None
    return cls(**params)
