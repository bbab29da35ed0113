"""Main-memory search structures for sorted 32-bit key columns.

Binary and k-ary search, CSS-, B+- and CSB+-trees, a hierarchically blocked
tree, index compilation into decision programs, access tracing, and a
benchmark command line.
"""
from .core import (
    MAX_SENTINEL, NOT_FOUND, SearchResult, SortedColumn, Workload, build_column,
    generate_queries, oracle_search, read_column, write_column,
)
from .estimators import (
    BinarySearchIndex, BPlusTreeIndex, CsbTreeIndex, CssTreeIndex, FastTreeIndex,
    KaryTreeIndex, NitroBinaryIndex, NitroCssIndex, STRUCTURES, make_index,
)
from .trace import AccessTrace, SearchStats, traced_search

__version__ = "0.1.0"

__all__ = [
    "AccessTrace", "BPlusTreeIndex", "BinarySearchIndex", "CsbTreeIndex", "CssTreeIndex",
    "FastTreeIndex", "KaryTreeIndex", "MAX_SENTINEL", "NOT_FOUND", "NitroBinaryIndex",
    "NitroCssIndex", "STRUCTURES", "SearchResult", "SearchStats", "SortedColumn", "Workload",
    "build_column", "generate_queries", "make_index", "oracle_search", "read_column",
    "traced_search", "write_column",
]
