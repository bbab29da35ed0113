"""Domain types, dataset construction, the linear-scan oracle and workloads."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .validation import MAX_SENTINEL, check_keys, check_positive_int, check_values

__all__ = [
    "MAX_SENTINEL",
    "NOT_FOUND",
    "SearchResult",
    "SortedColumn",
    "Workload",
    "build_column",
    "generate_queries",
    "oracle_batch",
    "oracle_search",
    "read_column",
    "read_csv_column",
    "write_column",
    "zipf_pmf",
    "zipf_rank_order",
]

COLUMN_MAGIC = b"NTRC"
_PAIR_DTYPE = np.dtype([("key", "<u4"), ("value", "<u4")])


class SearchResult(NamedTuple):
    found: bool
    value: int = 0


NOT_FOUND = SearchResult(False, 0)


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=np.uint32)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SortedColumn:
    """Ascending keys with their values; the ground truth every index is built from."""

    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        keys = check_keys(self.keys)
        values = check_values(self.values, keys.shape[0])
        if keys.size > 1 and np.any(keys[1:] < keys[:-1]):
            raise ValueError("keys must be non-decreasing")
        object.__setattr__(self, "keys", _frozen(keys))
        object.__setattr__(self, "values", _frozen(values))
        # int-returning views for the scalar search loops
        object.__setattr__(self, "key_view", memoryview(self.keys))
        object.__setattr__(self, "value_view", memoryview(self.values))

    @property
    def n(self):
        return int(self.keys.shape[0])

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, SortedColumn):
            return NotImplemented
        return np.array_equal(self.keys, other.keys) and np.array_equal(self.values, other.values)

    __hash__ = None

    @classmethod
    def from_arrays(cls, keys, values=None):
        """Sort ``keys`` (stably) and carry ``values`` along."""
        keys = check_keys(keys)
        values = check_values(values, keys.shape[0])
        order = np.argsort(keys, kind="stable")
        return cls(keys[order], values[order])

    @property
    def unique(self):
        return self.n < 2 or bool(np.all(self.keys[1:] != self.keys[:-1]))


def build_column(pairs):
    """Build a :class:`SortedColumn` from ``(key, value)`` pairs.

    Duplicate keys keep their input order. Keys equal to ``MAX_SENTINEL``
    are rejected.
    """
    pairs = list(pairs)
    if not pairs:
        return SortedColumn(np.zeros(0, np.uint32), np.zeros(0, np.uint32))
    keys, values = zip(*pairs)
    return SortedColumn.from_arrays(np.array(keys, dtype=np.int64), np.array(values, dtype=np.int64))


def oracle_search(col, key):
    """Linear scan returning the value of the first matching key."""
    keys = col.key_view
    for i in range(col.n):
        if keys[i] == key:
            return SearchResult(True, col.value_view[i])
    return NOT_FOUND


def oracle_batch(col, queries, chunk=1024):
    """Vectorized linear scan: ``(found, values)`` with ``-1`` for misses."""
    q = np.asarray(queries, dtype=np.int64)
    found = np.zeros(q.shape[0], dtype=bool)
    values = np.full(q.shape[0], -1, dtype=np.int64)
    if col.n == 0:
        return found, values
    keys = col.keys.astype(np.int64)
    for start in range(0, q.shape[0], chunk):
        block = q[start:start + chunk]
        eq = block[:, None] == keys[None, :]
        hit = eq.any(axis=1)
        first = eq.argmax(axis=1)
        found[start:start + chunk] = hit
        values[start:start + chunk] = np.where(hit, col.values[first].astype(np.int64), -1)
    return found, values


# -- workloads ---------------------------------------------------------------

UNIFORM = "uniform"
ZIPF = "zipf"


@dataclass(frozen=True)
class Workload:
    distribution: str = UNIFORM
    query_count: int = 100_000
    hit_fraction: float = 1.0
    zipf_s: float = 1.0
    seed: int = 42

    def __post_init__(self):
        if self.distribution not in (UNIFORM, ZIPF):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        check_positive_int(self.query_count, "query_count", minimum=0)
        if not 0.0 <= self.hit_fraction <= 1.0:
            raise ValueError("hit_fraction must lie in [0, 1]")
        if self.distribution == ZIPF and not self.zipf_s > 0:
            raise ValueError("zipf_s must be positive")

    @property
    def label(self):
        if self.distribution == ZIPF:
            return f"zipf(s={self.zipf_s:g})"
        return UNIFORM


def zipf_pmf(m, s):
    """Probability of ranks 1..m under a Zipf law with exponent ``s``."""
    if m <= 0:
        return np.zeros(0)
    weights = 1.0 / np.arange(1, m + 1, dtype=np.float64) ** s
    return weights / weights.sum()


def _rng(seed, stream):
    return np.random.default_rng([int(seed) & (2**64 - 1), stream])


def zipf_rank_order(col, w):
    """Distinct keys of ``col`` ordered from hottest (rank 1) to coldest.

    The rank assignment is a seeded permutation, so skew is not correlated
    with key order.
    """
    distinct = np.unique(col.keys)
    perm = _rng(w.seed, 1).permutation(distinct.shape[0])
    return distinct[perm]


def _miss_keys(col, count, rng):
    out = np.zeros(0, dtype=np.uint32)
    present = col.keys
    while out.shape[0] < count:
        need = count - out.shape[0]
        draw = rng.integers(0, MAX_SENTINEL, size=need + need // 8 + 8, dtype=np.uint64)
        draw = draw.astype(np.uint32)
        if present.size:
            draw = draw[~np.isin(draw, present)]
        out = np.concatenate([out, draw[:need]])
    return out


def generate_queries(col, w):
    """Deterministic query keys for workload ``w`` over ``col``."""
    count = w.query_count
    if count == 0:
        return np.zeros(0, dtype=np.uint32)
    hits = int(round(w.hit_fraction * count))
    if hits and col.n == 0:
        raise ValueError("cannot draw hit queries from an empty column")
    rng = _rng(w.seed, 2)
    hot = zipf_rank_order(col, w)
    m = hot.shape[0]
    if hits == 0:
        hit_keys = np.zeros(0, dtype=np.uint32)
    elif w.distribution == UNIFORM:
        hit_keys = hot[rng.integers(0, m, size=hits)]
    else:
        cdf = np.cumsum(zipf_pmf(m, w.zipf_s))
        ranks = np.searchsorted(cdf, rng.random(hits), side="right")
        hit_keys = hot[np.minimum(ranks, m - 1)]
    miss_keys = _miss_keys(col, count - hits, rng)
    queries = np.concatenate([hit_keys.astype(np.uint32), miss_keys])
    return queries[rng.permutation(count)]


# -- file formats ------------------------------------------------------------

_HEADER = struct.Struct("<4sQ")


def write_column(path, col):
    """Write ``col`` in the flat little-endian ``NTRC`` format."""
    Path(path).write_bytes(column_bytes(col))


def column_bytes(col):
    pairs = np.empty(col.n, dtype=_PAIR_DTYPE)
    pairs["key"] = col.keys
    pairs["value"] = col.values
    return _HEADER.pack(COLUMN_MAGIC, col.n) + pairs.tobytes()


def parse_column(buf):
    buf = memoryview(buf)
    if len(buf) < _HEADER.size:
        raise ValueError("truncated column file")
    magic, n = _HEADER.unpack_from(buf)
    if magic != COLUMN_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {COLUMN_MAGIC!r}")
    body = buf[_HEADER.size:]
    if len(body) != n * _PAIR_DTYPE.itemsize:
        raise ValueError(f"column file holds {len(body)} payload bytes, expected {n * 8}")
    pairs = np.frombuffer(body, dtype=_PAIR_DTYPE, count=n)
    return SortedColumn(pairs["key"].copy(), pairs["value"].copy())


def read_column(path):
    return parse_column(Path(path).read_bytes())


def read_csv_column(path):
    """Read ``key,value`` rows; a non-numeric first row is taken as a header."""
    pairs = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ValueError(f"line {lineno + 1}: expected two columns")
            try:
                pairs.append((int(row[0]), int(row[1])))
            except ValueError:
                if lineno == 0 and not pairs:
                    continue
                raise ValueError(f"line {lineno + 1}: non-integer cell in {row!r}") from None
    return build_column(pairs)

