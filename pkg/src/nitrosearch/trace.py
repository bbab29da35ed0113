"""Access accounting for index lookups.

Search routines accept an optional recorder. :class:`SearchStats` counts
comparisons and node steps and keeps the branch path; :class:`AccessTrace`
additionally maps every index-memory read to the 64-byte line and 4 KiB page
it falls in. Each array is modelled as starting on a page boundary, so the
counts are deterministic replays rather than hardware measurements.
"""
from __future__ import annotations

import csv
import io
from statistics import median

LINE_BYTES = 64
PAGE_BYTES = 4096


class SearchStats:
    """Per-query comparison and step counters."""

    __slots__ = ("comparisons", "steps", "branches")

    def __init__(self):
        self.comparisons = 0
        self.steps = 0
        self.branches = []

    def touch(self, region, offset, nbytes=4, value=False):
        pass

    def compare(self, count=1):
        self.comparisons += count

    def step(self):
        self.steps += 1

    def branch(self, b):
        self.branches.append(b)


class AccessTrace(SearchStats):
    """Distinct cache lines and pages touched by one query.

    ``region`` names the array a read belongs to; offsets are bytes from the
    start of that array. Value-array reads are ignored unless
    ``track_values`` is set, so that structures are compared on the index
    memory they traverse.
    """

    __slots__ = ("lines", "pages", "line_bytes", "page_bytes", "track_values")

    def __init__(self, line_bytes=LINE_BYTES, page_bytes=PAGE_BYTES, track_values=False):
        super().__init__()
        if page_bytes % line_bytes:
            raise ValueError("page size must be a multiple of the line size")
        self.lines = set()
        self.pages = set()
        self.line_bytes = line_bytes
        self.page_bytes = page_bytes
        self.track_values = track_values

    def touch(self, region, offset, nbytes=4, value=False):
        if value and not self.track_values:
            return
        last = offset + nbytes - 1
        for line in range(offset // self.line_bytes, last // self.line_bytes + 1):
            self.lines.add((region, line))
        for page in range(offset // self.page_bytes, last // self.page_bytes + 1):
            self.pages.add((region, page))

    @property
    def line_count(self):
        return len(self.lines)

    @property
    def page_count(self):
        return len(self.pages)


def traced_search(index, key, **trace_options):
    """Run ``index.search`` with an :class:`AccessTrace` attached."""
    trace = AccessTrace(**trace_options)
    result = index.search(key, trace=trace)
    return result, trace


def trace_medians(index, queries, **trace_options):
    """Median distinct lines, pages and comparisons over ``queries``."""
    lines, pages, cmps = [], [], []
    for q in queries:
        _, t = traced_search(index, int(q), **trace_options)
        lines.append(t.line_count)
        pages.append(t.page_count)
        cmps.append(t.comparisons)
    if not lines:
        return {"median_lines": 0.0, "median_pages": 0.0, "median_cmps": 0.0}
    return {
        "median_lines": float(median(lines)),
        "median_pages": float(median(pages)),
        "median_cmps": float(median(cmps)),
    }


TRACE_SUMMARY_COLUMNS = ("structure", "params", "n", "workload", "median_lines", "median_pages", "median_cmps")


def write_trace_summary(rows, fh=None):
    """Write trace summary rows as CSV; returns the text when ``fh`` is None."""
    out = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(out, fieldnames=TRACE_SUMMARY_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in TRACE_SUMMARY_COLUMNS})
    if fh is None:
        return out.getvalue()
    return None
