"""Oracle-equivalence checks for every structure."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..core import SortedColumn, oracle_batch
from ..estimators import STRUCTURES, make_index
from ..paged_trees import css_min_depth
from ..validation import MAX_SENTINEL

VERIFY_SIZES = (0, 1, 15, 255, 4096)


class Mismatch(NamedTuple):
    structure: str
    params: str
    key: int
    expected: object
    got: object


@dataclass
class VerifyReport:
    checked: int = 0
    datasets: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.mismatches

    def lines(self, limit=20):
        out = [f"{'PASS' if self.ok else 'FAIL'}: {self.datasets} index builds, "
               f"{self.checked} lookups, {len(self.mismatches)} mismatches"]
        for m in self.mismatches[:limit]:
            out.append(f"  {m.structure} [{m.params}] key={m.key} expected={m.expected} got={m.got}")
        return out


def random_unique_column(n, rng):
    keys = set()
    while len(keys) < n:
        keys.update(int(k) for k in rng.integers(0, MAX_SENTINEL, size=n - len(keys)))
    keys = np.array(sorted(keys), dtype=np.uint32)
    values = rng.integers(0, 2**32, size=n, dtype=np.uint64).astype(np.uint32)
    return SortedColumn(keys, values)


def absent_keys(col, count, rng):
    present = set(col.keys.tolist())
    out = []
    # boundary probes first, then random ones
    for k in (0, 1, MAX_SENTINEL - 1, MAX_SENTINEL):
        if k not in present:
            out.append(k)
    while len(out) < count:
        k = int(rng.integers(0, 2**32))
        if k not in present:
            out.append(k)
    return np.array(out[:count], dtype=np.int64)


def random_params(structure, rng, n=0):
    """A random valid parameter set for ``structure`` over ``n`` keys."""
    r = lambda lo, hi: int(rng.integers(lo, hi + 1))  # noqa: E731
    if structure == "binary":
        return {"linear_cutoff": r(1, 16)}
    if structure in ("bplus", "csb", "css"):
        return {"f": r(2, 33), "leaf_size": r(1, 64)}
    if structure == "kary":
        return {"k": r(1, 8), "vectorized": bool(r(0, 1))}
    if structure == "fast":
        p = {"dS": r(1, 2), "dC": r(1, 3), "dP": r(1, 2), "leaf_size": r(1, 32)}
        if r(0, 3) == 0:
            p["simd_keys"] = 4
        return p
    if structure == "ng_binary":
        return {"levels": [0, 1, 2, "full"][r(0, 3)], "linear_cutoff": r(1, 16)}
    if structure == "ng_css":
        f, lc = r(2, 33), r(1, 64)
        deepest = css_min_depth(n, f, lc) + 1
        choices = [L for L in (0, 1, 2) if L <= deepest] + ["full"]
        return {"f": f, "leaf_size": lc, "levels": choices[r(0, len(choices) - 1)]}
    raise ValueError(f"unknown structure {structure!r}")


def label(params):
    return ";".join(f"{k}={v}" for k, v in sorted(params.items()))


def check_index(search, col, queries, structure, params, report):
    """Compare ``search(key)`` with the oracle on ``queries``; appends mismatches."""
    found, values = oracle_batch(col, queries)
    for key, hit, value in zip(queries.tolist(), found.tolist(), values.tolist()):
        got = search(key)
        expected = (True, value) if hit else (False, None)
        actual = (bool(got.found), int(got.value) if got.found else None)
        if actual != expected:
            report.mismatches.append(Mismatch(structure, label(params), key,
                                              value if hit else "absent",
                                              actual[1] if actual[0] else "absent"))
    report.checked += len(queries)
    report.datasets += 1


def verify(structures=None, sizes=VERIFY_SIZES, random_sizes=3, absent=1000, seed=0,
           randomize_params=False, report=None):
    """Oracle equivalence for ``structures`` (default: all) over the given sizes.

    ``random_sizes`` extra sizes are drawn from [2, 5000). With
    ``randomize_params`` every build gets a random valid parameter set,
    otherwise defaults are used.
    """
    structures = sorted(STRUCTURES) if structures is None else list(structures)
    rng = np.random.default_rng(seed)
    sizes = list(sizes) + [int(x) for x in rng.integers(2, 5000, size=random_sizes)]
    report = report or VerifyReport()
    for n in sizes:
        col = random_unique_column(n, rng)
        queries = np.concatenate([col.keys.astype(np.int64), absent_keys(col, absent, rng)])
        for structure in structures:
            params = random_params(structure, rng, n) if randomize_params else {}
            est = make_index(structure, **params).fit(col.keys, col.values)
            check_index(est.lookup_function(), col, queries, structure, params, report)
    return report
