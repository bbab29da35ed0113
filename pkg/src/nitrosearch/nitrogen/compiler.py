"""Turn the top levels of an index into a decision program.

Binary search compiles its first ``L`` range splits; a CSS-tree compiles its
first ``L`` internal levels (``L = depth + 1`` also compiles the leaves).
Queries that leave the compiled region resume in the ordinary search of the
residual structure at exactly the range or node they reached.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..core import NOT_FOUND
from ..paged_trees import css_level_of, css_search_from
from ..sorted_search import BinarySearchConfig, resume_binary_search
from ..validation import MAX_SENTINEL, check_positive_int
from .ir import (
    BR_EQ, BR_GT, BR_LT, CMP, FALLBACK, RET_FOUND, RET_NOTFOUND, SET_VALUE,
    Fallback, Op, SearchProgram, interpret, validate,
)

ICACHE_BUDGET = 32 * 1024
BUDGET_ENV = "NITRO_ICACHE_BUDGET"

FULL = "full"
"""Level count meaning: compile everything, leaves included."""

COLUMN = "column"
CSS = "css"


class _Builder:
    def __init__(self):
        self.ins = []
        self.regions = []

    @property
    def here(self):
        return len(self.ins)

    def emit(self, ins, region):
        self.ins.append(ins)
        self.regions.append(region)
        return len(self.ins) - 1

    def patch(self, at):
        """Point the jump at ``at`` to the next instruction to be emitted."""
        self.ins[at] = self.ins[at]._replace(arg=self.here)

    def exit_on_flags(self, region):
        """Found iff the last comparison was equal; the staged value is the answer."""
        pc = self.here
        self.emit(BR_EQ(pc + 2), region)
        self.emit(RET_NOTFOUND, region)
        self.emit(RET_FOUND, region)

    def program(self):
        return validate(SearchProgram(tuple(self.ins), 0, tuple(self.regions)))


def _check_levels(L):
    if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 0:
        raise ValueError(f"levels must be a non-negative integer, got {L!r}")
    return int(L)


# -- binary search -------------------------------------------------------------

def binary_full_levels(n):
    """Split levels after which every candidate window holds one position."""
    return max(1, int(n).bit_length())


def compile_binary_program(col, L):
    L = _check_levels(L)
    keys, values = col.key_view, col.value_view
    n = col.n
    b = _Builder()

    def split(lo, hi, level):
        if level == L and (lo != hi or L == 0):
            b.emit(FALLBACK(COLUMN, (lo, hi)), "fallback")
            return
        if lo == hi:
            if lo >= n:
                b.emit(RET_NOTFOUND, "leaf")
                return
            b.emit(SET_VALUE(values[lo]), "leaf")
            b.emit(CMP(keys[lo]), "leaf")
            b.exit_on_flags("leaf")
            return
        mid = (lo + hi) >> 1
        b.emit(CMP(keys[mid]), "internal")
        jump = b.emit(BR_GT(None), "internal")
        split(lo, mid, level + 1)
        b.patch(jump)
        split(mid + 1, hi, level + 1)

    split(0, n, 0)
    return b.program()


# -- CSS-tree ------------------------------------------------------------------

def compile_css_program(t, col, L):
    L = _check_levels(L)
    if L > t.depth + 1:
        raise ValueError(f"levels must be in 0..{t.depth + 1} for a tree of depth {t.depth}")
    f, Lc, n = t.f, t.Lc, col.n
    internal = t.internal
    keys, values = col.key_view, col.value_view
    b = _Builder()

    def leaf(block):
        start = block * Lc
        stop = min(start + Lc, n)
        if start >= stop:
            b.emit(RET_NOTFOUND, "leaf")
            return
        jumps = []
        for pos in range(start, stop):
            b.emit(SET_VALUE(values[pos]), "leaf")
            b.emit(CMP(keys[pos]), "leaf")
            jumps.append(b.emit(BR_LT(None), "leaf"))
            jumps.append(b.emit(BR_EQ(None), "leaf"))
        for j in jumps:
            b.patch(j)
        b.exit_on_flags("leaf")

    def node(idx, level):
        if level == L:
            b.emit(FALLBACK(CSS, (idx,)), "fallback")
            return
        if level == t.depth:
            leaf(idx - t.node_count)
            return
        seps = internal[idx]
        # padding separators sit at the end of a node and can never be exceeded
        real = int(np.count_nonzero(seps != MAX_SENTINEL))

        def decide(lo, hi):
            if lo == hi:
                node(idx * f + lo + 1, level + 1)
                return
            mid = (lo + hi) >> 1
            b.emit(CMP(seps[mid]), "internal")
            jump = b.emit(BR_GT(None), "internal")
            decide(lo, mid)
            b.patch(jump)
            decide(mid + 1, hi)

        decide(0, real)

    node(0, 0)
    return b.program()


# -- compiled index ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CompiledIndex:
    """A decision program in front of the structure it was compiled from."""

    program: SearchProgram
    residual: object
    levels: int
    col: object
    cfg: BinarySearchConfig | None = None
    kind: str = field(default=COLUMN)

    def __post_init__(self):
        first = self.program.instructions[0]
        if self.levels == 0 and not (len(self.program) == 1 and first.op == Op.FALLBACK):
            raise ValueError("a zero-level compilation must be a single FALLBACK")

    def resume(self, exit, key, trace=None):
        if exit.structure == COLUMN:
            lo, hi = exit.descriptor
            return resume_binary_search(self.col, key, lo, hi, self.cfg, trace)
        if exit.structure == CSS:
            (node,) = exit.descriptor
            t = self.residual
            return css_search_from(t, self.col, key, node, css_level_of(node, t.f), trace)
        raise ValueError(f"unknown residual structure {exit.structure!r}")

    def search(self, key, trace=None):
        if key >= MAX_SENTINEL:
            return NOT_FOUND
        out = interpret(self.program, key, trace)
        if isinstance(out, Fallback):
            return self.resume(out, key, trace)
        return out

    @cached_property
    def code_size_report(self):
        from .native import size_report
        return size_report(self.program)

    @property
    def fully_compiled(self):
        return self.program.count(Op.FALLBACK) == 0


def icache_budget(default=ICACHE_BUDGET):
    """Code-size budget in bytes, overridable through the environment ("48K", "65536")."""
    raw = os.environ.get(BUDGET_ENV)
    if not raw:
        return default
    m = re.fullmatch(r"\s*(\d+)\s*([kKmM]?)[bB]?\s*", raw)
    if not m:
        raise ValueError(f"{BUDGET_ENV}={raw!r} is not a byte count")
    scale = {"": 1, "k": 1024, "m": 1024 * 1024}[m.group(2).lower()]
    return int(m.group(1)) * scale


def _largest_within_budget(make_program, max_levels, budget):
    from .native import estimate_code_bytes
    best = make_program(0)
    chosen = 0
    for L in range(1, max_levels + 1):
        program = make_program(L)
        if estimate_code_bytes(program) > budget:
            break
        best, chosen = program, L
    return chosen, best


def compile_binary(col, L=None, cfg=None, budget=None):
    """Compile ``L`` binary-search split levels.

    ``L=None`` picks as many as fit the code-size budget; ``L="full"`` compiles
    every split down to single positions.
    """
    cfg = cfg or BinarySearchConfig()
    if L == FULL:
        L = binary_full_levels(col.n)
    if L is None:
        budget = icache_budget() if budget is None else check_positive_int(budget, "budget")
        L, program = _largest_within_budget(lambda lv: compile_binary_program(col, lv),
                                            binary_full_levels(col.n), budget)
    else:
        program = compile_binary_program(col, L)
    return CompiledIndex(program=program, residual=col, levels=int(L), col=col, cfg=cfg, kind=COLUMN)


def compile_css(t, col=None, L=None, budget=None):
    """Compile ``L`` CSS levels; ``L = t.depth + 1`` includes the leaf blocks."""
    col = t.col if col is None else col
    if L == FULL:
        L = t.depth + 1
    if L is None:
        budget = icache_budget() if budget is None else check_positive_int(budget, "budget")
        L, program = _largest_within_budget(lambda lv: compile_css_program(t, col, lv),
                                            t.depth + 1, budget)
    else:
        program = compile_css_program(t, col, L)
    return CompiledIndex(program=program, residual=t, levels=int(L), col=col, kind=CSS)
