"""Loop-free decision programs with keys embedded as literals.

A program compares the query against literals and branches forward only.
It ends by returning a staged value, reporting a miss, or handing the query
to the generic search of a residual structure (``FALLBACK``).
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import NamedTuple

from ..core import NOT_FOUND, SearchResult


class Op(enum.IntEnum):
    CMP = 0
    BR_LT = 1
    BR_EQ = 2
    BR_GT = 3
    JMP = 4
    SET_VALUE = 5
    RET_FOUND = 6
    RET_NOTFOUND = 7
    FALLBACK = 8


BRANCHES = frozenset({Op.BR_LT, Op.BR_EQ, Op.BR_GT, Op.JMP})
TERMINATORS = frozenset({Op.RET_FOUND, Op.RET_NOTFOUND, Op.FALLBACK, Op.JMP})


class Instr(NamedTuple):
    op: Op
    arg: object = None
    extra: object = None


class Fallback(NamedTuple):
    """Query left the compiled region; ``descriptor`` says where to resume."""

    structure: str
    descriptor: tuple


class MalformedProgram(Exception):
    pass


@dataclass(frozen=True, eq=False)
class SearchProgram:
    instructions: tuple
    entry: int = 0
    regions: tuple = ()
    """Optional per-instruction tag ("internal", "leaf", "fallback") for size reports."""

    def __len__(self):
        return len(self.instructions)

    def count(self, op):
        return sum(1 for ins in self.instructions if ins.op == op)

    def literals(self):
        """CMP literals in program order."""
        return [ins.arg for ins in self.instructions if ins.op == Op.CMP]


def CMP(k):
    return Instr(Op.CMP, int(k))


def BR_LT(t):
    return Instr(Op.BR_LT, t)


def BR_EQ(t):
    return Instr(Op.BR_EQ, t)


def BR_GT(t):
    return Instr(Op.BR_GT, t)


def JMP(t):
    return Instr(Op.JMP, t)


def SET_VALUE(v):
    return Instr(Op.SET_VALUE, int(v))


RET_FOUND = Instr(Op.RET_FOUND)
RET_NOTFOUND = Instr(Op.RET_NOTFOUND)


def FALLBACK(structure, descriptor):
    return Instr(Op.FALLBACK, structure, tuple(int(d) for d in descriptor))


def validate(program):
    """Check the structural contract; raises :class:`MalformedProgram`.

    Jumps must point forward and in range, no path may run off the end,
    every conditional branch must follow a CMP on all paths, and
    RET_FOUND must follow a SET_VALUE on all paths.
    """
    ins = program.instructions
    n = len(ins)
    if n == 0:
        raise MalformedProgram("empty program")
    if not 0 <= program.entry < n:
        raise MalformedProgram(f"entry {program.entry} out of range")
    if program.regions and len(program.regions) != n:
        raise MalformedProgram("region tags do not match instruction count")
    # (flags defined, value staged) meet over all incoming edges
    state = [None] * n
    state[program.entry] = (False, False)

    def merge(target, st, src):
        if not src < target < n:
            raise MalformedProgram(f"instruction {src}: jump target {target} is not forward and in range")
        old = state[target]
        state[target] = st if old is None else (old[0] and st[0], old[1] and st[1])

    for pc in range(program.entry, n):
        st = state[pc]
        if st is None:
            continue
        op, arg, _ = ins[pc]
        flags, staged = st
        if op == Op.CMP:
            if not isinstance(arg, int):
                raise MalformedProgram(f"instruction {pc}: CMP needs an integer literal")
            merge(pc + 1, (True, staged), pc) if pc + 1 < n else _fall_off(pc)
        elif op in (Op.BR_LT, Op.BR_EQ, Op.BR_GT):
            if not flags:
                raise MalformedProgram(f"instruction {pc}: branch without a preceding CMP")
            merge(arg, st, pc)
            merge(pc + 1, st, pc) if pc + 1 < n else _fall_off(pc)
        elif op == Op.JMP:
            merge(arg, st, pc)
        elif op == Op.SET_VALUE:
            merge(pc + 1, (flags, True), pc) if pc + 1 < n else _fall_off(pc)
        elif op == Op.RET_FOUND:
            if not staged:
                raise MalformedProgram(f"instruction {pc}: RET_FOUND without a staged value")
        elif op == Op.FALLBACK:
            if not isinstance(arg, str) or not isinstance(ins[pc].extra, tuple):
                raise MalformedProgram(f"instruction {pc}: bad FALLBACK operands")
        elif op != Op.RET_NOTFOUND:
            raise MalformedProgram(f"instruction {pc}: unknown opcode {op!r}")
    return program


def _fall_off(pc):
    raise MalformedProgram(f"instruction {pc}: control falls off the end of the program")


def interpret(program, key, trace=None):
    """Run ``program`` on ``key``; returns a SearchResult or a Fallback."""
    ins = program.instructions
    n = len(ins)
    pc = program.entry
    order = None
    staged = None
    for _ in range(n):
        if not 0 <= pc < n:
            raise MalformedProgram(f"program counter {pc} out of range")
        op, arg, extra = ins[pc]
        if op == Op.CMP:
            if trace is not None:
                trace.compare()
            order = (key > arg) - (key < arg)
            pc += 1
        elif op == Op.SET_VALUE:
            staged = arg
            pc += 1
        elif op <= Op.BR_GT:
            if order is None:
                raise MalformedProgram(f"instruction {pc}: branch without a preceding CMP")
            taken = order < 0 if op == Op.BR_LT else order == 0 if op == Op.BR_EQ else order > 0
            if taken:
                if arg <= pc:
                    raise MalformedProgram(f"instruction {pc}: backward jump")
                pc = arg
            else:
                pc += 1
        elif op == Op.JMP:
            if arg <= pc:
                raise MalformedProgram(f"instruction {pc}: backward jump")
            pc = arg
        elif op == Op.RET_FOUND:
            if staged is None:
                raise MalformedProgram(f"instruction {pc}: RET_FOUND without a staged value")
            return SearchResult(True, staged)
        elif op == Op.RET_NOTFOUND:
            return NOT_FOUND
        elif op == Op.FALLBACK:
            return Fallback(arg, extra)
        else:
            raise MalformedProgram(f"instruction {pc}: unknown opcode {op!r}")
    raise MalformedProgram("step budget exhausted; program is not loop-free")


# -- text form -----------------------------------------------------------------

def format_instr(ins):
    op, arg, extra = ins
    if op == Op.FALLBACK:
        return " ".join([op.name, arg, *map(str, extra)])
    if arg is None:
        return op.name
    return f"{op.name} {arg}"


def dump(program):
    """One instruction per line as ``idx: OPCODE operands``."""
    lines = [f"{i}: {format_instr(ins)}" for i, ins in enumerate(program.instructions)]
    return "\n".join(lines) + "\n"


_LINE = re.compile(r"^\s*(\d+):\s*([A-Z_]+)((?:\s+\S+)*)\s*$")


def parse(text, entry=0):
    instructions = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise MalformedProgram(f"line {lineno}: cannot parse {line!r}")
        idx, name, rest = int(m.group(1)), m.group(2), m.group(3).split()
        if idx != len(instructions):
            raise MalformedProgram(f"line {lineno}: expected index {len(instructions)}, got {idx}")
        try:
            op = Op[name]
        except KeyError:
            raise MalformedProgram(f"line {lineno}: unknown opcode {name}") from None
        if op == Op.FALLBACK:
            instructions.append(FALLBACK(rest[0], [int(x) for x in rest[1:]]))
        elif op in (Op.RET_FOUND, Op.RET_NOTFOUND):
            instructions.append(Instr(op))
        else:
            instructions.append(Instr(op, int(rest[0])))
    return SearchProgram(tuple(instructions), entry)
