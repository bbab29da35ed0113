"""Python source backend: a search program becomes nested ``if`` statements.

Keys and values end up as literals in the generated function, so a lookup
in the compiled region is a handful of integer comparisons with no array
access. Comparison outcomes that are already known on a path (for example
a ``BR_EQ`` right after a taken ``BR_LT`` on the same flags) are resolved
while generating, not at run time.
"""
from __future__ import annotations

from ..core import NOT_FOUND, SearchResult
from ..validation import MAX_SENTINEL
from .ir import Fallback, Op, validate

MAX_SOURCE_LINES = 400_000
MAX_NESTING = 90  # CPython refuses sources indented 100 levels deep

_TAKEN = {Op.BR_LT: {-1}, Op.BR_EQ: {0}, Op.BR_GT: {1}}
_TEST = {Op.BR_LT: "<", Op.BR_EQ: "==", Op.BR_GT: ">"}
_ALL = frozenset({-1, 0, 1})


class SourceTooLarge(ValueError):
    pass


def python_source(program, name="ng_search"):
    """Source of ``name(key, resume)`` plus the constants it refers to."""
    validate(program)
    ins = program.instructions
    lines = [f"def {name}(key, resume):"]
    consts = {"NOT_FOUND": NOT_FOUND}
    found = {}
    fallbacks = {}

    def const_for(value):
        if value not in found:
            found[value] = f"F{len(found)}"
            consts[found[value]] = SearchResult(True, value)
        return found[value]

    def fallback_for(pc):
        if pc not in fallbacks:
            _, arg, extra = ins[pc]
            fallbacks[pc] = f"X{len(fallbacks)}"
            consts[fallbacks[pc]] = Fallback(arg, extra)
        return fallbacks[pc]

    def emit(text, depth):
        if len(lines) >= MAX_SOURCE_LINES:
            raise SourceTooLarge(f"generated source exceeds {MAX_SOURCE_LINES} lines")
        lines.append("    " * depth + text)

    def walk(pc, depth, literal, known, staged):
        if depth > MAX_NESTING:
            raise SourceTooLarge("program nests too deeply for Python source")
        while True:
            op, arg, _ = ins[pc]
            if op == Op.CMP:
                literal, known = arg, _ALL
                pc += 1
            elif op == Op.SET_VALUE:
                staged = arg
                pc += 1
            elif op in _TAKEN:
                taken = known & _TAKEN[op]
                if not taken:
                    pc += 1
                elif taken == known:
                    pc = arg
                else:
                    emit(f"if key {_TEST[op]} {literal}:", depth)
                    walk(arg, depth + 1, literal, taken, staged)
                    known = known - taken
                    pc += 1
            elif op == Op.JMP:
                pc = arg
            elif op == Op.RET_FOUND:
                emit(f"return {const_for(staged)}", depth)
                return
            elif op == Op.RET_NOTFOUND:
                emit("return NOT_FOUND", depth)
                return
            else:
                emit(f"return resume({fallback_for(pc)}, key)", depth)
                return

    walk(program.entry, 1, None, _ALL, None)
    return "\n".join(lines) + "\n", consts


def compile_python(program, name="ng_search"):
    """The program as a Python function ``f(key, resume)``."""
    source, consts = python_source(program, name)
    namespace = dict(consts)
    exec(compile(source, f"<{name}>", "exec"), namespace)
    return namespace[name], source


class PythonSearch:
    """Generated-source front end over a compiled index's residual."""

    def __init__(self, compiled, name="ng_search"):
        self.compiled = compiled
        self.fn, self.source = compile_python(compiled.program, name)
        self._resume = compiled.resume

    def search(self, key, trace=None):
        if trace is not None:
            # the generated code records nothing; replay through the interpreter
            return self.compiled.search(key, trace)
        if key >= MAX_SENTINEL:
            return NOT_FOUND
        return self.fn(key, self._resume)
