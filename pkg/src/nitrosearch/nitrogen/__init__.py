"""Index compilation: the top of an index as a loop-free decision program."""
from .compiler import CompiledIndex, compile_binary, compile_css, icache_budget
from .ir import (
    Fallback, Instr, MalformedProgram, Op, SearchProgram, dump, interpret, parse, validate,
)
from .native import NativeSearch, NativeUnavailable, emit_native, native_supported, size_report
from .pygen import PythonSearch, SourceTooLarge, compile_python, python_source

__all__ = [
    "CompiledIndex", "Fallback", "Instr", "MalformedProgram", "NativeSearch", "NativeUnavailable",
    "Op", "PythonSearch", "SearchProgram", "SourceTooLarge", "compile_binary", "compile_css",
    "compile_python", "dump", "emit_native", "icache_budget", "interpret", "native_supported",
    "parse", "python_source", "size_report", "validate",
]
