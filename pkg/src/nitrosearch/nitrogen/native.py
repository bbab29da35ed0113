"""x86-64 assembly emission for decision programs, with a code-size model.

The generated code is split into a small preamble and the SEARCH body.
The preamble keeps the query in ``eax`` (short ``cmp`` encodings), reaches
SEARCH with ``call`` so every exit is a one-byte ``ret``, and decides
found / not found from the flags of the last comparison. SEARCH stages the
candidate value in ``ecx`` unconditionally; a fallback exit leaves its
descriptor slot + 1 in ``r8d``.

Calling convention of the emitted function (System V)::

    int NAME(uint32_t key, uint32_t *value, uint32_t *fallback_slot)
    -> 1 found, 0 not found, 2 fallback (slot written)

The byte counts come from a model of the encodings GNU as picks; when a
toolchain is present the model is checked against the assembled code.
"""
from __future__ import annotations

import csv
import ctypes
import io
import platform
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ..core import NOT_FOUND, SearchResult
from ..validation import MAX_SENTINEL
from .ir import Fallback, Op, validate

# encoding sizes in bytes
CMP_IMM8 = 3      # 83 F8 ib
CMP_IMM32 = 5     # 3D id
MOV_IMM32 = 5     # B9 id
MOV_R8D_IMM32 = 6  # 41 B8 id
JCC_SHORT = 2
JCC_NEAR = 6
JMP_SHORT = 2
JMP_NEAR = 5
RET = 1
SET_ZF = 2        # cmp eax, eax
CLEAR_ZF = 3      # cmp eax, -1 (the sentinel never reaches SEARCH)

_COND = {Op.BR_LT: "jb", Op.BR_EQ: "je", Op.BR_GT: "ja", Op.JMP: "jmp"}

SIZE_COLUMNS = ("region", "bytes", "bytes_per_key")


def _cmp_bytes(k):
    return CMP_IMM8 if k < 128 or k >= 0xFFFFFF80 else CMP_IMM32


class _Jump:
    __slots__ = ("mnemonic", "target", "region", "short")

    def __init__(self, mnemonic, target, region):
        self.mnemonic = mnemonic
        self.target = target
        self.region = region
        self.short = True

    @property
    def size(self):
        if self.short:
            return JMP_SHORT if self.mnemonic == "jmp" else JCC_SHORT
        return JMP_NEAR if self.mnemonic == "jmp" else JCC_NEAR


def _lower(program):
    """IR -> list of (pc, region, text, size) / _Jump items, with peepholes."""
    validate(program)
    ins = program.instructions
    regions = program.regions or ("internal",) * len(ins)
    targets = {}
    for pc, (op, arg, _) in enumerate(ins):
        if op in _COND:
            targets.setdefault(arg, []).append(pc)
    fallbacks = []
    items = []
    pc = 0
    n = len(ins)
    while pc < n:
        op, arg, extra = ins[pc]
        region = regions[pc]
        start = pc
        if (op == Op.BR_EQ and arg == pc + 2 and pc + 2 < n
                and ins[pc + 1].op == Op.RET_NOTFOUND and ins[pc + 2].op == Op.RET_FOUND
                and targets.get(pc + 1, []) == [] and targets.get(pc + 2, []) == [pc]):
            # the caller reads the outcome from the flags
            items.append((start, region, "ret", RET))
            pc += 3
            continue
        if (op == Op.BR_LT and pc + 1 < n and ins[pc + 1].op == Op.BR_EQ
                and ins[pc + 1].arg == arg and pc + 1 not in targets):
            items.append((start, region, _Jump("jbe", arg, region)))
            pc += 2
            continue
        if op == Op.CMP:
            items.append((start, region, f"cmp eax, {arg}", _cmp_bytes(arg)))
        elif op in _COND:
            items.append((start, region, _Jump(_COND[op], arg, region)))
        elif op == Op.SET_VALUE:
            items.append((start, region, f"mov ecx, {arg}", MOV_IMM32))
        elif op == Op.RET_FOUND:
            items.append((start, region, "cmp eax, eax\n    ret", SET_ZF + RET))
        elif op == Op.RET_NOTFOUND:
            items.append((start, region, "cmp eax, -1\n    ret", CLEAR_ZF + RET))
        elif op == Op.FALLBACK:
            fallbacks.append(Fallback(arg, extra))
            items.append((start, region, f"mov r8d, {len(fallbacks)}\n    cmp eax, -1\n    ret",
                          MOV_R8D_IMM32 + CLEAR_ZF + RET))
        pc += 1
    return items, targets, fallbacks


def _relax(items):
    """Grow short jumps that cannot reach their target until nothing changes."""
    while True:
        offsets = {}
        pos = 0
        ends = []
        for it in items:
            offsets.setdefault(it[0], pos)
            size = it[2].size if isinstance(it[2], _Jump) else it[3]
            pos += size
            ends.append(pos)
        changed = False
        for it, end in zip(items, ends):
            j = it[2]
            if isinstance(j, _Jump) and j.short:
                disp = offsets[j.target] - end
                if not -128 <= disp <= 127:
                    j.short = False
                    changed = True
        if not changed:
            return pos, offsets


def _region_bytes(items):
    out = {}
    for it in items:
        size = it[2].size if isinstance(it[2], _Jump) else it[3]
        out[it[1]] = out.get(it[1], 0) + size
    return out


PREAMBLE_BYTES = 48


def estimate_code_bytes(program):
    """Modelled size of the SEARCH body in bytes."""
    items, _, _ = _lower(program)
    total, _ = _relax(items)
    return total


def size_report(program):
    """Rows of (region, bytes, bytes_per_key) for the modelled native code.

    Internal bytes are divided by the separators compared there, leaf bytes by
    the key-value pairs stored there.
    """
    items, _, _ = _lower(program)
    total, _ = _relax(items)
    by_region = _region_bytes(items)
    regions = program.regions or ("internal",) * len(program)
    keys = {"internal": 0, "leaf": 0}
    for ins, region in zip(program.instructions, regions):
        if region == "internal" and ins.op == Op.CMP:
            keys["internal"] += 1
        elif region == "leaf" and ins.op == Op.SET_VALUE:
            keys["leaf"] += 1
    rows = [{"region": "preamble", "bytes": PREAMBLE_BYTES, "bytes_per_key": ""}]
    for region in ("internal", "leaf", "fallback"):
        nbytes = by_region.get(region, 0)
        count = keys.get(region, 0)
        rows.append({"region": region, "bytes": nbytes,
                     "bytes_per_key": round(nbytes / count, 3) if count else ""})
    rows.append({"region": "search_total", "bytes": total, "bytes_per_key": ""})
    return rows


def write_size_report(rows, fh=None):
    out = fh if fh is not None else io.StringIO()
    writer = csv.DictWriter(out, fieldnames=SIZE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in SIZE_COLUMNS})
    return out.getvalue() if fh is None else None


@dataclass(frozen=True)
class NativeCode:
    name: str
    text: str
    fallbacks: tuple
    search_bytes: int
    report: tuple

    def write(self, path):
        Path(path).write_text(self.text)


def emit_native(program, name="ng_search"):
    """Assembly text (GNU as, Intel syntax) plus the modelled size report."""
    items, targets, fallbacks = _lower(program)
    total, _ = _relax(items)
    body = f"{name}_search"
    lines = [
        ".intel_syntax noprefix",
        ".text",
        f".globl {name}",
        f".type {name}, @function",
        f"{name}:",
        "    push rbp",
        "    mov rbp, rsp",
        "    mov eax, edi",
        "    xor r8d, r8d",
        f"    call {body}",
        "    mov eax, 0",
        f"    jne .L{name}_miss",
        "    mov eax, 1",
        "    mov dword ptr [rsi], ecx",
        f".L{name}_exit:",
        "    leave",
        "    ret",
        f".L{name}_miss:",
        "    test r8d, r8d",
        f"    jz .L{name}_exit",
        "    lea eax, [r8 - 1]",
        "    mov dword ptr [rdx], eax",
        "    mov eax, 2",
        f"    jmp .L{name}_exit",
        f".size {name}, .-{name}",
        f".globl {body}",
        f".type {body}, @function",
        f"{body}:",
    ]
    for it in items:
        if it[0] in targets:
            lines.append(f".L{name}_{it[0]}:")
        if isinstance(it[2], _Jump):
            lines.append(f"    {it[2].mnemonic} .L{name}_{it[2].target}")
        else:
            lines.append(f"    {it[2]}")
    lines += [
        f".globl {name}_end",
        f"{name}_end:",
        f".size {body}, .-{body}",
        '.section .note.GNU-stack,"",@progbits',
        "",
    ]
    return NativeCode(name=name, text="\n".join(lines), fallbacks=tuple(fallbacks),
                      search_bytes=total, report=tuple(size_report(program)))


# -- optional assemble-and-load path ---------------------------------------------

class NativeUnavailable(RuntimeError):
    pass


def native_supported():
    return platform.system() == "Linux" and platform.machine() in ("x86_64", "AMD64") \
        and shutil.which("gcc") is not None


class NativeSearch:
    """Assembled program loaded through ctypes, fronting a compiled index's residual."""

    def __init__(self, compiled, name="ng_search", workdir=None):
        if not native_supported():
            raise NativeUnavailable("needs gcc on x86-64 Linux")
        self.compiled = compiled
        self.code = emit_native(compiled.program, name)
        self._tmp = None
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="nitro-")
            workdir = self._tmp.name
        src = Path(workdir) / f"{name}.s"
        lib = Path(workdir) / f"{name}.so"
        self.code.write(src)
        proc = subprocess.run(["gcc", "-shared", "-nostdlib", "-o", str(lib), str(src)],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            raise NativeUnavailable(f"assembly failed: {proc.stderr.strip()}")
        self.lib = ctypes.CDLL(str(lib))
        fn = getattr(self.lib, name)
        fn.argtypes = (ctypes.c_uint32, ctypes.POINTER(ctypes.c_uint32), ctypes.POINTER(ctypes.c_uint32))
        fn.restype = ctypes.c_int
        self._fn = fn
        self._value = ctypes.c_uint32()
        self._slot = ctypes.c_uint32()
        start = ctypes.cast(getattr(self.lib, f"{name}_search"), ctypes.c_void_p).value
        end = ctypes.cast(getattr(self.lib, f"{name}_end"), ctypes.c_void_p).value
        self.assembled_search_bytes = end - start

    def run(self, key):
        """Raw outcome of the native code: SearchResult or Fallback."""
        rc = self._fn(key, ctypes.byref(self._value), ctypes.byref(self._slot))
        if rc == 1:
            return SearchResult(True, self._value.value)
        if rc == 0:
            return NOT_FOUND
        return self.code.fallbacks[self._slot.value]

    def search(self, key, trace=None):
        if key >= MAX_SENTINEL:
            return NOT_FOUND
        out = self.run(key)
        if isinstance(out, Fallback):
            return self.compiled.resume(out, key, trace)
        return out
