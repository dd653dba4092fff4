"""Binary snapshot codec for VmState.

Self-describing, length-prefixed, versioned; the exact layout is
documented in docs/snapshot-format.md.  restore(snapshot(s)) == s under
deep equality, including output log, step counter, and the breakpoint
hit counter.
"""

from __future__ import annotations

import struct

from .interp import Frame, VmState

MAGIC = b"CSNP"
VERSION = 1

_TAG_INT = 0
_TAG_TRUE = 1
_TAG_FALSE = 2


class SnapshotDecodeError(Exception):
    pass


def _pack_str(out: bytearray, text: str) -> None:
    data = text.encode("utf-8")
    out += struct.pack("<I", len(data))
    out += data


def _pack_value(out: bytearray, value) -> None:
    if isinstance(value, bool):
        out.append(_TAG_TRUE if value else _TAG_FALSE)
    else:
        out.append(_TAG_INT)
        out += struct.pack("<q", value)


def _pack_bindings(out: bytearray, bindings) -> None:
    out += struct.pack("<I", len(bindings))
    for name, value in bindings:
        _pack_str(out, name)
        _pack_value(out, value)


def snapshot(state: VmState) -> bytes:
    out = bytearray()
    out += MAGIC
    out.append(VERSION)
    _pack_bindings(out, state.globals)
    out += struct.pack("<I", len(state.call_stack))
    for frame in state.call_stack:
        _pack_str(out, frame.func)
        out += struct.pack("<I", frame.pc)
        _pack_bindings(out, frame.locals)
    out += struct.pack("<I", len(state.output_log))
    for value in state.output_log:
        out += struct.pack("<q", value)
    out += struct.pack("<q", state.step_counter)
    out += struct.pack("<q", state.bp_hits)
    if state.fault is None:
        out.append(0)
    else:
        out.append(1)
        _pack_str(out, state.fault)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise SnapshotDecodeError("truncated snapshot")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotDecodeError(f"bad string: {exc}") from exc

    def value(self):
        tag = self.take(1)[0]
        if tag == _TAG_INT:
            return self.i64()
        if tag == _TAG_TRUE:
            return True
        if tag == _TAG_FALSE:
            return False
        raise SnapshotDecodeError(f"bad value tag {tag}")

    def bindings(self) -> tuple:
        return tuple((self.string(), self.value()) for _ in range(self.u32()))


def restore(data: bytes) -> VmState:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise SnapshotDecodeError("bad magic")
    version = r.take(1)[0]
    if version != VERSION:
        raise SnapshotDecodeError(f"unsupported snapshot version {version}")
    globals_ = r.bindings()
    frames = []
    for _ in range(r.u32()):
        func = r.string()
        pc = r.u32()
        frames.append(Frame(func=func, pc=pc, locals=r.bindings()))
    output = tuple(r.i64() for _ in range(r.u32()))
    steps = r.i64()
    bp_hits = r.i64()
    fault = r.string() if r.take(1)[0] else None
    if r.pos != len(r.data):
        raise SnapshotDecodeError("trailing bytes in snapshot")
    return VmState(
        globals=globals_,
        call_stack=tuple(frames),
        output_log=output,
        step_counter=steps,
        bp_hits=bp_hits,
        fault=fault,
    )
