"""Minimal protobuf wire encoder used as the independent oracle for the
binary parser tests and the fuzz corpus. Kept deliberately separate from
the package code."""

from __future__ import annotations

import struct


def varint(v: int) -> bytes:
    if v < 0:
        v += 1 << 64
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def tag(field: int, wire: int) -> bytes:
    return varint((field << 3) | wire)


def ld(field: int, payload: bytes) -> bytes:
    return tag(field, 2) + varint(len(payload)) + payload


def vint(field: int, value: int) -> bytes:
    return tag(field, 0) + varint(value)


def string(field: int, s: str) -> bytes:
    return ld(field, s.encode("utf-8"))


def f32(field: int, value: float) -> bytes:
    return tag(field, 5) + struct.pack("<f", value)


def packed_varints(field: int, values) -> bytes:
    return ld(field, b"".join(varint(v) for v in values))


def packed_f32(field: int, values) -> bytes:
    return ld(field, struct.pack(f"<{len(values)}f", *values))


def tensor(name: str, dims, data_type: int, *, raw: bytes | None = None,
           floats=None, ints32=None, ints64=None) -> bytes:
    body = packed_varints(1, dims) if dims else b""
    body += vint(2, data_type)
    if floats is not None:
        body += packed_f32(4, floats)
    if ints32 is not None:
        body += packed_varints(5, ints32)
    if ints64 is not None:
        body += packed_varints(7, ints64)
    if name:
        body += string(8, name)
    if raw is not None:
        body += ld(9, raw)
    return body


def attribute(name: str, kind: str, value) -> bytes:
    body = string(1, name)
    if kind == "int":
        body += vint(3, value) + vint(20, 2)
    elif kind == "float":
        body += f32(2, value) + vint(20, 1)
    elif kind == "string":
        body += string(4, value) + vint(20, 3)
    elif kind == "ints":
        body += packed_varints(8, value) + vint(20, 7)
    elif kind == "floats":
        body += packed_f32(7, value) + vint(20, 6)
    elif kind == "strings":
        body += b"".join(string(9, v) for v in value) + vint(20, 8)
    elif kind == "tensor":
        body += ld(5, value) + vint(20, 4)
    else:
        raise ValueError(kind)
    return body


def node(op_type: str, inputs, outputs, name: str = "", attrs=()) -> bytes:
    body = b"".join(string(1, i) for i in inputs)
    body += b"".join(string(2, o) for o in outputs)
    if name:
        body += string(3, name)
    body += string(4, op_type)
    body += b"".join(ld(5, a) for a in attrs)
    return body


def value_info(name: str, elem_type: int | None = None, dims=None) -> bytes:
    body = string(1, name)
    if elem_type is not None or dims is not None:
        tt = b""
        if elem_type is not None:
            tt += vint(1, elem_type)
        if dims is not None:
            shape = b"".join(ld(1, vint(1, d)) for d in dims)
            tt += ld(2, shape)
        body += ld(2, ld(1, tt))
    return body


def graph(name: str = "", nodes=(), initializers=(), inputs=(), outputs=()) -> bytes:
    body = b"".join(ld(1, n) for n in nodes)
    if name:
        body += string(2, name)
    body += b"".join(ld(5, t) for t in initializers)
    body += b"".join(ld(11, v) for v in inputs)
    body += b"".join(ld(12, v) for v in outputs)
    return body


def model(graph_bytes: bytes | None = None, opsets=(("", 13),)) -> bytes:
    body = vint(1, 8)  # ir_version, skipped by the parser
    body += string(2, "wirehelp")  # producer_name, skipped
    for domain, version in opsets:
        entry = (string(1, domain) if domain else b"") + vint(2, version)
        body += ld(8, entry)
    if graph_bytes is not None:
        body += ld(7, graph_bytes)
    return body
