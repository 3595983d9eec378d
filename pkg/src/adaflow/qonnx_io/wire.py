"""Reader for the ONNX binary wire encoding (Protocol Buffers subset).

The decoder is hand-rolled: tag-length-value records with varint keys.
Unknown fields are skipped silently; structural damage (truncated varints,
lengths overrunning the buffer, deprecated group wire types) raises
MalformedWire.

Field numbers are fixed by the ONNX schema.  The subset consumed here:

    ModelProto       2: producer_name (s)   3: producer_version (s)
                     7: graph (m)           8: opset_import (m)
    OperatorSetId    1: domain (s)          2: version (i)
    GraphProto       1: node (m)            2: name (s)
                     5: initializer (m)    11: input (m)
                    12: output (m)         13: value_info (m)
    NodeProto        1: input (s*)          2: output (s*)
                     3: name (s)            4: op_type (s)
                     5: attribute (m)
    AttributeProto   1: name (s)    2: f    3: i    4: s    5: t (m)
                     7: floats*     8: ints*        9: strings*
                    20: type (enum)
    TensorProto      1: dims (i*)           2: data_type (enum)
                     4: float_data*         5: int32_data*
                     7: int64_data*         8: name (s)
                     9: raw_data (b)       10: double_data*
                    11: uint64_data*
    ValueInfoProto   1: name (s)            2: type (m)
    TypeProto        1: tensor_type (m)
    TypeProto.Tensor 1: elem_type (enum)    2: shape (m)
    TensorShapeProto 1: dim (m)
    Dimension        1: dim_value (i)

(s)=string (i)=int64 (m)=message (b)=bytes (*)=repeated, packed accepted.
"""

from __future__ import annotations

import struct

from ..errors import MalformedWire
from .model import (
    ELEM_TYPES,
    Attribute,
    ModelDescription,
    NodeDescription,
    RawTensor,
    ValueInfo,
    elem_name,
    validate_model,
)

_WIRE_VARINT = 0
_WIRE_I64 = 1
_WIRE_LEN = 2
_WIRE_I32 = 5


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    for i in range(10):
        if pos >= len(buf):
            raise MalformedWire("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << (7 * i)
        if not b & 0x80:
            return result & 0xFFFFFFFFFFFFFFFF, pos
    raise MalformedWire("varint longer than 10 bytes")


def _signed64(v: int) -> int:
    return v - (1 << 64) if v >= (1 << 63) else v


def _read_tag(buf: bytes, pos: int) -> tuple[int, int, int]:
    key, pos = _read_varint(buf, pos)
    field, wire = key >> 3, key & 0x7
    if field == 0:
        raise MalformedWire("field number 0")
    return field, wire, pos


def _read_len(buf: bytes, pos: int) -> tuple[bytes, int]:
    n, pos = _read_varint(buf, pos)
    if n > len(buf) - pos:
        raise MalformedWire(f"length {n} overruns buffer")
    return buf[pos : pos + n], pos + n


def _skip(buf: bytes, pos: int, wire: int) -> int:
    if wire == _WIRE_VARINT:
        _, pos = _read_varint(buf, pos)
        return pos
    if wire == _WIRE_I64:
        if pos + 8 > len(buf):
            raise MalformedWire("truncated fixed64")
        return pos + 8
    if wire == _WIRE_LEN:
        _, pos = _read_len(buf, pos)
        return pos
    if wire == _WIRE_I32:
        if pos + 4 > len(buf):
            raise MalformedWire("truncated fixed32")
        return pos + 4
    raise MalformedWire(f"unsupported wire type {wire}")


def _decode_str(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MalformedWire(f"invalid UTF-8 in string field: {e}") from None


def _fields(buf: bytes):
    """Iterate (field, wire, payload) over a message buffer.

    payload is bytes for LEN fields, the varint value for VARINT fields,
    and raw 4/8-byte slices for fixed-width fields.
    """
    pos = 0
    while pos < len(buf):
        field, wire, pos = _read_tag(buf, pos)
        if wire == _WIRE_VARINT:
            val, pos = _read_varint(buf, pos)
            yield field, wire, val
        elif wire == _WIRE_LEN:
            data, pos = _read_len(buf, pos)
            yield field, wire, data
        elif wire == _WIRE_I64:
            if pos + 8 > len(buf):
                raise MalformedWire("truncated fixed64")
            yield field, wire, buf[pos : pos + 8]
            pos += 8
        elif wire == _WIRE_I32:
            if pos + 4 > len(buf):
                raise MalformedWire("truncated fixed32")
            yield field, wire, buf[pos : pos + 4]
            pos += 4
        else:
            raise MalformedWire(f"unsupported wire type {wire}")


def _packed_varints(payload, wire) -> list[int]:
    if wire == _WIRE_VARINT:
        return [payload]
    vals = []
    pos = 0
    while pos < len(payload):
        v, pos = _read_varint(payload, pos)
        vals.append(v)
    return vals


def _packed_f32(payload, wire) -> list[float]:
    if wire == _WIRE_I32:
        return [struct.unpack("<f", payload)[0]]
    if wire != _WIRE_LEN or len(payload) % 4:
        raise MalformedWire("bad packed float field")
    return list(struct.unpack(f"<{len(payload) // 4}f", payload))


def _packed_f64(payload, wire) -> list[float]:
    if wire == _WIRE_I64:
        return [struct.unpack("<d", payload)[0]]
    if wire != _WIRE_LEN or len(payload) % 8:
        raise MalformedWire("bad packed double field")
    return list(struct.unpack(f"<{len(payload) // 8}d", payload))


def _parse_tensor(buf: bytes) -> tuple[str, RawTensor]:
    dims: list[int] = []
    data_type = 0
    raw_data: bytes | None = None
    f32: list[float] = []
    f64: list[float] = []
    i32: list[int] = []
    i64: list[int] = []
    u64: list[int] = []
    name = ""
    for field, wire, payload in _fields(buf):
        if field == 1:
            dims += [_signed64(v) for v in _packed_varints(payload, wire)]
        elif field == 2 and wire == _WIRE_VARINT:
            data_type = payload
        elif field == 4:
            f32 += _packed_f32(payload, wire)
        elif field == 5:
            i32 += [_signed64(v) for v in _packed_varints(payload, wire)]
        elif field == 7:
            i64 += [_signed64(v) for v in _packed_varints(payload, wire)]
        elif field == 8 and wire == _WIRE_LEN:
            name = _decode_str(payload)
        elif field == 9 and wire == _WIRE_LEN:
            raw_data = payload
        elif field == 10:
            f64 += _packed_f64(payload, wire)
        elif field == 11:
            u64 += _packed_varints(payload, wire)
        else:
            pass  # skipped (doc_string, segment, external_data, ...)
    etype = elem_name(data_type)
    if raw_data is not None:
        data = raw_data
    else:
        data = _typed_payload(etype, f32, f64, i32, i64, u64)
    return name, RawTensor(dims=tuple(dims), element_type=etype, data=data)


def _typed_payload(etype, f32, f64, i32, i64, u64) -> bytes:
    """Serialize proto typed-array storage to little-endian bytes."""
    try:
        if etype == "float32":
            return struct.pack(f"<{len(f32)}f", *f32)
        if etype == "float64":
            return struct.pack(f"<{len(f64)}d", *f64)
        if etype == "int64":
            return struct.pack(f"<{len(i64)}q", *i64)
        if etype in ("uint64", "uint32"):
            fmt = "Q" if etype == "uint64" else "I"
            return struct.pack(f"<{len(u64)}{fmt}", *u64)
        # int8/uint8/int16/uint16/int32/bool all live in int32_data
        fmt = {"int8": "b", "uint8": "B", "int16": "h", "uint16": "H",
               "int32": "i", "bool": "B"}[etype]
        return struct.pack(f"<{len(i32)}{fmt}", *i32)
    except struct.error as e:
        raise MalformedWire(f"typed tensor data out of range: {e}") from None


def _parse_attribute(buf: bytes) -> tuple[str, Attribute | None]:
    name = ""
    declared = 0
    f = i = s = t = None
    floats: list[float] = []
    ints: list[int] = []
    strings: list[str] = []
    for field, wire, payload in _fields(buf):
        if field == 1 and wire == _WIRE_LEN:
            name = _decode_str(payload)
        elif field == 2:
            got = _packed_f32(payload, wire)
            f = got[-1] if got else f
        elif field == 3 and wire == _WIRE_VARINT:
            i = _signed64(payload)
        elif field == 4 and wire == _WIRE_LEN:
            s = _decode_str(payload)
        elif field == 5 and wire == _WIRE_LEN:
            _, t = _parse_tensor(payload)
        elif field == 7:
            floats += _packed_f32(payload, wire)
        elif field == 8:
            ints += [_signed64(v) for v in _packed_varints(payload, wire)]
        elif field == 9 and wire == _WIRE_LEN:
            strings.append(_decode_str(payload))
        elif field == 20 and wire == _WIRE_VARINT:
            declared = payload
    by_type = {
        1: ("float", f), 2: ("int", i), 3: ("string", s), 4: ("tensor", t),
        6: ("floats", tuple(floats)), 7: ("ints", tuple(ints)),
        8: ("strings", tuple(strings)),
    }
    if declared in by_type:
        kind, value = by_type[declared]
        if value is None:
            value = {"float": 0.0, "int": 0, "string": ""}.get(kind)
        return name, Attribute(kind, value) if value is not None else None
    # no or unsupported declared type: infer from populated fields
    for kind, value in (("int", i), ("float", f), ("string", s), ("tensor", t)):
        if value is not None:
            return name, Attribute(kind, value)
    for kind, value in (("ints", tuple(ints)), ("floats", tuple(floats)),
                        ("strings", tuple(strings))):
        if value:
            return name, Attribute(kind, value)
    return name, None


def _parse_node(buf: bytes) -> NodeDescription:
    inputs: list[str] = []
    outputs: list[str] = []
    name = ""
    op_type = ""
    attributes: dict[str, Attribute] = {}
    for field, wire, payload in _fields(buf):
        if field == 1 and wire == _WIRE_LEN:
            inputs.append(_decode_str(payload))
        elif field == 2 and wire == _WIRE_LEN:
            outputs.append(_decode_str(payload))
        elif field == 3 and wire == _WIRE_LEN:
            name = _decode_str(payload)
        elif field == 4 and wire == _WIRE_LEN:
            op_type = _decode_str(payload)
        elif field == 5 and wire == _WIRE_LEN:
            aname, attr = _parse_attribute(payload)
            if attr is not None:
                attributes[aname] = attr
    return NodeDescription(
        op_type=op_type, inputs=tuple(inputs), outputs=tuple(outputs),
        name=name, attributes=attributes,
    )


def _parse_value_info(buf: bytes) -> ValueInfo:
    name = ""
    elem: str | None = None
    dims: tuple[int, ...] | None = None
    for field, wire, payload in _fields(buf):
        if field == 1 and wire == _WIRE_LEN:
            name = _decode_str(payload)
        elif field == 2 and wire == _WIRE_LEN:
            for f2, w2, p2 in _fields(payload):       # TypeProto
                if f2 == 1 and w2 == _WIRE_LEN:       # tensor_type
                    for f3, w3, p3 in _fields(p2):
                        if f3 == 1 and w3 == _WIRE_VARINT:
                            if p3 in ELEM_TYPES:
                                elem = elem_name(p3)
                        elif f3 == 2 and w3 == _WIRE_LEN:  # shape
                            got: list[int] = []
                            for f4, w4, p4 in _fields(p3):
                                if f4 == 1 and w4 == _WIRE_LEN:  # dim
                                    dv = 0
                                    for f5, w5, p5 in _fields(p4):
                                        if f5 == 1 and w5 == _WIRE_VARINT:
                                            dv = _signed64(p5)
                                    got.append(dv)
                            dims = tuple(got)
    return ValueInfo(name=name, elem_type=elem, dims=dims)


def _parse_graph(buf: bytes) -> tuple[str, list, dict, list, list]:
    name = ""
    nodes: list[NodeDescription] = []
    initializers: dict[str, RawTensor] = {}
    inputs: list[ValueInfo] = []
    outputs: list[ValueInfo] = []
    for field, wire, payload in _fields(buf):
        if field == 1 and wire == _WIRE_LEN:
            nodes.append(_parse_node(payload))
        elif field == 2 and wire == _WIRE_LEN:
            name = _decode_str(payload)
        elif field == 5 and wire == _WIRE_LEN:
            tname, tensor = _parse_tensor(payload)
            if tname in initializers:
                raise MalformedWire(f"duplicate initializer {tname!r}")
            initializers[tname] = tensor
        elif field == 11 and wire == _WIRE_LEN:
            inputs.append(_parse_value_info(payload))
        elif field == 12 and wire == _WIRE_LEN:
            outputs.append(_parse_value_info(payload))
    return name, nodes, initializers, inputs, outputs


def parse_model(data: bytes) -> ModelDescription:
    """Parse a serialized ONNX/QONNX model into a ModelDescription.

    Total over arbitrary input: returns a value or raises an AdaflowError
    subclass, never anything else.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_model expects bytes")
    data = bytes(data)
    graph = None
    opsets: list[tuple[str, int]] = []
    for field, wire, payload in _fields(data):
        if field == 7 and wire == _WIRE_LEN:
            graph = _parse_graph(payload)
        elif field == 8 and wire == _WIRE_LEN:
            domain, version = "", 0
            for f2, w2, p2 in _fields(payload):
                if f2 == 1 and w2 == _WIRE_LEN:
                    domain = _decode_str(p2)
                elif f2 == 2 and w2 == _WIRE_VARINT:
                    version = _signed64(p2)
            opsets.append((domain, version))
        elif field in (7, 8):
            raise MalformedWire(f"model field {field} has wire type {wire}")
    if graph is None:
        name, nodes, initializers, inputs, outputs = "", [], {}, [], []
    else:
        name, nodes, initializers, inputs, outputs = graph
    model = ModelDescription(
        graph_name=name,
        nodes=tuple(nodes),
        initializers=initializers,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        opset_imports=tuple(opsets),
    )
    return validate_model(model)


__all__ = ["parse_model"]
