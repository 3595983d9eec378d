"""QONNX export: a minimal ONNX protobuf writer plus graph assembly for
the trained networks.  Weights stay float32 with Quant nodes carrying the
scale/zero-point/bitwidth, the QONNX convention."""

from __future__ import annotations

import base64
import json
import struct

import numpy as np

# --- protobuf wire encoding ---------------------------------------------------


def _varint(v: int) -> bytes:
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


def _tag(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _ld(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + _varint(len(payload)) + payload


def _vint(field: int, value: int) -> bytes:
    return _tag(field, 0) + _varint(value)


def _string(field: int, s: str) -> bytes:
    return _ld(field, s.encode("utf-8"))


def _f32(field: int, value: float) -> bytes:
    return _tag(field, 5) + struct.pack("<f", value)


ELEM_CODE = {"float32": 1, "int8": 3, "int32": 6, "int64": 7}


def tensor_proto(name: str, arr: np.ndarray) -> bytes:
    dtype = str(arr.dtype)
    body = b""
    if arr.shape:
        body += _ld(1, b"".join(_varint(d) for d in arr.shape))
    body += _vint(2, ELEM_CODE[dtype])
    body += _string(8, name)
    body += _ld(9, np.ascontiguousarray(arr).astype(f"<{arr.dtype.str[1:]}").tobytes())
    return body


def attr_int(name: str, v: int) -> bytes:
    return _string(1, name) + _vint(3, v) + _vint(20, 2)


def attr_float(name: str, v: float) -> bytes:
    return _string(1, name) + _f32(2, v) + _vint(20, 1)


def attr_string(name: str, v: str) -> bytes:
    return _string(1, name) + _string(4, v) + _vint(20, 3)


def attr_ints(name: str, vals) -> bytes:
    return _string(1, name) + _ld(8, b"".join(_varint(v) for v in vals)) + _vint(20, 7)


def node_proto(op_type: str, inputs, outputs, name: str = "", attrs=()) -> bytes:
    body = b"".join(_string(1, i) for i in inputs)
    body += b"".join(_string(2, o) for o in outputs)
    if name:
        body += _string(3, name)
    body += _string(4, op_type)
    body += b"".join(_ld(5, a) for a in attrs)
    return body


def value_info(name: str, elem: int, dims) -> bytes:
    shape = b"".join(_ld(1, _vint(1, d)) for d in dims)
    tensor_type = _vint(1, elem) + _ld(2, shape)
    return _string(1, name) + _ld(2, _ld(1, tensor_type))


def model_proto(graph: bytes, opset_version: int = 13) -> bytes:
    body = _vint(1, 8)  # ir_version
    body += _string(2, "fixtures_gen")
    body += _ld(8, _vint(2, opset_version))  # opset_import
    body += _ld(7, graph)
    return body


# --- graph assembly -----------------------------------------------------------


class GraphBuilder:
    def __init__(self, name: str):
        self.name = name
        self.nodes: list[bytes] = []
        self.initializers: list[bytes] = []
        self.json_nodes: list[dict] = []
        self.json_inits: list[dict] = []
        self.n = 0

    def _fresh(self, stem: str) -> str:
        self.n += 1
        return f"{stem}_{self.n}"

    def const(self, stem: str, arr: np.ndarray) -> str:
        name = self._fresh(stem)
        self.initializers.append(tensor_proto(name, arr))
        self.json_inits.append({
            "name": name, "dims": list(arr.shape), "elem_type": str(arr.dtype),
            "data": base64.b64encode(
                np.ascontiguousarray(arr).astype(f"<{arr.dtype.str[1:]}").tobytes()
            ).decode(),
        })
        return name

    def node(self, op: str, inputs, outputs, name: str = "", attrs=(),
             json_attrs=None) -> None:
        self.nodes.append(node_proto(op, inputs, outputs, name, attrs))
        self.json_nodes.append({
            "op_type": op, "name": name, "input": list(inputs),
            "output": list(outputs), "attribute": json_attrs or {},
        })

    def quant(self, x: str, out: str, scale: float, bits: int, signed: bool,
              name: str = "") -> str:
        s = self.const("scale", np.array(scale, np.float32))
        z = self.const("zp", np.array(0, np.int64))
        b = self.const("bits", np.array(bits, np.int64))
        self.node(
            "Quant", [x, s, z, b], [out], name=name or out,
            attrs=[attr_int("signed", int(signed)), attr_int("narrow", 0),
                   attr_string("rounding_mode", "ROUND")],
            json_attrs={"signed": int(signed), "narrow": 0,
                        "rounding_mode": "ROUND"},
        )
        return out

    def finish(self, input_name: str, input_dims, output_name: str) -> bytes:
        g = b"".join(_ld(1, n) for n in self.nodes)
        g += _string(2, self.name)
        g += b"".join(_ld(5, t) for t in self.initializers)
        g += _ld(11, value_info(input_name, 1, input_dims))
        g += _ld(12, _string(1, output_name))
        return g

    def to_json(self, input_name: str, input_dims, output_name: str) -> str:
        return json.dumps({
            "opset_import": [{"domain": "", "version": 13}],
            "graph": {
                "name": self.name,
                "node": self.json_nodes,
                "initializer": self.json_inits,
                "input": [{"name": input_name, "elem_type": "float32",
                           "dims": list(input_dims)}],
                "output": [{"name": output_name}],
            },
        }, indent=1)


def export_qonnx(params: dict, name: str) -> tuple[bytes, str]:
    """Serialize trained parameters into QONNX binary + JSON mirror.

    params carries float arrays w1,b1,w2,b2,wd,bd, the per-tensor scales
    and bitwidths, optionally bn1/bn2 tuples (gamma, beta, mean, var, eps)
    for the explicit-BatchNormalization variant, and optionally an
    inner_input (scale, bits) pair for the mixed-precision profile.
    """
    g = GraphBuilder(name)
    f32 = lambda a: np.ascontiguousarray(a, dtype=np.float32)

    g.quant("input", "q_in", params["input_scale"], params["input_bits"],
            signed=False, name="q_in")

    def conv_block(idx: int, x: str, w, b, wscale, wbits, act_scale, act_bits,
                   bn=None) -> str:
        wq = g.quant(g.const(f"w{idx}", f32(w)), f"wq{idx}", wscale, wbits,
                     signed=True, name=f"wq{idx}")
        conv_out = f"c{idx}_out"
        g.node("Conv", [x, wq, g.const(f"b{idx}", f32(b))], [conv_out],
               name=f"c{idx}",
               attrs=[attr_ints("kernel_shape", [3, 3]),
                      attr_ints("strides", [1, 1]),
                      attr_ints("pads", [0, 0, 0, 0]),
                      attr_ints("dilations", [1, 1]),
                      attr_int("group", 1)],
               json_attrs={"kernel_shape": [3, 3], "strides": [1, 1],
                           "pads": [0, 0, 0, 0], "dilations": [1, 1],
                           "group": 1})
        cur = conv_out
        if bn is not None:
            gamma, beta, mean, var, eps = bn
            bn_out = f"bn{idx}_out"
            g.node("BatchNormalization",
                   [cur, g.const(f"gamma{idx}", f32(gamma)),
                    g.const(f"beta{idx}", f32(beta)),
                    g.const(f"mean{idx}", f32(mean)),
                    g.const(f"var{idx}", f32(var))],
                   [bn_out], name=f"bn{idx}",
                   attrs=[attr_float("epsilon", eps)],
                   json_attrs={"epsilon": float(np.float32(eps))})
            cur = bn_out
        relu_out = f"relu{idx}_out"
        g.node("Relu", [cur], [relu_out], name=f"relu{idx}")
        act = g.quant(relu_out, f"act{idx}", act_scale, act_bits, signed=False,
                      name=f"act{idx}")
        pool_out = f"p{idx}_out"
        g.node("MaxPool", [act], [pool_out], name=f"p{idx}",
               attrs=[attr_ints("kernel_shape", [2, 2]),
                      attr_ints("strides", [2, 2])],
               json_attrs={"kernel_shape": [2, 2], "strides": [2, 2]})
        return pool_out

    cur = conv_block(0, "q_in", params["w1"], params["b1"],
                     params["w1_scale"], params["w1_bits"],
                     params["a1_scale"], params["a1_bits"],
                     bn=params.get("bn1"))
    if params.get("inner_input") is not None:
        scale, bits = params["inner_input"]
        cur = g.quant(cur, "q_inner", scale, bits, signed=False, name="q_inner")
    cur = conv_block(1, cur, params["w2"], params["b2"],
                     params["w2_scale"], params["w2_bits"],
                     params["a2_scale"], params["a2_bits"],
                     bn=params.get("bn2"))

    flat = "flat_out"
    g.node("Flatten", [cur], [flat], name="flat",
           attrs=[attr_int("axis", 1)], json_attrs={"axis": 1})
    wdq = g.quant(g.const("wd", f32(params["wd"])), "wqd", params["wd_scale"],
                  params["wd_bits"], signed=True, name="wqd")
    g.node("Gemm", [flat, wdq, g.const("bd", f32(params["bd"]))], ["logits"],
           name="d0",
           attrs=[attr_float("alpha", 1.0), attr_float("beta", 1.0),
                  attr_int("transB", 1)],
           json_attrs={"alpha": 1.0, "beta": 1.0, "transB": 1})

    dims = [1, 1, 28, 28]
    return model_proto(g.finish("input", dims, "logits")), \
        g.to_json("input", dims, "logits")
