"""JSON mirror of the model schema: hand-authorable test fixtures.

Schema (UTF-8, field names mirror the binary schema):

    {
      "opset_import": [{"domain": "", "version": 13}],
      "graph": {
        "name": "g",
        "node": [
          {"op_type": "Conv", "name": "c0",
           "input": ["x", "w"], "output": ["y"],
           "attribute": {"kernel_shape": [3, 3], "epsilon": 1e-5,
                         "mode": "same",
                         "table": {"dims": [2], "elem_type": "int8",
                                   "data": "<base64>"}}}
        ],
        "initializer": [
          {"name": "w", "dims": [1, 1, 3, 3], "elem_type": "float32",
           "data": "<base64 of little-endian row-major bytes>"}
        ],
        "input":  [{"name": "x", "elem_type": "float32", "dims": [1, 1, 4, 4]}],
        "output": [{"name": "y"}]
      }
    }

Attribute values are typed by JSON shape: int, float (a decimal point or
exponent makes it a float), string, homogeneous lists thereof, or a tensor
object with dims/elem_type/data.  Everything else is rejected.
"""

from __future__ import annotations

import base64
import binascii
import json

from ..errors import MalformedJson
from .model import (
    Attribute,
    ModelDescription,
    NodeDescription,
    RawTensor,
    ValueInfo,
    validate_model,
)


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedJson(msg)


def _tensor_from_json(obj, where: str) -> RawTensor:
    _expect(isinstance(obj, dict), f"{where}: tensor must be an object")
    for key in ("dims", "elem_type", "data"):
        _expect(key in obj, f"{where}: tensor missing {key!r}")
    dims = obj["dims"]
    _expect(
        isinstance(dims, list) and all(isinstance(d, int) and not isinstance(d, bool) for d in dims),
        f"{where}: dims must be a list of ints",
    )
    _expect(isinstance(obj["elem_type"], str), f"{where}: elem_type must be a string")
    _expect(isinstance(obj["data"], str), f"{where}: data must be base64 text")
    try:
        data = base64.b64decode(obj["data"], validate=True)
    except (binascii.Error, ValueError) as e:
        raise MalformedJson(f"{where}: bad base64: {e}") from None
    return RawTensor(dims=tuple(dims), element_type=obj["elem_type"], data=data)


def _attr_from_json(name: str, value, where: str) -> Attribute:
    if isinstance(value, bool):
        raise MalformedJson(f"{where}: attribute {name!r} cannot be a bool")
    if isinstance(value, int):
        return Attribute("int", value)
    if isinstance(value, float):
        return Attribute("float", value)
    if isinstance(value, str):
        return Attribute("string", value)
    if isinstance(value, dict):
        return Attribute("tensor", _tensor_from_json(value, f"{where}.{name}"))
    if isinstance(value, list):
        if all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            return Attribute("ints", tuple(value))
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            return Attribute("floats", tuple(float(v) for v in value))
        if all(isinstance(v, str) for v in value):
            return Attribute("strings", tuple(value))
        raise MalformedJson(f"{where}: attribute {name!r} list is not homogeneous")
    raise MalformedJson(f"{where}: attribute {name!r} has unsupported type")


def _value_info_from_json(obj, where: str) -> ValueInfo:
    _expect(isinstance(obj, dict), f"{where}: must be an object")
    _expect(isinstance(obj.get("name"), str), f"{where}: missing name")
    elem = obj.get("elem_type")
    _expect(elem is None or isinstance(elem, str), f"{where}: elem_type must be string")
    dims = obj.get("dims")
    if dims is not None:
        _expect(
            isinstance(dims, list) and all(isinstance(d, int) and not isinstance(d, bool) for d in dims),
            f"{where}: dims must be a list of ints",
        )
        dims = tuple(dims)
    return ValueInfo(name=obj["name"], elem_type=elem, dims=dims)


def parse_model_json(text: str) -> ModelDescription:
    """Parse the JSON mirror into the same ModelDescription the binary
    parser produces for the equivalent file."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedJson(f"invalid JSON: {e}") from None
    _expect(isinstance(doc, dict), "top level must be an object")

    opsets: list[tuple[str, int]] = []
    for i, entry in enumerate(doc.get("opset_import", [])):
        _expect(isinstance(entry, dict), f"opset_import[{i}] must be an object")
        domain = entry.get("domain", "")
        version = entry.get("version", 0)
        _expect(isinstance(domain, str), f"opset_import[{i}].domain must be string")
        _expect(isinstance(version, int), f"opset_import[{i}].version must be int")
        opsets.append((domain, version))

    graph = doc.get("graph", {})
    _expect(isinstance(graph, dict), "graph must be an object")
    name = graph.get("name", "")
    _expect(isinstance(name, str), "graph.name must be a string")

    nodes: list[NodeDescription] = []
    for i, nd in enumerate(graph.get("node", [])):
        where = f"graph.node[{i}]"
        _expect(isinstance(nd, dict), f"{where}: must be an object")
        op_type = nd.get("op_type", "")
        _expect(isinstance(op_type, str) and op_type, f"{where}: missing op_type")
        for key in ("input", "output"):
            vals = nd.get(key, [])
            _expect(
                isinstance(vals, list) and all(isinstance(v, str) for v in vals),
                f"{where}: {key} must be a list of strings",
            )
        attrs: dict[str, Attribute] = {}
        raw_attrs = nd.get("attribute", {})
        _expect(isinstance(raw_attrs, dict), f"{where}: attribute must be an object")
        for aname, avalue in raw_attrs.items():
            attrs[aname] = _attr_from_json(aname, avalue, where)
        nodes.append(
            NodeDescription(
                op_type=op_type,
                inputs=tuple(nd.get("input", [])),
                outputs=tuple(nd.get("output", [])),
                name=nd.get("name", ""),
                attributes=attrs,
            )
        )

    initializers: dict[str, RawTensor] = {}
    for i, tj in enumerate(graph.get("initializer", [])):
        where = f"graph.initializer[{i}]"
        _expect(isinstance(tj, dict) and isinstance(tj.get("name"), str),
                f"{where}: must be an object with a name")
        if tj["name"] in initializers:
            raise MalformedJson(f"{where}: duplicate initializer {tj['name']!r}")
        initializers[tj["name"]] = _tensor_from_json(tj, where)

    inputs = tuple(
        _value_info_from_json(v, f"graph.input[{i}]")
        for i, v in enumerate(graph.get("input", []))
    )
    outputs = tuple(
        _value_info_from_json(v, f"graph.output[{i}]")
        for i, v in enumerate(graph.get("output", []))
    )

    model = ModelDescription(
        graph_name=name,
        nodes=tuple(nodes),
        initializers=initializers,
        inputs=inputs,
        outputs=outputs,
        opset_imports=tuple(opsets),
    )
    return validate_model(model)


def _tensor_to_json(t: RawTensor) -> dict:
    return {
        "dims": list(t.dims),
        "elem_type": t.element_type,
        "data": base64.b64encode(t.data).decode("ascii"),
    }


def _attr_to_json(a: Attribute):
    if a.kind == "tensor":
        return _tensor_to_json(a.value)
    if a.kind in ("ints", "floats", "strings"):
        return list(a.value)
    if a.kind == "float":
        # keep a decimal marker so the value parses back as a float
        return float(a.value)
    return a.value


def model_to_json(m: ModelDescription, indent: int | None = 1) -> str:
    """Serialize to the JSON mirror; parse_model_json inverts this exactly."""
    doc = {
        "opset_import": [
            {"domain": d, "version": v} for d, v in m.opset_imports
        ],
        "graph": {
            "name": m.graph_name,
            "node": [
                {
                    "op_type": n.op_type,
                    "name": n.name,
                    "input": list(n.inputs),
                    "output": list(n.outputs),
                    "attribute": {k: _attr_to_json(a) for k, a in sorted(n.attributes.items())},
                }
                for n in m.nodes
            ],
            "initializer": [
                {"name": name, **_tensor_to_json(t)}
                for name, t in sorted(m.initializers.items())
            ],
            "input": [_vi_to_json(v) for v in m.inputs],
            "output": [_vi_to_json(v) for v in m.outputs],
        },
    }
    return json.dumps(doc, indent=indent, sort_keys=True)


def _vi_to_json(v: ValueInfo) -> dict:
    out: dict = {"name": v.name}
    if v.elem_type is not None:
        out["elem_type"] = v.elem_type
    if v.dims is not None:
        out["dims"] = list(v.dims)
    return out


__all__ = ["parse_model_json", "model_to_json"]


def load_model(path: str) -> ModelDescription:
    """Load a model file, dispatching on extension (.json vs binary)."""
    from .wire import parse_model

    with open(path, "rb") as fh:
        blob = fh.read()
    if path.endswith(".json"):
        try:
            text = blob.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedJson(f"not UTF-8: {e}") from None
        return parse_model_json(text)
    return parse_model(blob)


__all__.append("load_model")
