"""Neutral model description produced by both the binary and JSON parsers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import CyclicGraph, DanglingInput, SizeMismatch, UnsupportedElementType

# Element types we materialize. Keys are ONNX TensorProto.DataType codes.
ELEM_TYPES: dict[int, tuple[str, str]] = {
    1: ("float32", "<f4"),
    2: ("uint8", "<u1"),
    3: ("int8", "<i1"),
    4: ("uint16", "<u2"),
    5: ("int16", "<i2"),
    6: ("int32", "<i4"),
    7: ("int64", "<i8"),
    9: ("bool", "<u1"),
    11: ("float64", "<f8"),
    12: ("uint32", "<u4"),
    13: ("uint64", "<u8"),
}
ELEM_NAMES = {name: (code, dt) for code, (name, dt) in ELEM_TYPES.items()}


def elem_name(code: int) -> str:
    if code not in ELEM_TYPES:
        raise UnsupportedElementType(f"element type code {code} not supported")
    return ELEM_TYPES[code][0]


def elem_size(name: str) -> int:
    return int(ELEM_NAMES[name][1][2:])


@dataclass(frozen=True)
class RawTensor:
    """Dense tensor payload: little-endian row-major bytes."""

    dims: tuple[int, ...]
    element_type: str
    data: bytes

    def __post_init__(self) -> None:
        if self.element_type not in ELEM_NAMES:
            raise UnsupportedElementType(
                f"element type {self.element_type!r} not supported"
            )
        if any(d < 0 for d in self.dims):
            raise SizeMismatch(f"negative dimension in {self.dims}")
        count = 1
        for d in self.dims:
            count *= d
        if count * elem_size(self.element_type) != len(self.data):
            raise SizeMismatch(
                f"{self.element_type}{list(self.dims)} needs "
                f"{count * elem_size(self.element_type)} bytes, got {len(self.data)}"
            )


def read_tensor(raw: RawTensor) -> np.ndarray:
    """Decode a RawTensor into a numpy array, bit patterns preserved."""
    dtype = ELEM_NAMES[raw.element_type][1]
    arr = np.frombuffer(raw.data, dtype=dtype).reshape(raw.dims)
    if raw.element_type == "bool":
        arr = arr.astype(bool)
    return arr


def tensor_from_array(arr: np.ndarray) -> RawTensor:
    """Inverse of read_tensor, used by tests and the JSON serializer."""
    name = str(arr.dtype)
    if name not in ELEM_NAMES:
        raise UnsupportedElementType(f"dtype {name} not supported")
    le = arr.astype(ELEM_NAMES[name][1], copy=False)
    return RawTensor(dims=tuple(arr.shape), element_type=name, data=le.tobytes())


@dataclass(frozen=True)
class ValueInfo:
    name: str
    elem_type: str | None = None
    dims: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Attribute:
    """Typed node attribute: kind in {int, float, string, ints, floats, strings, tensor}."""

    kind: str
    value: object

    def __post_init__(self) -> None:
        if self.kind not in ("int", "float", "string", "ints", "floats", "strings", "tensor"):
            raise ValueError(f"unknown attribute kind {self.kind!r}")


@dataclass(frozen=True)
class NodeDescription:
    op_type: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    name: str = ""
    attributes: dict[str, Attribute] = field(default_factory=dict)

    def attr(self, name: str, default=None):
        a = self.attributes.get(name)
        return default if a is None else a.value


@dataclass(frozen=True)
class ModelDescription:
    graph_name: str
    nodes: tuple[NodeDescription, ...]
    initializers: dict[str, RawTensor]
    inputs: tuple[ValueInfo, ...]
    outputs: tuple[ValueInfo, ...]
    opset_imports: tuple[tuple[str, int], ...] = ()


def toposort_nodes(
    nodes: list[NodeDescription],
    available: set[str],
) -> list[NodeDescription]:
    """Stable topological order of nodes; `available` seeds the ready set.

    Raises DanglingInput when a node consumes a name nothing produces and
    CyclicGraph when no order exists.  Empty input names (absent optional
    inputs) are ignored.
    """
    producers: dict[str, int] = {}
    for i, n in enumerate(nodes):
        for out in n.outputs:
            if out:
                producers[out] = i
    for n in nodes:
        for inp in n.inputs:
            if inp and inp not in available and inp not in producers:
                raise DanglingInput(
                    f"node {n.name or n.op_type!r} consumes undefined {inp!r}"
                )

    order: list[NodeDescription] = []
    done: set[str] = set(available)
    emitted = [False] * len(nodes)
    remaining = len(nodes)
    while remaining:
        progressed = False
        for i, n in enumerate(nodes):
            if emitted[i]:
                continue
            if all((not inp) or inp in done for inp in n.inputs):
                emitted[i] = True
                order.append(n)
                done.update(out for out in n.outputs if out)
                remaining -= 1
                progressed = True
        if not progressed:
            raise CyclicGraph("graph has no topological order")
    return order


def validate_model(m: ModelDescription) -> ModelDescription:
    """Checks name uniqueness and DAG-ness; returns the model with nodes
    in topological order."""
    seen_out: set[str] = set()
    for n in m.nodes:
        for out in n.outputs:
            if out and out in seen_out:
                raise CyclicGraph(f"duplicate node output name {out!r}")
            if out:
                seen_out.add(out)
    available = {vi.name for vi in m.inputs} | set(m.initializers)
    ordered = toposort_nodes(list(m.nodes), available)
    if list(m.nodes) == ordered:
        return m
    return ModelDescription(
        graph_name=m.graph_name,
        nodes=tuple(ordered),
        initializers=m.initializers,
        inputs=m.inputs,
        outputs=m.outputs,
        opset_imports=m.opset_imports,
    )
