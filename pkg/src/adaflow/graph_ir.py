"""Layer-level IR: shape inference, quantization annotation extraction,
batch-norm folding, and activation fusion.

The builder walks the model's single activation chain and absorbs:
  * ``Quant`` nodes into per-layer activation/weight QuantParams,
  * ``BatchNormalization`` into the preceding convolution's float weights,
  * ``Relu`` into the preceding compute layer (applied at requantization),
  * ``Reshape``/``Flatten`` into edge bookkeeping for the dense layer.

Weights end up as integer codes; biases live in the lossless accumulator
domain (scale = act_in.scale * weights.scale) with the activation
zero-point correction folded in, so the MAC path is a plain integer dot
product over raw codes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    MissingQuantization,
    NonConstantBN,
    OrphanBN,
    ShapeMismatch,
    UnsupportedOp,
    WidthOverflow,
)
from .fixedpoint import FxFormat, QuantParams, mac_format, round_to_int
from .qonnx_io import ModelDescription, NodeDescription, read_tensor

SUPPORTED_OPS = {
    "Conv", "MaxPool", "Relu", "BatchNormalization", "Gemm", "MatMul",
    "Add", "Reshape", "Flatten", "Quant",
}

# Raw source stream domain: 8-bit pixels p representing p/256. The model's
# input Quant node is lowered to a hardware requantizer from this domain.
PIXEL_QUANT = QuantParams(scale=1.0 / 256, zero_point=0, bitwidth=8, signed=False)

_ROUNDING_FROM_QONNX = {
    "ROUND": "half_even",
    "HALF_EVEN": "half_even",
    "HALF_UP": "half_up",
    "FLOOR": "floor",
}


@dataclass(frozen=True, eq=False)
class LayerNode:
    """One layer of the network: Conv, MaxPool, or Dense.

    eq is disabled because weights are ndarrays; use layers_equal.
    """

    kind: str
    name: str
    in_shape: tuple[int, int, int]   # (channels, height, width)
    out_shape: tuple[int, int, int]
    act_in: QuantParams
    act_out: QuantParams | None = None      # None only on the final layer
    weights_q: QuantParams | None = None
    fused_relu: bool = False
    kernel_h: int = 0
    kernel_w: int = 0
    stride: int = 1
    weights: np.ndarray | None = None   # Conv: (out_ch, in_ch, kh, kw); Dense: (out, in) c-major
    bias: np.ndarray | None = None      # accumulator-domain codes, zero-point folded

    def __post_init__(self) -> None:
        if self.kind not in ("Conv", "MaxPool", "Dense"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "Conv":
            expect = (self.out_channels, self.in_channels, self.kernel_h, self.kernel_w)
            if self.weights.shape != expect:
                raise ShapeMismatch(
                    f"{self.name}: weight shape {self.weights.shape} != {expect}"
                )
        if self.kind == "Dense":
            if self.weights.shape != (self.out_features, self.in_features):
                raise ShapeMismatch(
                    f"{self.name}: weight shape {self.weights.shape} != "
                    f"({self.out_features}, {self.in_features})"
                )
        if self.bias is not None:
            fmt = self.acc_format
            top = int(np.abs(self.bias).max(initial=0))
            if not (fmt.contains(top) and fmt.contains(-top)):
                raise WidthOverflow(
                    f"{self.name}: bias exceeds accumulator format {fmt.word_bits}b"
                )

    @property
    def in_channels(self) -> int:
        return self.in_shape[0]

    @property
    def out_channels(self) -> int:
        return self.out_shape[0]

    @property
    def in_features(self) -> int:
        c, h, w = self.in_shape
        return c * h * w

    @property
    def out_features(self) -> int:
        c, h, w = self.out_shape
        return c * h * w

    @property
    def mac_terms(self) -> int:
        if self.kind == "Conv":
            return self.kernel_h * self.kernel_w * self.in_channels
        if self.kind == "Dense":
            return self.in_features
        return 1

    @property
    def acc_format(self) -> FxFormat:
        if self.weights_q is None:
            return self.act_in.code_format()
        return mac_format(
            self.act_in.code_format(), self.weights_q.code_format(), self.mac_terms
        )

    @property
    def requant_in_scale(self) -> float:
        """Real value of one accumulator unit (shared by all execution paths)."""
        return self.act_in.scale * self.weights_q.scale


@dataclass(frozen=True)
class PrecisionProfile:
    name: str
    assignments: tuple[tuple[int, int], ...]  # per layer: (act bits, weight bits)


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    """Topologically ordered single-chain layer graph.

    input_quant is the first activation domain (the model's input Quant);
    source_quant, when set, is the raw stream domain the Source emits
    (pixel codes) and implies an input requantizer in the lowered network.
    """

    layers: tuple[LayerNode, ...]
    input_shape: tuple[int, int, int]
    input_quant: QuantParams | None
    source_quant: QuantParams | None = None
    name: str = ""

    @property
    def num_classes(self) -> int | None:
        return self.layers[-1].out_features if self.layers else None

    @property
    def edges(self) -> list[tuple[str, str, tuple[int, int, int]]]:
        names = ["input"] + [l.name for l in self.layers] + ["output"]
        shapes = [self.input_shape] + [l.out_shape for l in self.layers]
        return [
            (names[i], names[i + 1], shapes[i]) for i in range(len(names) - 1)
        ]

    def validate_shapes(self) -> None:
        prev = self.input_shape
        for layer in self.layers:
            if layer.in_features != prev[0] * prev[1] * prev[2]:
                raise ShapeMismatch(
                    f"{layer.name}: expects {layer.in_shape}, gets {prev}"
                )
            prev = layer.out_shape


# ---------------------------------------------------------------------------
# builder internals


@dataclass
class LayerDraft:
    """A layer with float weights, before BN folding and quantization."""

    kind: str
    name: str
    in_shape: tuple[int, int, int]
    out_shape: tuple[int, int, int]
    act_in: QuantParams
    act_out: QuantParams | None = None
    weights_q: QuantParams | None = None
    fused_relu: bool = False
    kernel_h: int = 0
    kernel_w: int = 0
    stride: int = 1
    weights_f: np.ndarray | None = None  # float, model layout
    bias_f: np.ndarray | None = None     # float, per output channel/feature
    bn: dict[str, np.ndarray] | None = None  # gamma, beta, mean, var, eps


def conv_out_hw(h: int, w: int, kh: int, kw: int, stride: int = 1) -> tuple[int, int]:
    return ((h - kh) // stride + 1, (w - kw) // stride + 1)


def _quant_params_from_node(
    node: NodeDescription, consts: dict[str, np.ndarray]
) -> QuantParams:
    if len(node.inputs) < 4:
        raise UnsupportedOp(f"Quant node {node.name!r} needs x, scale, zero_point, bitwidth")
    vals = []
    for name in node.inputs[1:4]:
        if name not in consts:
            raise UnsupportedOp(f"Quant node {node.name!r}: {name!r} is not constant")
        arr = consts[name]
        if arr.size != 1:
            raise UnsupportedOp(
                f"Quant node {node.name!r}: per-channel quantization not supported"
            )
        vals.append(arr.reshape(()))
    scale, zero_point, bits = float(vals[0]), int(vals[1]), int(vals[2])
    mode = node.attr("rounding_mode", "ROUND")
    if mode not in _ROUNDING_FROM_QONNX:
        raise UnsupportedOp(f"Quant rounding mode {mode!r} not supported")
    try:
        return QuantParams(
            scale=scale,
            zero_point=zero_point,
            bitwidth=bits,
            signed=bool(node.attr("signed", 1)),
            narrow=bool(node.attr("narrow", 0)),
            rounding=_ROUNDING_FROM_QONNX[mode],
        )
    except ValueError as e:
        raise UnsupportedOp(f"Quant node {node.name!r}: {e}") from None


def _ints_attr(node: NodeDescription, name: str, default):
    v = node.attr(name, default)
    return tuple(int(x) for x in v)


def _input_shape(m: ModelDescription) -> tuple[str, tuple[int, int, int]]:
    graph_inputs = [vi for vi in m.inputs if vi.name not in m.initializers]
    if len(graph_inputs) != 1:
        raise ShapeMismatch(f"expected exactly one graph input, got {len(graph_inputs)}")
    vi = graph_inputs[0]
    if vi.dims is None:
        raise ShapeMismatch(f"graph input {vi.name!r} has no shape")
    dims = tuple(vi.dims)
    if len(dims) == 4:
        if dims[0] not in (0, 1):
            raise ShapeMismatch(f"batch dimension must be 1, got {dims[0]}")
        dims = dims[1:]
    if len(dims) != 3:
        raise ShapeMismatch(f"graph input {vi.name!r}: expected CHW dims, got {list(dims)}")
    if any(d <= 0 for d in dims):
        raise ShapeMismatch(f"graph input {vi.name!r}: non-positive dims {list(dims)}")
    return vi.name, dims


def _resolve_weight_quant(
    wname: str,
    producers: dict[str, NodeDescription],
    consts: dict[str, np.ndarray],
    layer: str,
) -> tuple[np.ndarray, QuantParams]:
    node = producers.get(wname)
    if node is None or node.op_type != "Quant":
        raise MissingQuantization(f"{layer}: weights {wname!r} lack a Quant node")
    xname = node.inputs[0]
    if xname not in consts:
        raise MissingQuantization(f"{layer}: quantized weights are not constant")
    params = _quant_params_from_node(node, consts)
    if params.zero_point != 0:
        raise UnsupportedOp(f"{layer}: weight zero-point must be 0 (symmetric)")
    return consts[xname].astype(np.float64), params


def build_drafts(m: ModelDescription) -> tuple[list[LayerDraft], tuple[int, int, int], QuantParams | None]:
    """Walk the activation chain into LayerDrafts (float weights, BN intact)."""
    for node in m.nodes:
        if node.op_type not in SUPPORTED_OPS:
            raise UnsupportedOp(f"op {node.op_type!r} not supported")

    consts = {name: read_tensor(t) for name, t in m.initializers.items()}
    producers: dict[str, NodeDescription] = {}
    consumers: dict[str, list[NodeDescription]] = {}
    for node in m.nodes:
        for out in node.outputs:
            producers[out] = node
        for inp in node.inputs:
            if inp:
                consumers.setdefault(inp, []).append(node)

    input_name, shape = _input_shape(m)

    drafts: list[LayerDraft] = []
    domain: QuantParams | None = None
    open_draft: LayerDraft | None = None
    flatten_pending = False
    current = input_name

    def close_open() -> None:
        nonlocal open_draft
        if open_draft is not None:
            drafts.append(open_draft)
            open_draft = None

    def require_closed(op: str) -> None:
        if open_draft is not None:
            raise MissingQuantization(
                f"{open_draft.name}: compute layer feeds {op} without an output Quant"
            )

    while True:
        users = consumers.get(current, [])
        if not users:
            break
        if len(users) > 1:
            raise UnsupportedOp(f"tensor {current!r} fans out to {len(users)} nodes")
        node = users[0]
        op = node.op_type

        if op == "Quant":
            params = _quant_params_from_node(node, consts)
            if open_draft is not None:
                open_draft.act_out = params
                close_open()
            domain = params
        elif op == "Conv":
            require_closed("Conv")
            if domain is None:
                raise MissingQuantization(f"{node.name or 'Conv'}: no input quantization")
            if flatten_pending:
                raise UnsupportedOp("Conv after Flatten is not supported")
            open_draft = _conv_draft(node, shape, domain, producers, consts)
            shape = open_draft.out_shape
        elif op == "BatchNormalization":
            if open_draft is None or open_draft.kind != "Conv" or open_draft.fused_relu:
                raise OrphanBN(
                    f"{node.name or 'BatchNormalization'} does not directly follow a Conv"
                )
            if open_draft.bn is not None:
                raise OrphanBN(f"{open_draft.name}: second BatchNormalization")
            open_draft.bn = _bn_params(node, consts)
        elif op == "Relu":
            if open_draft is None:
                raise UnsupportedOp("Relu without a preceding compute layer")
            open_draft.fused_relu = True
        elif op == "MaxPool":
            require_closed("MaxPool")
            if domain is None:
                raise MissingQuantization(f"{node.name or 'MaxPool'}: no input quantization")
            draft = _pool_draft(node, shape, domain)
            drafts.append(draft)
            shape = draft.out_shape
        elif op in ("Reshape", "Flatten"):
            require_closed(op)
            flatten_pending = True
        elif op in ("Gemm", "MatMul"):
            require_closed(op)
            if domain is None:
                raise MissingQuantization(f"{node.name or op}: no input quantization")
            open_draft, node = _dense_draft(node, shape, domain, producers, consumers, consts)
            shape = open_draft.out_shape
            flatten_pending = False
        elif op == "Add":
            raise UnsupportedOp("Add outside a MatMul+Add pair is not supported")
        else:  # pragma: no cover - guarded by SUPPORTED_OPS
            raise UnsupportedOp(f"op {op!r} not supported")

        current = node.outputs[0]

    close_open()
    input_quant = drafts[0].act_in if drafts else domain
    return drafts, shape, input_quant


def _conv_draft(node, shape, domain, producers, consts) -> LayerDraft:
    c, h, w = shape
    if _ints_attr(node, "pads", (0, 0, 0, 0)) != (0, 0, 0, 0):
        raise UnsupportedOp(f"{node.name or 'Conv'}: padding not supported (valid only)")
    if _ints_attr(node, "dilations", (1, 1)) != (1, 1):
        raise UnsupportedOp(f"{node.name or 'Conv'}: dilations not supported")
    if int(node.attr("group", 1)) != 1:
        raise UnsupportedOp(f"{node.name or 'Conv'}: grouped conv not supported")
    strides = _ints_attr(node, "strides", (1, 1))
    if strides != (1, 1):
        raise UnsupportedOp(f"{node.name or 'Conv'}: stride {strides} not supported")
    weights, wq = _resolve_weight_quant(node.inputs[1], producers, consts, node.name or "Conv")
    if weights.ndim != 4:
        raise ShapeMismatch(f"{node.name or 'Conv'}: weights must be 4-D")
    kh, kw = _ints_attr(node, "kernel_shape", weights.shape[2:])
    out_ch, in_ch = weights.shape[0], weights.shape[1]
    if (kh, kw) != weights.shape[2:]:
        raise ShapeMismatch(f"{node.name or 'Conv'}: kernel_shape mismatch")
    if in_ch != c:
        raise ShapeMismatch(f"{node.name or 'Conv'}: expects {in_ch} channels, gets {c}")
    if kh > h or kw > w:
        raise ShapeMismatch(f"{node.name or 'Conv'}: kernel larger than input")
    bias = None
    if len(node.inputs) > 2 and node.inputs[2]:
        bname = node.inputs[2]
        if bname not in consts:
            raise UnsupportedOp(f"{node.name or 'Conv'}: bias must be a constant")
        bias = consts[bname].astype(np.float64).reshape(-1)
        if bias.shape != (out_ch,):
            raise ShapeMismatch(f"{node.name or 'Conv'}: bias shape {bias.shape}")
    oh, ow = conv_out_hw(h, w, kh, kw)
    return LayerDraft(
        kind="Conv",
        name=node.name or f"conv{id(node) % 1000}",
        in_shape=shape,
        out_shape=(out_ch, oh, ow),
        act_in=domain,
        weights_q=wq,
        kernel_h=kh,
        kernel_w=kw,
        weights_f=weights,
        bias_f=bias,
    )


def _pool_draft(node, shape, domain) -> LayerDraft:
    c, h, w = shape
    kernel = _ints_attr(node, "kernel_shape", ())
    strides = _ints_attr(node, "strides", kernel)
    if kernel != (2, 2) or strides != (2, 2):
        raise UnsupportedOp(
            f"{node.name or 'MaxPool'}: only 2x2 stride-2 pooling supported"
        )
    if _ints_attr(node, "pads", (0, 0, 0, 0)) != (0, 0, 0, 0):
        raise UnsupportedOp(f"{node.name or 'MaxPool'}: padding not supported")
    if h < 2 or w < 2:
        raise ShapeMismatch(f"{node.name or 'MaxPool'}: input {h}x{w} too small")
    oh, ow = conv_out_hw(h, w, 2, 2, stride=2)
    return LayerDraft(
        kind="MaxPool",
        name=node.name or "pool",
        in_shape=shape,
        out_shape=(c, oh, ow),
        act_in=domain,
        act_out=domain,
        kernel_h=2,
        kernel_w=2,
        stride=2,
    )


def _dense_draft(node, shape, domain, producers, consumers, consts):
    """Build a Dense draft from Gemm or MatMul(+Add); returns (draft, last node)."""
    name = node.name or "dense"
    if node.op_type == "Gemm":
        if float(node.attr("alpha", 1.0)) != 1.0 or float(node.attr("beta", 1.0)) != 1.0:
            raise UnsupportedOp(f"{name}: Gemm alpha/beta must be 1")
        weights, wq = _resolve_weight_quant(node.inputs[1], producers, consts, name)
        if weights.ndim != 2:
            raise ShapeMismatch(f"{name}: Gemm weights must be 2-D")
        if not int(node.attr("transB", 0)):
            weights = weights.T
        bias = None
        if len(node.inputs) > 2 and node.inputs[2]:
            if node.inputs[2] not in consts:
                raise UnsupportedOp(f"{name}: bias must be a constant")
            bias = consts[node.inputs[2]].astype(np.float64).reshape(-1)
        last = node
    else:  # MatMul, optionally followed by Add
        weights, wq = _resolve_weight_quant(node.inputs[1], producers, consts, name)
        if weights.ndim != 2:
            raise ShapeMismatch(f"{name}: MatMul weights must be 2-D")
        weights = weights.T  # MatMul stores (in, out)
        bias = None
        last = node
        nxt = consumers.get(node.outputs[0], [])
        if len(nxt) == 1 and nxt[0].op_type == "Add":
            add = nxt[0]
            other = [i for i in add.inputs if i != node.outputs[0]]
            if len(other) == 1 and other[0] in consts:
                bias = consts[other[0]].astype(np.float64).reshape(-1)
                last = add

    out_features, in_features = weights.shape
    c, h, w = shape
    if in_features != c * h * w:
        raise ShapeMismatch(
            f"{name}: weights expect {in_features} features, input has {c * h * w}"
        )
    if bias is not None and bias.shape != (out_features,):
        raise ShapeMismatch(f"{name}: bias shape {bias.shape}")
    draft = LayerDraft(
        kind="Dense",
        name=name,
        in_shape=shape,
        out_shape=(out_features, 1, 1),
        act_in=domain,
        weights_q=wq,
        weights_f=weights,
        bias_f=bias,
    )
    return draft, last


def _bn_params(node, consts) -> dict[str, np.ndarray]:
    if len(node.inputs) < 5:
        raise NonConstantBN(f"{node.name or 'BatchNormalization'}: needs 5 inputs")
    names = node.inputs[1:5]
    if any(n not in consts for n in names):
        raise NonConstantBN(
            f"{node.name or 'BatchNormalization'}: parameters must be constant"
        )
    gamma, beta, mean, var = (consts[n].astype(np.float64).reshape(-1) for n in names)
    eps = float(node.attr("epsilon", 1e-5))
    return {"gamma": gamma, "beta": beta, "mean": mean, "var": var, "eps": eps}


def fold_batchnorm(drafts: list[LayerDraft]) -> list[LayerDraft]:
    """Fold BN parameters into the preceding conv's float weights and bias.

    Per output channel c with s_c = gamma_c / sqrt(var_c + eps):
    w'_c = w_c * s_c and b'_c = (b_c - mean_c) * s_c + beta_c.
    """
    out: list[LayerDraft] = []
    for d in drafts:
        if d.bn is None:
            out.append(d)
            continue
        bn = d.bn
        n = d.out_shape[0]
        for key in ("gamma", "beta", "mean", "var"):
            if bn[key].shape != (n,):
                raise NonConstantBN(f"{d.name}: BN {key} shape {bn[key].shape} != ({n},)")
        s = bn["gamma"] / np.sqrt(bn["var"] + bn["eps"])
        weights = d.weights_f * s.reshape(-1, 1, 1, 1)
        bias = d.bias_f if d.bias_f is not None else np.zeros(n)
        bias = (bias - bn["mean"]) * s + bn["beta"]
        out.append(replace(d, weights_f=weights, bias_f=bias, bn=None))
    return out


def _quantize_array(arr: np.ndarray, p: QuantParams) -> np.ndarray:
    if p.rounding == "half_even":
        codes = np.rint(arr / p.scale) + p.zero_point  # rint ties to even
    else:
        codes = np.array(
            [round_to_int(float(x) / p.scale, p.rounding) + p.zero_point
             for x in arr.reshape(-1)],
            dtype=np.float64,
        ).reshape(arr.shape)
    return np.clip(codes, p.qmin, p.qmax).astype(np.int64)


def finalize_drafts(
    drafts: list[LayerDraft],
    input_shape: tuple[int, int, int],
    input_quant: QuantParams | None,
    name: str = "",
    source_quant: QuantParams | None = None,
) -> NetworkGraph:
    """Quantize folded drafts into integer LayerNodes."""
    layers = []
    for d in drafts:
        if d.bn is not None:
            raise OrphanBN(f"{d.name}: unfolded BatchNormalization")
        weights = bias = None
        if d.kind in ("Conv", "Dense"):
            weights = _quantize_array(d.weights_f, d.weights_q)
            acc_scale = d.act_in.scale * d.weights_q.scale
            bias_f = d.bias_f if d.bias_f is not None else np.zeros(d.out_shape[0])
            bias = np.array(
                [round_to_int(float(b) / acc_scale, "half_even") for b in bias_f],
                dtype=np.int64,
            )
            # activation zero-point correction: acc = sum(a*w) + bias with raw codes
            za = d.act_in.zero_point
            if za:
                axes = tuple(range(1, weights.ndim))
                bias = bias - za * weights.sum(axis=axes)
        layers.append(
            LayerNode(
                kind=d.kind,
                name=d.name,
                in_shape=d.in_shape,
                out_shape=d.out_shape,
                act_in=d.act_in,
                act_out=d.act_out,
                weights_q=d.weights_q,
                fused_relu=d.fused_relu,
                kernel_h=d.kernel_h,
                kernel_w=d.kernel_w,
                stride=d.stride,
                weights=weights,
                bias=bias,
            )
        )
    g = NetworkGraph(
        layers=tuple(layers),
        input_shape=input_shape,
        input_quant=input_quant,
        source_quant=source_quant,
        name=name,
    )
    g.validate_shapes()
    return g


def build_ir(
    m: ModelDescription, source_quant: QuantParams | None = PIXEL_QUANT
) -> NetworkGraph:
    """ModelDescription -> NetworkGraph (full pipeline).

    The source stream defaults to the raw pixel domain; pass None to make
    the Source emit first-layer activation codes directly.
    """
    drafts, _, input_quant = build_drafts(m)
    drafts = fold_batchnorm(drafts)
    _, input_shape = _input_shape(m)
    return finalize_drafts(
        drafts, input_shape, input_quant, name=m.graph_name,
        source_quant=source_quant,
    )


def extract_profile(g: NetworkGraph, name: str | None = None) -> PrecisionProfile:
    """Per-layer (activation bits, weight bits); weightless layers mirror
    their activation bits.  The canonical name reflects the weighted
    layers: a graph is uniform when they all carry the same (A, W) and
    every activation matches that A."""
    assignments = []
    weighted = []
    for layer in g.layers:
        a = layer.act_in.bitwidth
        w = layer.weights_q.bitwidth if layer.weights_q is not None else a
        assignments.append((a, w))
        if layer.weights_q is not None:
            weighted.append((a, w))
    if name is None:
        acts = {a for a, _ in assignments}
        if not assignments:
            name = "Empty"
        elif weighted and len(set(weighted)) == 1 and acts == {weighted[0][0]}:
            name = f"A{weighted[0][0]}-W{weighted[0][1]}"
        elif not weighted and len(acts) == 1:
            a = acts.pop()
            name = f"A{a}-W{a}"
        else:
            name = "Mixed"
    return PrecisionProfile(name=name, assignments=tuple(assignments))


def layers_equal(a: LayerNode, b: LayerNode) -> bool:
    for f in ("kind", "name", "in_shape", "out_shape", "act_in", "act_out",
              "weights_q", "fused_relu", "kernel_h", "kernel_w", "stride"):
        if getattr(a, f) != getattr(b, f):
            return False
    for f in ("weights", "bias"):
        x, y = getattr(a, f), getattr(b, f)
        if (x is None) != (y is None):
            return False
        if x is not None and (x.shape != y.shape or not (x == y).all()):
            return False
    return True


def graphs_equal(a: NetworkGraph, b: NetworkGraph) -> bool:
    return (
        a.input_shape == b.input_shape
        and a.input_quant == b.input_quant
        and a.source_quant == b.source_quant
        and len(a.layers) == len(b.layers)
        and all(layers_equal(x, y) for x, y in zip(a.layers, b.layers))
    )
