"""Lower a NetworkGraph onto the streaming template.

Per layer:
    Conv    -> LineBuffer -> Conv <- {WeightStore, BiasStore} -> Requant
    MaxPool -> LineBuffer(2x2, per channel) -> MaxPool
    Dense   -> Dense <- {WeightStore(columns), BiasStore} -> Requant

A Requant always follows Conv/Dense; on the final layer, where no output
quantization exists, it degenerates to an identity passthrough so logits
stay in the accumulator domain.  When a layer's input QuantParams differ
from the incoming stream's domain an extra input Requant is inserted in
front of the layer (the mixed-precision entry point).
"""

from __future__ import annotations

import numpy as np

from ..errors import UnloweredLayerKind
from ..fixedpoint import FxFormat, QuantParams
from ..graph_ir import LayerNode, NetworkGraph, extract_profile
from .structure import Actor, ActorNetwork, Channel, ChannelFormat

# slack multiplier over the minimal deadlock-free burst capacity
CAPACITY_SLACK = 2


class _Builder:
    def __init__(self) -> None:
        self.actors: list[Actor] = []
        self.channels: list[Channel] = []

    def actor(self, aid: str, kind: str, config: dict, position) -> str:
        self.actors.append(Actor(id=aid, kind=kind, config=config, position=position))
        return aid

    def channel(self, src, dst, fmt: FxFormat, arity: int, capacity: int) -> None:
        self.channels.append(
            Channel(
                id=f"c{len(self.channels):02d}",
                src=src, dst=dst, capacity=capacity,
                token=ChannelFormat(fmt=fmt, arity=arity),
            )
        )


def _stream_weights(layer: LayerNode) -> np.ndarray:
    """Conv kernels reordered to the window element order (dy, dx, c)."""
    return np.ascontiguousarray(
        layer.weights.transpose(0, 2, 3, 1).reshape(layer.out_channels, -1)
    )


def _stream_columns(layer: LayerNode) -> np.ndarray:
    """Dense weight columns in stream arrival order (y, x, c)."""
    c, h, w = layer.in_shape
    cmajor = np.arange(layer.in_features).reshape(c, h, w)
    stream = cmajor.transpose(1, 2, 0).reshape(-1)  # stream j -> c-major index
    return np.ascontiguousarray(layer.weights[:, stream].T)  # (in, out)


def lower(g: NetworkGraph) -> ActorNetwork:
    """NetworkGraph -> ActorNetwork with stable actor ids."""
    for layer in g.layers:
        if layer.kind not in ("Conv", "MaxPool", "Dense"):
            raise UnloweredLayerKind(f"{layer.name}: no template for {layer.kind}")

    b = _Builder()
    profile = extract_profile(g)

    in_c, in_h, in_w = g.input_shape
    src_quant = g.source_quant or g.input_quant
    src_fmt = src_quant.code_format() if src_quant else FxFormat(32)
    b.actor(
        "source", "Source",
        {"shape": g.input_shape, "quant": src_quant, "format": src_fmt},
        position=(-1, "source"),
    )
    # (actor id, port, format, per-firing burst, tokens/inference)
    tail = ("source", "out", src_fmt, in_w * in_c, in_h * in_w * in_c)
    domain: QuantParams | None = src_quant
    shape = g.input_shape

    if g.source_quant is not None and g.input_quant is not None:
        rq = b.actor(
            "input_requant", "Requant",
            {
                "in_scale": g.source_quant.scale,
                "in_zero_point": g.source_quant.zero_point,
                "out": g.input_quant,
                "relu": False,
                "acc_format": g.source_quant.code_format(),
            },
            position=(-1, "requant"),
        )
        b.channel(tail[:2], (rq, "in"), tail[2], 1, CAPACITY_SLACK * tail[3])
        tail = (rq, "out", g.input_quant.code_format(), tail[3], tail[4])
        domain = g.input_quant

    for i, layer in enumerate(g.layers):
        if domain is not None and layer.act_in != domain:
            rq = b.actor(
                f"L{i}_requant_in", "Requant",
                {
                    "in_scale": domain.scale,
                    "in_zero_point": domain.zero_point,
                    "out": layer.act_in,
                    "relu": False,
                    "acc_format": domain.code_format(),
                },
                position=(i, "requant_in"),
            )
            b.channel(tail[:2], (rq, "in"), tail[2], 1, CAPACITY_SLACK * tail[3])
            tail = (rq, "out", layer.act_in.code_format(), tail[3], tail[4])
        domain = layer.act_in

        if layer.kind == "Conv":
            tail = _lower_conv(b, i, layer, tail)
        elif layer.kind == "MaxPool":
            tail = _lower_pool(b, i, layer, tail)
        else:
            tail = _lower_dense(b, i, layer, tail)
        domain = layer.act_out
        shape = layer.out_shape

    expected = shape[0] * shape[1] * shape[2] if g.layers else in_h * in_w * in_c
    b.actor("sink", "Sink", {"count": expected}, position=(len(g.layers), "sink"))
    b.channel(tail[:2], ("sink", "in"), tail[2], 1, CAPACITY_SLACK * tail[3])

    return ActorNetwork(
        actors=tuple(b.actors),
        channels=tuple(b.channels),
        profile_name=profile.name,
        meta={"assignments": [list(a) for a in profile.assignments],
              "input_shape": list(g.input_shape),
              "graph_name": g.name},
    )


def _lower_conv(b: _Builder, i: int, layer: LayerNode, tail):
    c, h, w = layer.in_shape
    oc, oh, ow = layer.out_shape
    act_fmt = layer.act_in.code_format()
    acc_fmt = layer.acc_format
    n_windows = oh * ow
    win_arity = layer.kernel_h * layer.kernel_w * c

    lb = b.actor(
        f"L{i}_linebuf", "LineBuffer",
        {"in_shape": layer.in_shape, "kernel": (layer.kernel_h, layer.kernel_w),
         "stride": 1, "per_channel": False, "format": act_fmt,
         "storage": (layer.kernel_h - 1) * w * c + layer.kernel_w * c,
         "act_bits": layer.act_in.bitwidth},
        position=(i, "linebuf"),
    )
    b.channel(tail[:2], (lb, "in"), tail[2], 1, CAPACITY_SLACK * tail[3])

    ws = b.actor(
        f"L{i}_weights", "WeightStore",
        {"weights": _stream_weights(layer), "count": n_windows,
         "format": layer.weights_q.code_format(),
         "params": oc * win_arity, "weight_bits": layer.weights_q.bitwidth},
        position=(i, "weights"),
    )
    bs = b.actor(
        f"L{i}_bias", "BiasStore",
        {"bias": layer.bias, "count": n_windows, "format": acc_fmt},
        position=(i, "bias"),
    )
    conv = b.actor(
        f"L{i}_conv", "Conv",
        {"out_channels": oc, "window_size": win_arity, "acc_format": acc_fmt,
         "macs": n_windows * oc * win_arity, "positions": n_windows,
         "act_bits": layer.act_in.bitwidth,
         "weight_bits": layer.weights_q.bitwidth},
        position=(i, "conv"),
    )
    b.channel((lb, "win"), (conv, "window"), act_fmt, win_arity, CAPACITY_SLACK * ow)
    b.channel((ws, "out"), (conv, "weight"),
              layer.weights_q.code_format(), oc * win_arity, n_windows)
    b.channel((bs, "out"), (conv, "bias"), acc_fmt, oc, n_windows)

    rq = b.actor(
        f"L{i}_requant", "Requant",
        {"in_scale": layer.requant_in_scale, "in_zero_point": 0,
         "out": layer.act_out, "relu": layer.fused_relu, "acc_format": acc_fmt},
        position=(i, "requant"),
    )
    b.channel((conv, "acc"), (rq, "in"), acc_fmt, 1, CAPACITY_SLACK * ow * oc)
    out_fmt = layer.act_out.code_format() if layer.act_out else acc_fmt
    return (rq, "out", out_fmt, ow * oc, oh * ow * oc)


def _lower_pool(b: _Builder, i: int, layer: LayerNode, tail):
    c, h, w = layer.in_shape
    _, oh, ow = layer.out_shape
    act_fmt = layer.act_in.code_format()
    lb = b.actor(
        f"L{i}_linebuf", "LineBuffer",
        {"in_shape": layer.in_shape, "kernel": (2, 2), "stride": 2,
         "per_channel": True, "format": act_fmt,
         "storage": w * c + 2 * c, "act_bits": layer.act_in.bitwidth},
        position=(i, "linebuf"),
    )
    b.channel(tail[:2], (lb, "in"), tail[2], 1, CAPACITY_SLACK * tail[3])
    pool = b.actor(
        f"L{i}_pool", "MaxPool",
        {"window": 4, "format": act_fmt, "positions": oh * ow,
         "act_bits": layer.act_in.bitwidth},
        position=(i, "pool"),
    )
    b.channel((lb, "win"), (pool, "win"), act_fmt, 4, CAPACITY_SLACK * ow * c)
    return (pool, "out", act_fmt, ow * c, oh * ow * c)


def _lower_dense(b: _Builder, i: int, layer: LayerNode, tail):
    nf, no = layer.in_features, layer.out_features
    acc_fmt = layer.acc_format
    dense = b.actor(
        f"L{i}_dense", "Dense",
        {"in_features": nf, "out_features": no, "acc_format": acc_fmt,
         "macs": nf * no, "positions": no,
         "act_bits": layer.act_in.bitwidth,
         "weight_bits": layer.weights_q.bitwidth},
        position=(i, "dense"),
    )
    b.channel(tail[:2], (dense, "in"), tail[2], 1, CAPACITY_SLACK * tail[3])
    ws = b.actor(
        f"L{i}_weights", "WeightStore",
        {"columns": _stream_columns(layer), "count": nf,
         "format": layer.weights_q.code_format(),
         "params": nf * no, "weight_bits": layer.weights_q.bitwidth},
        position=(i, "weights"),
    )
    bs = b.actor(
        f"L{i}_bias", "BiasStore",
        {"bias": layer.bias, "count": 1, "format": acc_fmt},
        position=(i, "bias"),
    )
    b.channel((ws, "out"), (dense, "weight"),
              layer.weights_q.code_format(), no, nf)
    b.channel((bs, "out"), (dense, "bias"), acc_fmt, no, 1)
    rq = b.actor(
        f"L{i}_requant", "Requant",
        {"in_scale": layer.requant_in_scale, "in_zero_point": 0,
         "out": layer.act_out, "relu": layer.fused_relu, "acc_format": acc_fmt},
        position=(i, "requant"),
    )
    b.channel((dense, "acc"), (rq, "in"), acc_fmt, 1, CAPACITY_SLACK * no)
    out_fmt = layer.act_out.code_format() if layer.act_out else acc_fmt
    return (rq, "out", out_fmt, no, no)
