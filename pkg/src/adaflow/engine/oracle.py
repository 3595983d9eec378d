"""Dense reference execution: nested-array integer inference over the
NetworkGraph, sharing only the fixed-point primitives with the streaming
path. Ground truth for streaming and merged configurations."""

from __future__ import annotations

import numpy as np

from ..dataflow.kernels import RequantKernel
from ..errors import EmptyDataset
from ..fixedpoint import QuantParams
from ..graph_ir import LayerNode, NetworkGraph
from .streaming import argmax_lowest

_SAFE_BITS = 62


def _requant(values: np.ndarray, in_scale: float, out: QuantParams | None,
             relu: bool, in_zp: int, acc_bits: int) -> np.ndarray:
    k = RequantKernel(in_scale=in_scale, out=out, relu=relu,
                      in_zero_point=in_zp, acc_bits=acc_bits)
    flat = k.apply(values.reshape(-1))
    return np.asarray(flat).reshape(values.shape)


def _conv_dense(layer: LayerNode, x: np.ndarray) -> np.ndarray:
    oc, oh, ow = layer.out_shape
    kh, kw = layer.kernel_h, layer.kernel_w
    wide = layer.acc_format.word_bits >= _SAFE_BITS
    w = layer.weights.astype(object) if wide else layer.weights
    xx = x.astype(object) if wide else x
    acc = None
    for dy in range(kh):
        for dx in range(kw):
            patch = xx[:, dy : dy + oh, dx : dx + ow]
            # acc[o,y,x] += sum_c w[o,c,dy,dx] * patch[c,y,x]
            contrib = np.tensordot(w[:, :, dy, dx], patch, axes=(1, 0))
            acc = contrib if acc is None else acc + contrib
    return acc + layer.bias.reshape(-1, 1, 1)


def _pool_dense(layer: LayerNode, x: np.ndarray) -> np.ndarray:
    c, oh, ow = layer.out_shape
    trimmed = x[:, : oh * 2, : ow * 2]
    return trimmed.reshape(c, oh, 2, ow, 2).max(axis=(2, 4))


def _fc_dense(layer: LayerNode, x: np.ndarray) -> np.ndarray:
    wide = layer.acc_format.word_bits >= _SAFE_BITS
    feat = x.reshape(-1)  # C-order flatten == c-major
    if wide:
        return layer.weights.astype(object) @ feat.astype(object) \
            + layer.bias.astype(object)
    return layer.weights @ feat + layer.bias


def dense_oracle(g: NetworkGraph, image) -> np.ndarray:
    """Logits (final accumulator domain) for source-domain image codes."""
    c, h, w = g.input_shape
    x = np.asarray(image, dtype=np.int64).reshape(c, h, w)

    if g.source_quant is not None and g.input_quant is not None:
        x = _requant(x, g.source_quant.scale, g.input_quant, relu=False,
                     in_zp=g.source_quant.zero_point,
                     acc_bits=g.source_quant.bitwidth)
    domain = g.input_quant if g.input_quant is not None else g.source_quant

    for layer in g.layers:
        if domain is not None and layer.act_in != domain:
            x = _requant(x, domain.scale, layer.act_in, relu=False,
                         in_zp=domain.zero_point, acc_bits=domain.bitwidth)
        domain = layer.act_in
        if layer.kind == "Conv":
            acc = _conv_dense(layer, x)
            x = _requant(acc, layer.requant_in_scale, layer.act_out,
                         layer.fused_relu, 0, layer.acc_format.word_bits)
        elif layer.kind == "MaxPool":
            x = _pool_dense(layer, x)
        else:
            acc = _fc_dense(layer, x)
            x = _requant(acc, layer.requant_in_scale, layer.act_out,
                         layer.fused_relu, 0, layer.acc_format.word_bits)
        domain = layer.act_out
    if x.ndim == 3:  # spatial output: match the stream's (y, x, c) order
        return x.transpose(1, 2, 0).reshape(-1)
    return x.reshape(-1)


def predict(g: NetworkGraph, image) -> int:
    return argmax_lowest(dense_oracle(g, image))


def evaluate(predict_fn, images: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of argmax-correct classifications, in percent."""
    if len(images) == 0:
        raise EmptyDataset("no samples to evaluate")
    if len(images) != len(labels):
        raise EmptyDataset(f"{len(images)} images vs {len(labels)} labels")
    hits = sum(1 for img, lab in zip(images, labels) if predict_fn(img) == int(lab))
    return 100.0 * hits / len(images)


def evaluate_graph(g: NetworkGraph, images: np.ndarray,
                   labels: np.ndarray) -> float:
    """evaluate() over the dense oracle of a network graph."""
    return evaluate(lambda im: predict(g, im.reshape(g.input_shape)),
                    images, labels)
