"""Independent integer inference over the exported parameter set.

Written against the quantization semantics only (round half to even,
saturate, unsigned activations, lossless accumulators); shares no code
with the inference toolchain, so recorded predictions double as a
cross-implementation check.  All scales are powers of two, which keeps the
float64 arithmetic here exact.
"""

from __future__ import annotations

import numpy as np


def _quant(x: np.ndarray, scale: float, bits: int, signed: bool) -> np.ndarray:
    qmin = -(1 << (bits - 1)) if signed else 0
    qmax = (1 << (bits - 1)) - 1 if signed else (1 << bits) - 1
    return np.clip(np.rint(x / scale), qmin, qmax).astype(np.int64)


def _fold_bn(w, b, bn):
    gamma, beta, mean, var, eps = (np.asarray(v, dtype=np.float64) for v in bn)
    s = gamma / np.sqrt(var + eps)
    return w * s.reshape(-1, 1, 1, 1), (b - mean) * s + beta


def _conv_int(x: np.ndarray, w_codes: np.ndarray, bias_codes: np.ndarray) -> np.ndarray:
    oc = w_codes.shape[0]
    kh, kw = w_codes.shape[2], w_codes.shape[3]
    c, h, wd = x.shape
    oh, ow = h - kh + 1, wd - kw + 1
    acc = np.zeros((oc, oh, ow), dtype=np.int64)
    for dy in range(kh):
        for dx in range(kw):
            acc += np.tensordot(w_codes[:, :, dy, dx],
                                x[:, dy : dy + oh, dx : dx + ow], axes=(1, 0))
    return acc + bias_codes.reshape(-1, 1, 1)


def _pool(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    oh, ow = h // 2, w // 2
    return x[:, : oh * 2, : ow * 2].reshape(c, oh, 2, ow, 2).max(axis=(2, 4))


def forward_logits(params: dict, image_u8: np.ndarray) -> np.ndarray:
    """Integer logits for one uint8 image; mirrors the exported graph."""
    x_real = image_u8.astype(np.float64).reshape(1, 28, 28) / 256.0
    codes = _quant(x_real, params["input_scale"], params["input_bits"], False)
    domain_scale = params["input_scale"]

    def block(codes, domain_scale, w, b, wscale, wbits, ascale, abits, bn):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if bn is not None:
            w, b = _fold_bn(w, b, bn)
        w_codes = _quant(w, wscale, wbits, True)
        acc_scale = domain_scale * wscale
        b_codes = np.rint(b / acc_scale).astype(np.int64)
        acc = _conv_int(codes, w_codes, b_codes)
        acc = np.maximum(acc, 0)  # fused relu in the accumulator domain
        out = _quant(acc * acc_scale, ascale, abits, False)
        return _pool(out), ascale

    codes, domain_scale = block(
        codes, domain_scale, params["w1"], params["b1"], params["w1_scale"],
        params["w1_bits"], params["a1_scale"], params["a1_bits"],
        params.get("bn1"),
    )
    if params.get("inner_input") is not None:
        scale, bits = params["inner_input"]
        codes = _quant(codes * domain_scale, scale, bits, False)
        domain_scale = scale
    codes, domain_scale = block(
        codes, domain_scale, params["w2"], params["b2"], params["w2_scale"],
        params["w2_bits"], params["a2_scale"], params["a2_bits"],
        params.get("bn2"),
    )

    feat = codes.reshape(-1)  # c-major flatten, matching the Gemm weights
    wd_codes = _quant(np.asarray(params["wd"], np.float64), params["wd_scale"],
                      params["wd_bits"], True)
    acc_scale = domain_scale * params["wd_scale"]
    bd_codes = np.rint(np.asarray(params["bd"], np.float64) / acc_scale)
    return wd_codes @ feat + bd_codes.astype(np.int64)


def predict(params: dict, image_u8: np.ndarray) -> int:
    return int(np.argmax(forward_logits(params, image_u8)))


def evaluate(params: dict, images: np.ndarray, labels: np.ndarray) -> float:
    hits = sum(predict(params, im) == int(lb) for im, lb in zip(images, labels))
    return 100.0 * hits / len(images)
