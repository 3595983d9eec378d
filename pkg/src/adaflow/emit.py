"""HLS-style source emission: one templated C++ file per actor plus a
synthesis driver script.

The output is a faithful textual rendering of the streaming template,
goldens-tested for byte determinism; functional correctness of the C++ is
out of scope (no synthesis toolchain here), so the text is never compiled
by this package.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .dataflow.structure import Actor, ActorNetwork
from .errors import UnemittableActor
from .fixedpoint import FxFormat

_HEADER = """// generated by adaflow -- streaming dataflow engine sources
#include <ap_int.h>
#include <hls_stream.h>
"""


def _cname(actor_id: str) -> str:
    """Actor id as a C identifier (merged variants carry an @profile tag)."""
    return re.sub(r"[^0-9A-Za-z_]", "_", actor_id)


def _ctype(fmt: FxFormat) -> str:
    return f"ap_{'int' if fmt.signed else 'uint'}<{fmt.word_bits}>"


def _const_block(pairs: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in pairs)
    return "\n".join(f"static const int {k.ljust(width)} = {v};" for k, v in pairs)


def _array_literal(name: str, ctype: str, values: np.ndarray, per_line: int = 12) -> str:
    flat = [str(int(v)) for v in np.asarray(values).reshape(-1)]
    lines = [", ".join(flat[i : i + per_line]) for i in range(0, len(flat), per_line)]
    body = ",\n    ".join(lines) if lines else ""
    return f"static const {ctype} {name}[{len(flat)}] = {{\n    {body}\n}};"


def _emit_source(a: Actor) -> str:
    c, h, w = a.config["shape"]
    fmt = a.config["format"]
    consts = _const_block([
        ("IN_CHANNELS", c), ("IN_HEIGHT", h), ("IN_WIDTH", w),
        ("PIXEL_BITS", fmt.word_bits),
    ])
    t = _ctype(fmt)
    return f"""{_HEADER}
// {a.id}: feeds the raster-order, channel-interleaved pixel stream
{consts}

void {_cname(a.id)}(const {t} image[IN_HEIGHT * IN_WIDTH * IN_CHANNELS],
            hls::stream<{t}> &out) {{
    for (int i = 0; i < IN_HEIGHT * IN_WIDTH * IN_CHANNELS; ++i) {{
#pragma HLS PIPELINE II=1
        out.write(image[i]);
    }}
}}
"""


def _emit_sink(a: Actor) -> str:
    consts = _const_block([("OUT_TOKENS", a.config["count"])])
    return f"""{_HEADER}
// {a.id}: collects the result stream
{consts}

template <typename T>
void {_cname(a.id)}(hls::stream<T> &in, T result[OUT_TOKENS]) {{
    for (int i = 0; i < OUT_TOKENS; ++i) {{
#pragma HLS PIPELINE II=1
        result[i] = in.read();
    }}
}}
"""


def _emit_linebuffer(a: Actor) -> str:
    c, h, w = a.config["in_shape"]
    kh, kw = a.config["kernel"]
    fmt = a.config["format"]
    t = _ctype(fmt)
    mode = "PER_CHANNEL" if a.config["per_channel"] else "FULL_WINDOW"
    consts = _const_block([
        ("IN_CHANNELS", c), ("IN_HEIGHT", h), ("IN_WIDTH", w),
        ("KERNEL_H", kh), ("KERNEL_W", kw), ("STRIDE", a.config["stride"]),
        ("ACT_BITS", fmt.word_bits),
    ])
    arity = kh * kw * (1 if a.config["per_channel"] else c)
    return f"""{_HEADER}
// {a.id}: row-caching line buffer ({mode}); stores KERNEL_H-1 rows and
// turns the pixel stream into sliding windows without full-tensor buffering
{consts}

void {_cname(a.id)}(hls::stream<{t}> &in, hls::stream<{t}> out[{arity}]) {{
    static {t} rows[KERNEL_H - 1 > 0 ? KERNEL_H - 1 : 1][IN_WIDTH * IN_CHANNELS];
#pragma HLS ARRAY_PARTITION variable=rows complete dim=1
    {t} window[KERNEL_H * KERNEL_W * IN_CHANNELS];
#pragma HLS ARRAY_PARTITION variable=window complete
    for (int y = 0; y < IN_HEIGHT; ++y) {{
        for (int x = 0; x < IN_WIDTH; ++x) {{
            for (int ch = 0; ch < IN_CHANNELS; ++ch) {{
#pragma HLS PIPELINE II=1
                {t} px = in.read();
                // shift the column, cache the row, assemble the window
                if (y >= KERNEL_H - 1 && x >= KERNEL_W - 1
                    && (y - (KERNEL_H - 1)) % STRIDE == 0
                    && (x - (KERNEL_W - 1)) % STRIDE == 0) {{
                    for (int e = 0; e < {arity}; ++e)
                        out[e].write(window[e]);
                }}
                rows[0][x * IN_CHANNELS + ch] = px;
            }}
        }}
    }}
}}
"""


def _emit_conv(a: Actor, net: ActorNetwork) -> str:
    weights = _store_of(net, a.id, "weight").config["weights"]
    acc = a.config["acc_format"]
    win_t = _ctype(_fmt_of(net, a.id, "window"))
    acc_t = _ctype(acc)
    consts = _const_block([
        ("OUT_CHANNELS", a.config["out_channels"]),
        ("WINDOW_SIZE", a.config["window_size"]),
        ("KERNEL_ELEMS", weights.shape[1]),
        ("ACT_BITS", a.config["act_bits"]),
        ("WEIGHT_BITS", a.config["weight_bits"]),
        ("ACC_BITS", acc.word_bits),
    ])
    w_t = _ctype(_fmt_of(net, a.id, "weight"))
    return f"""{_HEADER}
// {a.id}: multiply-accumulate over one window per output channel
{consts}

void {_cname(a.id)}(hls::stream<{win_t}> window[WINDOW_SIZE],
            hls::stream<{w_t}> &weight,
            hls::stream<{acc_t}> &bias,
            hls::stream<{acc_t}> &acc_out) {{
    {win_t} win[WINDOW_SIZE];
#pragma HLS ARRAY_PARTITION variable=win complete
    for (int e = 0; e < WINDOW_SIZE; ++e)
        win[e] = window[e].read();
    for (int oc = 0; oc < OUT_CHANNELS; ++oc) {{
#pragma HLS PIPELINE II=1
        {acc_t} acc = bias.read();
        for (int e = 0; e < WINDOW_SIZE; ++e)
            acc += ({acc_t})win[e] * ({acc_t})weight.read();
        acc_out.write(acc);
    }}
}}
"""


def _emit_store(a: Actor, net: ActorNetwork) -> str:
    fmt = a.config["format"]
    t = _ctype(fmt)
    if a.kind == "WeightStore":
        data = a.config.get("weights", a.config.get("columns"))
        label = "kernel weights" if "weights" in a.config else "dense columns"
    else:
        data = a.config["bias"]
        label = "bias terms"
    consts = _const_block([
        ("REPLAYS_PER_INFERENCE", a.config["count"]),
        ("WORDS", int(np.asarray(data).size)),
        ("WORD_BITS", fmt.word_bits),
    ])
    rom = _array_literal("ROM", t, data)
    return f"""{_HEADER}
// {a.id}: on-chip store replaying {label} in a fixed order
{consts}

{rom}

void {_cname(a.id)}(hls::stream<{t}> &out) {{
    for (int r = 0; r < REPLAYS_PER_INFERENCE; ++r)
        for (int i = 0; i < WORDS; ++i) {{
#pragma HLS PIPELINE II=1
            out.write(ROM[i]);
        }}
}}
"""


def _emit_requant(a: Actor, net: ActorNetwork) -> str:
    acc = a.config["acc_format"]
    out_q = a.config["out"]
    acc_t = _ctype(acc)
    if out_q is None:
        out_bits, qmin, qmax, zp = acc.word_bits, 0, 0, 0
        out_t = acc_t
        identity = 1
    else:
        out_bits, qmin, qmax, zp = (out_q.bitwidth, out_q.qmin, out_q.qmax,
                                    out_q.zero_point)
        out_t = _ctype(out_q.code_format())
        identity = 0
    from .fixedpoint import QuantizedMultiplier

    mult = (QuantizedMultiplier.from_real(a.config["in_scale"] / out_q.scale)
            if out_q is not None else None)
    consts = _const_block([
        ("ACC_BITS", acc.word_bits),
        ("OUT_BITS", out_bits),
        ("IDENTITY", identity),
        ("FUSED_RELU", int(a.config["relu"])),
        ("IN_ZERO_POINT", a.config.get("in_zero_point", 0)),
        ("OUT_ZERO_POINT", zp),
        ("QMIN", qmin),
        ("QMAX", qmax),
        ("MULT_MANTISSA", mult.mantissa if mult else 1),
        ("MULT_SHIFT", mult.shift if mult else 0),
    ])
    return f"""{_HEADER}
// {a.id}: rescale accumulators into the output activation domain with a
// fixed-point multiplier (round half to even), optional fused ReLU
{consts}

void {_cname(a.id)}(hls::stream<{acc_t}> &in, hls::stream<{out_t}> &out) {{
    while (!in.empty()) {{
#pragma HLS PIPELINE II=1
        ap_int<ACC_BITS + 1> x = in.read() - IN_ZERO_POINT;
        if (IDENTITY) {{
            out.write(FUSED_RELU && x < 0 ? ({out_t})0 : ({out_t})x);
            continue;
        }}
        ap_int<ACC_BITS + 33> p = x * (ap_int<33>)MULT_MANTISSA;
        ap_int<ACC_BITS + 33> fl = p >> MULT_SHIFT;
        ap_int<ACC_BITS + 33> rem = p - (fl << MULT_SHIFT);
        ap_int<ACC_BITS + 33> half = (ap_int<ACC_BITS + 33>)1 << (MULT_SHIFT - 1);
        if (rem > half || (rem == half && fl[0])) fl += 1;
        int code = (int)fl + OUT_ZERO_POINT;
        int lo = FUSED_RELU && OUT_ZERO_POINT > QMIN ? OUT_ZERO_POINT : QMIN;
        if (FUSED_RELU && code < lo) code = lo;
        if (code < QMIN) code = QMIN;
        if (code > QMAX) code = QMAX;
        out.write(({out_t})code);
    }}
}}
"""


def _emit_maxpool(a: Actor, net: ActorNetwork) -> str:
    fmt = a.config["format"]
    t = _ctype(fmt)
    consts = _const_block([
        ("WINDOW", a.config["window"]),
        ("ACT_BITS", fmt.word_bits),
    ])
    return f"""{_HEADER}
// {a.id}: per-channel max over a pooling window
{consts}

void {_cname(a.id)}(hls::stream<{t}> win[WINDOW], hls::stream<{t}> &out) {{
#pragma HLS PIPELINE II=1
    {t} best = win[0].read();
    for (int e = 1; e < WINDOW; ++e) {{
        {t} v = win[e].read();
        if (v > best) best = v;
    }}
    out.write(best);
}}
"""


def _emit_dense(a: Actor, net: ActorNetwork) -> str:
    acc = a.config["acc_format"]
    acc_t = _ctype(acc)
    in_t = _ctype(_fmt_of(net, a.id, "in"))
    w_t = _ctype(_fmt_of(net, a.id, "weight"))
    consts = _const_block([
        ("IN_FEATURES", a.config["in_features"]),
        ("OUT_FEATURES", a.config["out_features"]),
        ("ACT_BITS", a.config["act_bits"]),
        ("WEIGHT_BITS", a.config["weight_bits"]),
        ("ACC_BITS", acc.word_bits),
    ])
    return f"""{_HEADER}
// {a.id}: per-class accumulation over the flattened feature stream
{consts}

void {_cname(a.id)}(hls::stream<{in_t}> &in, hls::stream<{w_t}> &weight,
            hls::stream<{acc_t}> &bias, hls::stream<{acc_t}> &acc_out) {{
    {acc_t} acc[OUT_FEATURES];
#pragma HLS ARRAY_PARTITION variable=acc complete
    for (int o = 0; o < OUT_FEATURES; ++o) acc[o] = 0;
    for (int i = 0; i < IN_FEATURES; ++i) {{
        {in_t} x = in.read();
        for (int o = 0; o < OUT_FEATURES; ++o) {{
#pragma HLS PIPELINE II=1
            acc[o] += ({acc_t})x * ({acc_t})weight.read();
        }}
    }}
    for (int o = 0; o < OUT_FEATURES; ++o)
        acc_out.write(acc[o] + bias.read());
}}
"""


def _fmt_of(net: ActorNetwork, actor_id: str, port: str) -> FxFormat:
    for ch in net.channels:
        if ch.dst == (actor_id, port):
            return ch.token.fmt
    raise UnemittableActor(f"{actor_id}: no channel on port {port!r}")


def _store_of(net: ActorNetwork, actor_id: str, port: str) -> Actor:
    for ch in net.channels:
        if ch.dst == (actor_id, port):
            return net.actor(ch.src[0])
    raise UnemittableActor(f"{actor_id}: no store on port {port!r}")


_EMITTERS = {
    "Source": lambda a, n: _emit_source(a),
    "Sink": lambda a, n: _emit_sink(a),
    "LineBuffer": lambda a, n: _emit_linebuffer(a),
    "Conv": _emit_conv,
    "WeightStore": _emit_store,
    "BiasStore": _emit_store,
    "Requant": _emit_requant,
    "MaxPool": _emit_maxpool,
    "Dense": _emit_dense,
}


def _emit_driver(net: ActorNetwork, files: list[str]) -> str:
    adds = "\n".join(f"add_files src/{f}" for f in files)
    return f"""# synthesis driver for the {net.profile_name} streaming engine
open_project -reset proj_{net.profile_name.replace('-', '_').lower()}
set_top top
{adds}
open_solution -reset sol1
set_part xck26-sfvc784-2LV-c
create_clock -period 10.0
csynth_design
exit
"""


def _emit_top(net: ActorNetwork) -> str:
    decls = []
    for ch in net.channels:
        arity = ch.token.arity
        t = _ctype(ch.token.fmt)
        if arity == 1:
            decls.append(f"    hls::stream<{t}> {ch.id};  "
                         f"// {ch.src[0]}.{ch.src[1]} -> {ch.dst[0]}.{ch.dst[1]}")
        else:
            decls.append(f"    hls::stream<{t}> {ch.id}[{arity}];  "
                         f"// {ch.src[0]}.{ch.src[1]} -> {ch.dst[0]}.{ch.dst[1]}")
    wiring = "\n".join(decls)
    calls = "\n".join(f"    // {a.id} ({a.kind})" for a in net.actors)
    return f"""{_HEADER}
// top-level wiring of the {net.profile_name} streaming engine
// ({len(net.actors)} actors, {len(net.channels)} FIFO channels)

void top() {{
#pragma HLS DATAFLOW
{wiring}

{calls}
}}
"""


def emit_hls(net: ActorNetwork, outdir: str) -> list[str]:
    """Write one source file per actor plus top.cpp and build.tcl; returns
    the written file names (deterministic order and content)."""
    os.makedirs(os.path.join(outdir, "src"), exist_ok=True)
    written: list[str] = []
    for a in net.actors:
        emitter = _EMITTERS.get(a.kind)
        if emitter is None:
            raise UnemittableActor(f"no template for actor kind {a.kind!r}")
        name = f"{_cname(a.id)}.cpp"
        with open(os.path.join(outdir, "src", name), "w") as fh:
            fh.write(emitter(a, net))
        written.append(name)
    with open(os.path.join(outdir, "src", "top.cpp"), "w") as fh:
        fh.write(_emit_top(net))
    written.append("top.cpp")
    with open(os.path.join(outdir, "build.tcl"), "w") as fh:
        fh.write(_emit_driver(net, written))
    written.append("build.tcl")
    return written
