"""Command-line front door.

Exit codes: 0 success, 2 input errors (unreadable or malformed files),
3 semantic errors (unsupported models, mismatched merges, infeasible
policies), 4 internal invariant violations.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import dataflow, engine, mdc_merge, runtime
from .emit import emit_hls
from .errors import (
    AdaflowError,
    CapacityViolation,
    Deadlock,
    MalformedJson,
    MalformedWire,
    SizeMismatch,
    UnknownProfile,
    UnsupportedElementType,
)
from .graph_ir import build_ir, extract_profile
from .qonnx_io import load_model

INPUT_ERRORS = (MalformedWire, MalformedJson, SizeMismatch,
                UnsupportedElementType, FileNotFoundError, IsADirectoryError)
INTERNAL_ERRORS = (Deadlock, CapacityViolation)


def _load_network(path: str, profile: str | None = None) -> dataflow.ActorNetwork:
    """Model file (binary or JSON mirror), a compiled network.json, or a
    merged.json plus a profile name to configure."""
    if path.endswith(".json"):
        import json as _json

        with open(path) as fh:
            doc = _json.load(fh)
        if isinstance(doc, dict) and "profile_table" in doc:
            merged = mdc_merge.merged_from_json(_json.dumps(doc))
            if profile is None:
                raise UnknownProfile(
                    f"merged engine offers {list(merged.profiles)}; "
                    "pass --profile to pick one"
                )
            return mdc_merge.configure(merged, profile)
        if isinstance(doc, dict) and "actors" in doc:
            return dataflow.network_from_dict(doc)
    return dataflow.lower(build_ir(load_model(path)))


def _load_model_arg(path: str, force_json: bool = False):
    if force_json:
        from .qonnx_io import parse_model_json

        with open(path, "rb") as fh:
            return parse_model_json(fh.read().decode("utf-8"))
    return load_model(path)


def _compile_one(path: str, name: str | None = None, force_json: bool = False):
    g = build_ir(_load_model_arg(path, force_json))
    n = dataflow.lower(g)
    if name:
        n = dataclasses.replace(n, profile_name=name)
    report = dataflow.validate_network(n)
    return g, n, report


def _layer_table(g) -> str:
    lines = ["layer  kind     in->out                 precision"]
    profile = extract_profile(g)
    for i, (layer, (a, w)) in enumerate(zip(g.layers, profile.assignments)):
        lines.append(
            f"{i:<6} {layer.kind:<8} {str(layer.in_shape):>12} -> "
            f"{str(layer.out_shape):<12} A{a}-W{w}"
        )
    return "\n".join(lines)


def cmd_compile(args) -> int:
    g, n, report = _compile_one(args.model, force_json=args.json)
    os.makedirs(args.out, exist_ok=True)
    net_path = os.path.join(args.out, "network.json")
    with open(net_path, "w") as fh:
        fh.write(dataflow.network_to_json(n))
    profile = extract_profile(g)
    lines = [
        f"profile: {profile.name}",
        f"actors: {len(n.actors)}",
        f"channels: {len(n.channels)}",
        _layer_table(g),
        "rates balanced: yes",
    ]
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "report.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {net_path}")
    return 0


def cmd_simulate(args) -> int:
    g = build_ir(load_model(args.model))
    n = dataflow.lower(g)
    images, labels = engine.load_dataset(args.dataset[0], args.dataset[1])
    if args.limit:
        images, labels = images[: args.limit], labels[: args.limit]
    eng = engine.StreamingEngine(n) if args.engine == "streaming" else None
    hits = 0
    preds = []
    for img, lab in zip(images, labels):
        codes = img.reshape(g.input_shape).astype(np.int64)
        if eng is not None:
            pred = eng.run(codes).predicted_class
        else:
            pred = engine.predict(g, codes)
        preds.append(pred)
        hits += pred == int(lab)
    acc = 100.0 * hits / len(images)
    print(f"{len(images)} images, accuracy {acc:.1f}% ({args.engine})")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "predictions.txt"), "w") as fh:
            fh.write("\n".join(str(p) for p in preds) + "\n")
    return 0


def _calibration(args):
    if getattr(args, "calibration", None):
        with open(args.calibration) as fh:
            return engine.CostModel.from_json(fh.read())
    return engine.fit_cost_model()


def cmd_sweep(args) -> int:
    import json as _json

    model = _calibration(args)
    rows = []
    detail = {}
    for i, path in enumerate(args.models):
        g = build_ir(load_model(path))
        n = dataflow.lower(g)
        name = args.names[i] if args.names else (g.name or extract_profile(g).name)
        acc = None
        if args.dataset:
            images, labels = engine.load_dataset(*args.dataset)
            if args.limit:
                images, labels = images[: args.limit], labels[: args.limit]
            acc = engine.evaluate(
                lambda im: engine.predict(g, im.reshape(g.input_shape)),
                images, labels,
            )
        m = engine.estimate(n, model, accuracy_pct=acc)
        rows.append((name, m))
        detail[name] = {
            "accuracy_pct": m.accuracy_pct, "latency_us": m.latency_us,
            "lut_pct": m.lut_pct, "bram_pct": m.bram_pct,
            "power_mw": m.power_mw,
            "per_actor": engine.per_actor_breakdown(n, model),
        }
    text = engine.metrics_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            _json.dump(detail, fh, indent=1, sort_keys=True)
    print(text, end="")
    return 0


def cmd_merge(args) -> int:
    networks = []
    for i, path in enumerate(args.models):
        n = _load_network(path)
        dataflow.validate_network(n)
        if args.names:
            n = dataclasses.replace(n, profile_name=args.names[i])
        networks.append(n)
    merged = mdc_merge.merge(networks)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "merged.json")
    with open(out_path, "w") as fh:
        fh.write(mdc_merge.merged_to_json(merged))
    rep = mdc_merge.sharing_report(merged, _calibration(args))
    lines = [
        f"profiles: {', '.join(rep['profiles'])}",
        f"actors: {rep['total_actor_count']} total, "
        f"{rep['shared_actor_count']} shared",
        f"sboxes: {rep['sbox_count']}",
        f"merged lut: {rep['merged']['lut_pct']:.1f}%  "
        f"bram: {rep['merged']['bram_pct']:.1f}%",
        f"overhead vs largest profile: lut {rep['overhead']['lut_pct']:+.2f} pts",
        f"savings vs separate engines: lut {rep['savings']['lut_pct']:.2f} pts",
    ]
    text = "\n".join(lines) + "\n"
    with open(os.path.join(args.out, "sharing_report.txt"), "w") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {out_path}")
    return 0


def _parse_profile_metric(spec: str):
    # NAME:power_mw[:accuracy_pct]
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise ValueError(f"bad --profile {spec!r}, want NAME:POWER[:ACC]")
    name = parts[0]
    power = float(parts[1])
    acc = float(parts[2]) if len(parts) == 3 else None
    return name, power, acc


def cmd_adaptive_sim(args) -> int:
    if args.mission:
        import json as _json

        with open(args.mission) as fh:
            doc = _json.load(fh)
        args.policy = doc.get("policy", args.policy)
        args.baseline = doc.get("baseline", args.baseline)
        args.battery_mwh = doc.get("battery_mwh", args.battery_mwh)
        args.step_s = doc.get("step_s", args.step_s)
        args.latency_us = doc.get("latency_us", args.latency_us)
        for name, spec in doc.get("profiles", {}).items():
            entry = f"{name}:{spec['power_mw']}"
            if "accuracy_pct" in spec:
                entry += f":{spec['accuracy_pct']}"
            args.profile = (args.profile or []) + [entry]
    if args.policy is None or args.battery_mwh is None:
        raise ValueError("policy and battery capacity required "
                         "(flags or --mission document)")
    if args.baseline is None:
        pol = runtime.Policy.parse(args.policy)
        args.baseline = f"fixed:{pol.high or pol.profile or 'A8-W8'}"
    metrics: dict[str, engine.ProfileMetrics] = {}
    if args.metrics:
        with open(args.metrics) as fh:
            lines = fh.read().strip().split("\n")[1:]
        for line in lines:
            cols = line.split(",")
            metrics[cols[0]] = engine.ProfileMetrics(
                latency_us=float(cols[2]), lut_pct=float(cols[3]),
                bram_pct=float(cols[4]), power_mw=float(cols[5]),
                accuracy_pct=float(cols[1]) if cols[1] else None,
            )
    for spec in args.profile or []:
        name, power, acc = _parse_profile_metric(spec)
        metrics[name] = engine.ProfileMetrics(
            latency_us=args.latency_us, lut_pct=0.0, bram_pct=0.0,
            power_mw=power, accuracy_pct=acc,
        )
    if not metrics:
        raise ValueError("no profile metrics given (--metrics or --profile)")

    merged_profiles = None
    if args.merged:
        with open(args.merged) as fh:
            merged_profiles = list(mdc_merge.merged_from_json(fh.read()).profiles)

    policy = runtime.Policy.parse(args.policy)
    adaptive = runtime.simulate_mission(
        policy, runtime.BatteryState(args.battery_mwh), metrics,
        latency_us=args.latency_us, step_s=args.step_s,
        merged_profiles=merged_profiles,
    )
    baseline_policy = runtime.Policy.parse(args.baseline)
    baseline = runtime.simulate_mission(
        baseline_policy, runtime.BatteryState(args.battery_mwh), metrics,
        latency_us=args.latency_us, step_s=args.step_s,
        merged_profiles=merged_profiles,
    )
    gains = runtime.compare(adaptive, baseline)
    lines = [
        f"adaptive ({args.policy}): {adaptive.duration_h:.2f} h, "
        f"{adaptive.classifications:.3e} classifications, "
        f"{adaptive.switches} switches",
        f"baseline ({args.baseline}): {baseline.duration_h:.2f} h, "
        f"{baseline.classifications:.3e} classifications",
        f"duration gain: {gains['duration_gain_pct']:+.2f}%",
        f"classification gain: {gains['classification_gain_pct']:+.2f}%",
    ]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "mission.csv"), "w") as fh:
            fh.write(adaptive.to_csv())
        with open(os.path.join(args.out, "mission.json"), "w") as fh:
            fh.write(adaptive.to_json())
        with open(os.path.join(args.out, "summary.txt"), "w") as fh:
            fh.write(text)
    return 0


def cmd_emit_hls(args) -> int:
    net = _load_network(args.network, profile=args.profile)
    written = emit_hls(net, args.out)
    print(f"wrote {len(written)} files under {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adaflow",
        description="Quantized ONNX CNNs -> streaming dataflow engines with "
                    "runtime-switchable precision profiles",
    )
    p.add_argument("--seed", type=int, default=0,
                   help="fixed seed; outputs are byte-identical per seed")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("compile", help="model -> actor network JSON + report")
    c.add_argument("--model", required=True)
    c.add_argument("--json", action="store_true",
                   help="treat the model file as the JSON mirror")
    c.add_argument("--out", required=True)
    c.set_defaults(fn=cmd_compile)

    s = sub.add_parser("simulate", help="classify an IDX dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--dataset", nargs=2, required=True,
                   metavar=("IMAGES.idx", "LABELS.idx"))
    s.add_argument("--limit", type=int, default=0)
    s.add_argument("--engine", choices=("streaming", "dense"), default="streaming")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_simulate)

    w = sub.add_parser("sweep", help="estimate metrics for several models")
    w.add_argument("--models", nargs="+", required=True)
    w.add_argument("--profiles", "--names", dest="names", nargs="+")
    w.add_argument("--dataset", nargs=2)
    w.add_argument("--limit", type=int, default=0)
    w.add_argument("--out")
    w.add_argument("--json-out", help="per-actor breakdown JSON")
    w.add_argument("--calibration")
    w.set_defaults(fn=cmd_sweep)

    m = sub.add_parser("merge", help="merge profile networks into one engine")
    m.add_argument("--models", nargs="+", required=True)
    m.add_argument("--profiles", "--names", dest="names", nargs="+")
    m.add_argument("--out", required=True)
    m.add_argument("--calibration")
    m.set_defaults(fn=cmd_merge)

    a = sub.add_parser("adaptive-sim", help="battery mission simulation")
    a.add_argument("--policy",
                   help="fixed:P | threshold:T:HIGH:LOW | constraint:ACC")
    a.add_argument("--baseline", default=None,
                   help="baseline policy (default: fixed on the high profile)")
    a.add_argument("--battery-mwh", type=float)
    a.add_argument("--step-s", type=float, default=1.0)
    a.add_argument("--latency-us", type=float, default=329.0)
    a.add_argument("--mission",
                   help="JSON mission document (battery_mwh, policy, step_s, "
                        "profiles)")
    a.add_argument("--metrics", help="CSV from `adaflow sweep`")
    a.add_argument("--profile", action="append",
                   help="inline metric NAME:POWER_MW[:ACC_PCT], repeatable")
    a.add_argument("--merged", help="merged.json to validate profiles against")
    a.add_argument("--out")
    a.set_defaults(fn=cmd_adaptive_sim)

    e = sub.add_parser("emit-hls", help="emit templated source files")
    e.add_argument("--network", required=True,
                   help="model file, compiled network.json, or merged.json")
    e.add_argument("--profile",
                   help="profile to configure when emitting a merged engine")
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_emit_hls)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except INPUT_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except INTERNAL_ERRORS as e:
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4
    except (AdaflowError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
