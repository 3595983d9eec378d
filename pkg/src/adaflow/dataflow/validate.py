"""Static checks on an ActorNetwork: DAG-ness, port wiring, token formats,
per-inference rate balance, and minimal deadlock-free channel capacities."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import FormatMismatch, NotADag, RateMismatch
from .structure import IN_PORTS, OUT_PORTS, Actor, ActorNetwork, Channel


@dataclass(frozen=True)
class ValidationReport:
    token_counts: dict    # channel id -> tokens per inference
    scalar_counts: dict   # channel id -> tokens * arity
    min_capacities: dict  # channel id -> minimal deadlock-free capacity (tokens)

    @property
    def balanced(self) -> bool:
        return True  # construction: validate_network raises otherwise


def _toposort(n: ActorNetwork) -> list[Actor]:
    incoming: dict[str, int] = {a.id: 0 for a in n.actors}
    for c in n.channels:
        if c.dst[0] not in incoming or c.src[0] not in incoming:
            raise FormatMismatch(f"channel {c.id} references unknown actor")
        incoming[c.dst[0]] += 1
    order: list[Actor] = []
    ready = [a for a in n.actors if incoming[a.id] == 0]
    ready.sort(key=lambda a: a.id)
    while ready:
        a = ready.pop(0)
        order.append(a)
        for c in n.channels:
            if c.src[0] == a.id:
                incoming[c.dst[0]] -= 1
                if incoming[c.dst[0]] == 0:
                    ready.append(n.actor(c.dst[0]))
        ready.sort(key=lambda a: a.id)
    if len(order) != len(n.actors):
        raise NotADag("actor network contains a cycle")
    return order


def _check_ports(n: ActorNetwork) -> None:
    for c in n.channels:
        src, sport = c.src
        dst, dport = c.dst
        if sport not in OUT_PORTS[n.actor(src).kind]:
            raise FormatMismatch(f"{c.id}: {src} has no output port {sport!r}")
        if dport not in IN_PORTS[n.actor(dst).kind]:
            raise FormatMismatch(f"{c.id}: {dst} has no input port {dport!r}")
    for a in n.actors:
        for port in IN_PORTS[a.kind]:
            links = [c for c in n.channels if c.dst == (a.id, port)]
            if len(links) != 1:
                raise FormatMismatch(
                    f"{a.id}: port {port!r} has {len(links)} channels, expected 1"
                )
        for port in OUT_PORTS[a.kind]:
            links = [c for c in n.channels if c.src == (a.id, port)]
            if len(links) != 1:
                raise FormatMismatch(
                    f"{a.id}: output {port!r} has {len(links)} channels, expected 1"
                )


def _lb_outputs(a: Actor) -> tuple[int, int, int]:
    """(windows per inference, window arity, pixels per inference)."""
    c, h, w = a.config["in_shape"]
    kh, kw = a.config["kernel"]
    s = a.config["stride"]
    oh = (h - kh) // s + 1
    ow = (w - kw) // s + 1
    if a.config["per_channel"]:
        return oh * ow * c, kh * kw, h * w * c
    return oh * ow, kh * kw * c, h * w * c


def _expected_arity(a: Actor, port: str, channel: Channel) -> int | None:
    k = a.kind
    if k == "LineBuffer":
        return 1 if port == "in" else _lb_outputs(a)[1]
    if k == "Conv":
        return {
            "window": a.config["window_size"],
            "weight": a.config["out_channels"] * a.config["window_size"],
            "bias": a.config["out_channels"],
            "acc": 1,
        }[port]
    if k == "Dense":
        return {"in": 1, "weight": a.config["out_features"],
                "bias": a.config["out_features"], "acc": 1}[port]
    if k == "MaxPool":
        return a.config["window"] if port == "win" else 1
    if k == "WeightStore":
        w = a.config.get("weights")
        if w is not None:
            return w.shape[0] * w.shape[1]
        return a.config["columns"].shape[1]
    if k == "BiasStore":
        return len(a.config["bias"])
    return None  # Source/Sink/Requant: any arity


def validate_network(n: ActorNetwork) -> ValidationReport:
    """Raises NotADag / FormatMismatch / RateMismatch; returns rate report."""
    order = _toposort(n)
    _check_ports(n)

    ch_by_src = {c.src: c for c in n.channels}
    ch_by_dst = {c.dst: c for c in n.channels}

    for c in n.channels:
        for actor_id, port in (c.src, c.dst):
            a = n.actor(actor_id)
            want = _expected_arity(a, port, c)
            if want is not None and want != c.token.arity:
                raise RateMismatch(
                    f"{c.id}: {actor_id}.{port} moves {want}-element tokens, "
                    f"channel carries arity {c.token.arity}"
                )

    # propagate per-inference token counts through the dag
    produced: dict[str, int] = {}

    def out_count(a: Actor, port: str) -> int:
        if a.kind == "Source":
            c, h, w = a.config["shape"]
            return c * h * w
        if a.kind in ("WeightStore", "BiasStore"):
            return a.config["count"]
        if a.kind == "LineBuffer":
            n_in = produced[ch_by_dst[(a.id, "in")].id]
            wins, _, pixels = _lb_outputs(a)
            if n_in != pixels:
                raise RateMismatch(
                    f"{a.id}: receives {n_in} pixels, needs {pixels}"
                )
            return wins
        if a.kind == "Conv":
            counts = {p: produced[ch_by_dst[(a.id, p)].id]
                      for p in ("window", "weight", "bias")}
            if len(set(counts.values())) != 1:
                raise RateMismatch(f"{a.id}: unbalanced inputs {counts}")
            return counts["window"] * a.config["out_channels"]
        if a.kind == "Dense":
            n_in = produced[ch_by_dst[(a.id, "in")].id]
            n_w = produced[ch_by_dst[(a.id, "weight")].id]
            n_b = produced[ch_by_dst[(a.id, "bias")].id]
            if n_in != a.config["in_features"] or n_w != n_in or n_b != 1:
                raise RateMismatch(
                    f"{a.id}: in={n_in} weights={n_w} bias={n_b}, "
                    f"expected in=weights={a.config['in_features']}, bias=1"
                )
            return a.config["out_features"]
        if a.kind in ("Requant", "MaxPool"):
            port_in = "in" if a.kind == "Requant" else "win"
            return produced[ch_by_dst[(a.id, port_in)].id]
        raise FormatMismatch(f"{a.id}: kind {a.kind} has no output")

    sink_seen = 0
    for a in order:
        for port in OUT_PORTS[a.kind]:
            produced[ch_by_src[(a.id, port)].id] = out_count(a, port)
        if a.kind == "Sink":
            got = produced[ch_by_dst[(a.id, "in")].id]
            if got != a.config["count"]:
                raise RateMismatch(
                    f"sink expects {a.config['count']} tokens, receives {got}"
                )
            sink_seen += 1
    if sink_seen != 1:
        raise FormatMismatch(f"network has {sink_seen} sinks, expected 1")

    min_caps = {c.id: _min_capacity(n, c, produced) for c in n.channels}
    scalar = {cid: cnt * _arity(n, cid) for cid, cnt in produced.items()}
    return ValidationReport(
        token_counts=produced, scalar_counts=scalar, min_capacities=min_caps
    )


def _arity(n: ActorNetwork, cid: str) -> int:
    for c in n.channels:
        if c.id == cid:
            return c.token.arity
    raise KeyError(cid)


def _min_capacity(n: ActorNetwork, c: Channel, produced: dict[str, int]) -> int:
    """Largest single atomic firing burst of the producer on this channel."""
    a = n.actor(c.src[0])
    if a.kind == "Source":
        ch, _, w = a.config["shape"]
        return w * ch
    if a.kind in ("WeightStore", "BiasStore"):
        return a.config["count"]  # replayed from ROM in one push
    if a.kind == "LineBuffer":
        _, _, _ = _lb_outputs(a)
        cfg = a.config
        cc, _, w = cfg["in_shape"]
        ow = (w - cfg["kernel"][1]) // cfg["stride"] + 1
        return ow * cc if cfg["per_channel"] else ow
    if a.kind == "Conv":
        ch_in = [x for x in n.channels if x.dst == (a.id, "window")][0]
        return ch_in.capacity * a.config["out_channels"]
    if a.kind == "Dense":
        return a.config["out_features"]
    if a.kind in ("Requant", "MaxPool"):
        port = "in" if a.kind == "Requant" else "win"
        up = [x for x in n.channels if x.dst == (a.id, port)][0]
        return up.capacity
    return produced.get(c.id, 1)
