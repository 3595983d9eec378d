"""Actor network structure: actors, FIFO channels, JSON serialization.

Port names are fixed per actor kind:

    Source       out: out
    LineBuffer   in: in            out: win
    Conv         in: window, weight, bias    out: acc
    WeightStore  out: out
    BiasStore    out: out
    Requant      in: in            out: out
    MaxPool      in: win           out: out
    Dense        in: in, weight, bias        out: acc
    Sink         in: in

Token payloads are integers; a channel's format gives the per-element bit
container and the token arity (elements per token: 1 for scalar streams,
kh*kw*ch for windows, a whole kernel matrix for weight tokens).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatMismatch
from ..fixedpoint import FxFormat, QuantParams

ACTOR_KINDS = (
    "Source", "LineBuffer", "Conv", "WeightStore", "BiasStore",
    "Requant", "MaxPool", "Dense", "Sink",
)

IN_PORTS = {
    "Source": (), "LineBuffer": ("in",), "Conv": ("window", "weight", "bias"),
    "WeightStore": (), "BiasStore": (), "Requant": ("in",),
    "MaxPool": ("win",), "Dense": ("in", "weight", "bias"), "Sink": ("in",),
}
OUT_PORTS = {
    "Source": ("out",), "LineBuffer": ("win",), "Conv": ("acc",),
    "WeightStore": ("out",), "BiasStore": ("out",), "Requant": ("out",),
    "MaxPool": ("out",), "Dense": ("acc",), "Sink": (),
}


@dataclass(frozen=True)
class ChannelFormat:
    fmt: FxFormat
    arity: int = 1

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise FormatMismatch(f"token arity must be >= 1, got {self.arity}")


@dataclass(frozen=True, eq=False)
class Actor:
    id: str
    kind: str
    config: dict
    position: tuple[int, str] = (0, "")  # (layer index, template role) for merging

    def __post_init__(self) -> None:
        if self.kind not in ACTOR_KINDS:
            raise ValueError(f"unknown actor kind {self.kind!r}")


@dataclass(frozen=True)
class Channel:
    id: str
    src: tuple[str, str]
    dst: tuple[str, str]
    capacity: int
    token: ChannelFormat


@dataclass(frozen=True, eq=False)
class ActorNetwork:
    actors: tuple[Actor, ...]
    channels: tuple[Channel, ...]
    profile_name: str
    input_actor: str = "source"
    output_actor: str = "sink"
    meta: dict = field(default_factory=dict)

    def actor(self, actor_id: str) -> Actor:
        for a in self.actors:
            if a.id == actor_id:
                return a
        raise KeyError(actor_id)

    def in_channels(self, actor_id: str) -> list[Channel]:
        return [c for c in self.channels if c.dst[0] == actor_id]

    def out_channels(self, actor_id: str) -> list[Channel]:
        return [c for c in self.channels if c.src[0] == actor_id]


# --- serialization ----------------------------------------------------------


def fxformat_to_dict(f: FxFormat) -> dict:
    return {"word_bits": f.word_bits, "frac_bits": f.frac_bits,
            "signed": f.signed, "rounding": f.rounding, "overflow": f.overflow}


def fxformat_from_dict(d: dict) -> FxFormat:
    return FxFormat(**d)


def quant_to_dict(p: QuantParams | None) -> dict | None:
    if p is None:
        return None
    return {"scale": p.scale, "zero_point": p.zero_point, "bitwidth": p.bitwidth,
            "signed": p.signed, "narrow": p.narrow, "rounding": p.rounding}


def quant_from_dict(d: dict | None) -> QuantParams | None:
    return None if d is None else QuantParams(**d)


def _config_to_json(config: dict) -> dict:
    out = {}
    for k, v in config.items():
        if isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, FxFormat):
            out[k] = {"__fx__": fxformat_to_dict(v)}
        elif isinstance(v, QuantParams):
            out[k] = {"__quant__": quant_to_dict(v)}
        elif isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


def _config_from_json(config: dict) -> dict:
    out = {}
    for k, v in config.items():
        if isinstance(v, dict) and "__fx__" in v:
            out[k] = fxformat_from_dict(v["__fx__"])
        elif isinstance(v, dict) and "__quant__" in v:
            out[k] = quant_from_dict(v["__quant__"])
        elif isinstance(v, list) and k in ("weights", "bias", "columns"):
            out[k] = np.array(v, dtype=np.int64)
        elif isinstance(v, list):
            out[k] = tuple(v)
        else:
            out[k] = v
    return out


def network_to_dict(n: ActorNetwork) -> dict:
    return {
        "profile": n.profile_name,
        "actors": [
            {"id": a.id, "kind": a.kind, "position": list(a.position),
             "config": _config_to_json(a.config)}
            for a in n.actors
        ],
        "channels": [
            {
                "id": c.id, "src": list(c.src), "dst": list(c.dst),
                "capacity": c.capacity,
                "token": {**fxformat_to_dict(c.token.fmt), "arity": c.token.arity},
            }
            for c in n.channels
        ],
        "input_actor": n.input_actor,
        "output_actor": n.output_actor,
        "meta": n.meta,
    }


def network_from_dict(d: dict) -> ActorNetwork:
    actors = tuple(
        Actor(id=a["id"], kind=a["kind"], config=_config_from_json(a["config"]),
              position=(a["position"][0], a["position"][1]))
        for a in d["actors"]
    )
    channels = []
    for c in d["channels"]:
        tok = dict(c["token"])
        arity = tok.pop("arity")
        channels.append(
            Channel(
                id=c["id"], src=tuple(c["src"]), dst=tuple(c["dst"]),
                capacity=c["capacity"],
                token=ChannelFormat(fmt=fxformat_from_dict(tok), arity=arity),
            )
        )
    return ActorNetwork(
        actors=actors, channels=tuple(channels), profile_name=d["profile"],
        input_actor=d["input_actor"], output_actor=d["output_actor"],
        meta=d.get("meta", {}),
    )


def network_to_json(n: ActorNetwork, indent: int | None = 1) -> str:
    return json.dumps(network_to_dict(n), indent=indent, sort_keys=True)


def network_from_json(text: str) -> ActorNetwork:
    return network_from_dict(json.loads(text))


def networks_structurally_equal(a: ActorNetwork, b: ActorNetwork) -> bool:
    return network_to_json(a) == network_to_json(b)
