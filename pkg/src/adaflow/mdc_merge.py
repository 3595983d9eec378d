"""Multi-dataflow merging: unify signature-identical actors of several
profile networks and steer divergent regions through switch/select boxes.

Matching is position-anchored: an actor is shared only when every profile
holding its structural position (layer index, template role) carries a
behaviorally identical instance (same kind, same canonical config, same
parameter content).  Divergent regions are maximal runs of non-matching
actors; a switch (1->N demux) enters a region, a select (N->1 mux) leaves
it, and nothing is inserted inside.

Reconfiguration is quiescent: a profile change applies only between
inferences, so `configure` can return an ordinary ActorNetwork view wired
exactly like the standalone profile (shared instances included), which is
what makes per-profile bit-exactness checkable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .dataflow.structure import (
    Actor,
    ActorNetwork,
    Channel,
    ChannelFormat,
    _config_from_json,
    _config_to_json,
    fxformat_from_dict,
    fxformat_to_dict,
)
from .dataflow.validate import validate_network
from .errors import DuplicateProfileName, FormatMismatch, TopologyMismatch, UnknownProfile
from .fixedpoint import widen


@dataclass(frozen=True)
class ActorSignature:
    kind: str
    position: tuple[int, str]
    digest: str

    @classmethod
    def of(cls, actor: Actor) -> "ActorSignature":
        canon = json.dumps(_config_to_json(actor.config), sort_keys=True)
        digest = hashlib.sha256(canon.encode()).hexdigest()
        return cls(kind=actor.kind, position=actor.position, digest=digest)


@dataclass(frozen=True)
class SBox:
    id: str
    kind: str               # "switch" (1->N) or "select" (N->1)
    ways: int
    token: ChannelFormat    # widest of the way formats
    way_formats: tuple[ChannelFormat, ...]


@dataclass(frozen=True)
class MergedChannel:
    id: str
    src: tuple[str, str]    # actor or sbox endpoint
    dst: tuple[str, str]
    token: ChannelFormat
    shared_by: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class MergedNetwork:
    actors: tuple[Actor, ...]
    sboxes: tuple[SBox, ...]
    channels: tuple[MergedChannel, ...]
    profiles: tuple[str, ...]
    # per profile: actor ids, original channel specs, sbox way settings
    profile_table: dict[str, dict]

    def actor(self, actor_id: str) -> Actor:
        for a in self.actors:
            if a.id == actor_id:
                return a
        raise KeyError(actor_id)

    def shared_actors(self) -> list[Actor]:
        return [
            a for a in self.actors
            if sum(a.id in t["actors"] for t in self.profile_table.values()) >= 2
        ]

    def exclusive_actors(self, profile: str) -> list[Actor]:
        if profile not in self.profile_table:
            raise UnknownProfile(profile)
        mine = set(self.profile_table[profile]["actors"])
        out = []
        for a in self.actors:
            owners = [p for p, t in self.profile_table.items() if a.id in t["actors"]]
            if owners == [profile]:
                out.append(a)
        return [a for a in out if a.id in mine]


def _layer_topology(n: ActorNetwork) -> tuple:
    anchors = []
    for a in n.actors:
        if a.kind in ("Conv", "MaxPool", "Dense"):
            anchors.append((a.position[0], a.kind))
    return tuple(sorted(anchors))


def merge(networks: list[ActorNetwork]) -> MergedNetwork:
    """Greedy pairwise merge in input order over structural positions."""
    if not networks:
        raise TopologyMismatch("nothing to merge")
    names = [n.profile_name for n in networks]
    if len(set(names)) != len(names):
        raise DuplicateProfileName(f"profile names not distinct: {names}")
    topo = _layer_topology(networks[0])
    for n in networks[1:]:
        if _layer_topology(n) != topo:
            raise TopologyMismatch(
                f"{n.profile_name}: layer structure differs from {names[0]}"
            )

    # unify actors: instance id -> Actor; per profile: original id -> instance id
    instances: dict[str, Actor] = {}
    by_signature: dict[ActorSignature, str] = {}
    alias: dict[str, dict[str, str]] = {}
    for net in networks:
        amap: dict[str, str] = {}
        for actor in net.actors:
            sig = ActorSignature.of(actor)
            inst = by_signature.get(sig)
            if inst is None:
                inst = actor.id
                if inst in instances:  # same position, different behavior
                    inst = f"{actor.id}@{net.profile_name}"
                by_signature[sig] = inst
                instances[inst] = Actor(
                    id=inst, kind=actor.kind, config=actor.config,
                    position=actor.position,
                )
            amap[actor.id] = inst
        alias[net.profile_name] = amap

    # per-profile channel specs over unified instances
    profile_table: dict[str, dict] = {}
    for net in networks:
        amap = alias[net.profile_name]
        specs = []
        for c in net.channels:
            specs.append({
                "id": c.id,
                "src": (amap[c.src[0]], c.src[1]),
                "dst": (amap[c.dst[0]], c.dst[1]),
                "capacity": c.capacity,
                "token": c.token,
            })
        profile_table[net.profile_name] = {
            "actors": [amap[a.id] for a in net.actors],
            "channels": specs,
            "sbox_ways": {},
        }

    # merged channel construction with sbox insertion at divergences
    sboxes: list[SBox] = []
    channels: list[MergedChannel] = []

    # group profile channels by source endpoint, then by destination endpoint
    out_groups: dict[tuple, dict] = {}
    for name in names:
        for spec in profile_table[name]["channels"]:
            grp = out_groups.setdefault(spec["src"], {})
            grp.setdefault(spec["dst"], []).append((name, spec))

    cid = 0

    def fresh(prefix: str) -> str:
        nonlocal cid
        cid += 1
        return f"{prefix}{cid:02d}"

    in_groups: dict[tuple, dict] = {}
    for name in names:
        for spec in profile_table[name]["channels"]:
            grp = in_groups.setdefault(spec["dst"], {})
            grp.setdefault(spec["src"], []).append((name, spec))

    handled: set[tuple] = set()
    for src, dsts in sorted(out_groups.items()):
        if len(dsts) > 1:
            # divergence entry: one switch, one way per destination
            ways = sorted(dsts)
            fmts = [dsts[d][0][1]["token"] for d in ways]
            box_fmt = _widen_formats(fmts)
            box = SBox(id=fresh("switch"), kind="switch", ways=len(ways),
                       token=box_fmt, way_formats=tuple(fmts))
            sboxes.append(box)
            channels.append(MergedChannel(
                id=fresh("mc"), src=src, dst=(box.id, "in"), token=box_fmt,
                shared_by=tuple(n for d in ways for n, _ in dsts[d]),
            ))
            for w, d in enumerate(ways):
                users = tuple(n for n, _ in dsts[d])
                channels.append(MergedChannel(
                    id=fresh("mc"), src=(box.id, f"w{w}"), dst=d,
                    token=dsts[d][0][1]["token"], shared_by=users,
                ))
                for user in users:
                    profile_table[user]["sbox_ways"][box.id] = w
                handled.add((src, d))

    for dst, srcs in sorted(in_groups.items()):
        if len(srcs) > 1:
            ways = sorted(srcs)
            fmts = [srcs[s][0][1]["token"] for s in ways]
            box_fmt = _widen_formats(fmts)
            box = SBox(id=fresh("select"), kind="select", ways=len(ways),
                       token=box_fmt, way_formats=tuple(fmts))
            sboxes.append(box)
            for w, s in enumerate(ways):
                users = tuple(n for n, _ in srcs[s])
                channels.append(MergedChannel(
                    id=fresh("mc"), src=s, dst=(box.id, f"w{w}"),
                    token=srcs[s][0][1]["token"], shared_by=users,
                ))
                for user in users:
                    profile_table[user]["sbox_ways"][box.id] = w
                handled.add((s, dst))
            channels.append(MergedChannel(
                id=fresh("mc"), src=(box.id, "out"), dst=dst, token=box_fmt,
                shared_by=tuple(n for s in ways for n, _ in srcs[s]),
            ))

    for src, dsts in sorted(out_groups.items()):
        for d, users in sorted(dsts.items()):
            if (src, d) in handled:
                continue
            channels.append(MergedChannel(
                id=fresh("mc"), src=src, dst=d, token=users[0][1]["token"],
                shared_by=tuple(n for n, _ in users),
            ))

    merged = MergedNetwork(
        actors=tuple(instances[i] for i in sorted(instances)),
        sboxes=tuple(sboxes),
        channels=tuple(channels),
        profiles=tuple(names),
        profile_table=profile_table,
    )
    for name in names:  # every configured profile must stand on its own
        validate_network(configure(merged, name))
    return merged


def _widen_formats(fmts: list[ChannelFormat]) -> ChannelFormat:
    arities = {f.arity for f in fmts}
    if len(arities) != 1:
        raise FormatMismatch(f"sbox ways with differing arities {arities}")
    wide = fmts[0].fmt
    for f in fmts[1:]:
        wide = widen(wide, f.fmt)
    for f in fmts:  # narrow ways embed losslessly into the box format
        if widen(f.fmt, wide) != wide:
            raise FormatMismatch(f"way format {f.fmt} does not embed in {wide}")
    return ChannelFormat(fmt=wide, arity=fmts[0].arity)


def configure(m: MergedNetwork, profile: str) -> ActorNetwork:
    """Resolve SBoxes to wires: the profile's executable sub-network."""
    if profile not in m.profile_table:
        raise UnknownProfile(f"profile {profile!r} not in {list(m.profiles)}")
    table = m.profile_table[profile]
    actors = tuple(m.actor(aid) for aid in table["actors"])
    channels = tuple(
        Channel(id=s["id"], src=tuple(s["src"]), dst=tuple(s["dst"]),
                capacity=s["capacity"], token=s["token"])
        for s in table["channels"]
    )
    source = next(a.id for a in actors if a.kind == "Source")
    sink = next(a.id for a in actors if a.kind == "Sink")
    return ActorNetwork(
        actors=actors, channels=channels, profile_name=profile,
        input_actor=source, output_actor=sink,
        meta={"merged_from": list(m.profiles)},
    )


def sharing_report(m: MergedNetwork, cost_model=None) -> dict:
    """Sharing counts plus additive cost-model deltas."""
    from .engine.metrics import estimate, fit_cost_model

    model = cost_model or fit_cost_model()
    shared = m.shared_actors()
    per_profile = {}
    costs = {}
    for name in m.profiles:
        net = configure(m, name)
        per_profile[name] = {
            "actors": len(net.actors),
            "exclusive": len(m.exclusive_actors(name)),
        }
        costs[name] = estimate(net, model)
    merged_metrics = estimate_merged(m, model)
    overhead = {
        "lut_pct": merged_metrics["lut_pct"] - max(c.lut_pct for c in costs.values()),
        "bram_pct": merged_metrics["bram_pct"] - max(c.bram_pct for c in costs.values()),
    }
    savings = {
        "lut_pct": sum(c.lut_pct for c in costs.values()) - merged_metrics["lut_pct"],
        "bram_pct": sum(c.bram_pct for c in costs.values()) - merged_metrics["bram_pct"],
    }
    return {
        "profiles": list(m.profiles),
        "shared_actor_count": len(shared),
        "total_actor_count": len(m.actors),
        "per_profile": per_profile,
        "sbox_count": len(m.sboxes),
        "merged": merged_metrics,
        "per_profile_metrics": {k: v for k, v in
                                ((n, costs[n]) for n in m.profiles)},
        "overhead": overhead,
        "savings": savings,
    }


def estimate_merged(m: MergedNetwork, cost_model=None) -> dict:
    """Area of the merged engine: every instance once plus SBox overhead;
    per-profile power/latency from the configured sub-networks."""
    from .engine.metrics import (
        _denominators,
        actor_units,
        estimate,
        fit_cost_model,
    )

    model = cost_model or fit_cost_model()
    denoms = _denominators(configure(m, m.profiles[0]).actors)
    lut, bram = model.lut_coef[0], model.bram_coef[0]
    for a in m.actors:
        dl, db, _ = actor_units(a, denoms, model)
        lut += dl
        bram += db
    for box in m.sboxes:
        lut += model.sbox_lut_per_way * box.ways
        bram += model.sbox_bram_per_way * box.ways
    per_profile = {}
    for name in m.profiles:
        pm = estimate(configure(m, name), model)
        sbox_power = sum(model.sbox_power_mw_per_way * b.ways for b in m.sboxes)
        per_profile[name] = {
            "latency_us": pm.latency_us,
            "power_mw": pm.power_mw + sbox_power,
        }
    latencies = {round(v["latency_us"], 9) for v in per_profile.values()}
    return {
        "lut_pct": lut,
        "bram_pct": bram,
        "latency_us": latencies.pop() if len(latencies) == 1 else None,
        "per_profile": per_profile,
    }


# --- serialization -----------------------------------------------------------


def _cf_to_dict(cf: ChannelFormat) -> dict:
    return {**fxformat_to_dict(cf.fmt), "arity": cf.arity}


def _cf_from_dict(d: dict) -> ChannelFormat:
    d = dict(d)
    arity = d.pop("arity")
    return ChannelFormat(fmt=fxformat_from_dict(d), arity=arity)


def merged_to_json(m: MergedNetwork, indent: int | None = 1) -> str:
    doc = {
        "profiles": list(m.profiles),
        "actors": [
            {"id": a.id, "kind": a.kind, "position": list(a.position),
             "config": _config_to_json(a.config)}
            for a in m.actors
        ],
        "sboxes": [
            {"id": b.id, "kind": b.kind, "ways": b.ways,
             "token": _cf_to_dict(b.token),
             "way_formats": [_cf_to_dict(f) for f in b.way_formats]}
            for b in m.sboxes
        ],
        "channels": [
            {"id": c.id, "src": list(c.src), "dst": list(c.dst),
             "token": _cf_to_dict(c.token), "shared_by": list(c.shared_by)}
            for c in m.channels
        ],
        "profile_table": {
            name: {
                "actors": t["actors"],
                "sbox_ways": t["sbox_ways"],
                "channels": [
                    {"id": s["id"], "src": list(s["src"]), "dst": list(s["dst"]),
                     "capacity": s["capacity"], "token": _cf_to_dict(s["token"])}
                    for s in t["channels"]
                ],
            }
            for name, t in m.profile_table.items()
        },
    }
    return json.dumps(doc, indent=indent, sort_keys=True)


def merged_from_json(text: str) -> MergedNetwork:
    d = json.loads(text)
    actors = tuple(
        Actor(id=a["id"], kind=a["kind"], config=_config_from_json(a["config"]),
              position=(a["position"][0], a["position"][1]))
        for a in d["actors"]
    )
    sboxes = tuple(
        SBox(id=b["id"], kind=b["kind"], ways=b["ways"],
             token=_cf_from_dict(b["token"]),
             way_formats=tuple(_cf_from_dict(f) for f in b["way_formats"]))
        for b in d["sboxes"]
    )
    channels = tuple(
        MergedChannel(id=c["id"], src=tuple(c["src"]), dst=tuple(c["dst"]),
                      token=_cf_from_dict(c["token"]),
                      shared_by=tuple(c["shared_by"]))
        for c in d["channels"]
    )
    table = {}
    for name, t in d["profile_table"].items():
        table[name] = {
            "actors": t["actors"],
            "sbox_ways": t["sbox_ways"],
            "channels": [
                {"id": s["id"], "src": tuple(s["src"]), "dst": tuple(s["dst"]),
                 "capacity": s["capacity"], "token": _cf_from_dict(s["token"])}
                for s in t["channels"]
            ],
        }
    return MergedNetwork(
        actors=actors, sboxes=sboxes, channels=channels,
        profiles=tuple(d["profiles"]), profile_table=table,
    )
