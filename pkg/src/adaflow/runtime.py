"""Battery-aware profile management and mission simulation.

The Profile Manager picks an execution profile from the energy state and
the policy; the mission loop spends energy at the active profile's power
draw and accrues classifications at the topology's fixed latency.  Profile
switches happen only between inferences (quiescent switching), which at
mission time scale means between simulation steps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InfeasibleConstraint, UnknownProfile
from .engine.metrics import ProfileMetrics

MWH_PER_MW_S = 1.0 / 3600.0


@dataclass
class BatteryState:
    capacity_mwh: float
    remaining_mwh: float | None = None

    def __post_init__(self) -> None:
        if self.remaining_mwh is None:
            self.remaining_mwh = self.capacity_mwh
        if not 0 <= self.remaining_mwh <= self.capacity_mwh:
            raise ValueError(
                f"remaining {self.remaining_mwh} outside [0, {self.capacity_mwh}]"
            )

    @property
    def fraction(self) -> float:
        return self.remaining_mwh / self.capacity_mwh if self.capacity_mwh else 0.0


@dataclass(frozen=True)
class Policy:
    kind: str  # fixed | threshold | constraint
    profile: str | None = None
    theta: float | None = None
    high: str | None = None
    low: str | None = None
    min_accuracy_pct: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "fixed":
            if not self.profile:
                raise ValueError("fixed policy needs a profile")
        elif self.kind == "threshold":
            if self.theta is None or not 0 <= self.theta <= 1:
                raise ValueError("threshold needs theta in [0, 1]")
            if not self.high or not self.low:
                raise ValueError("threshold needs high and low profiles")
        elif self.kind == "constraint":
            if self.min_accuracy_pct is None:
                raise ValueError("constraint needs min_accuracy_pct")
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def fixed(cls, profile: str) -> "Policy":
        return cls(kind="fixed", profile=profile)

    @classmethod
    def threshold(cls, theta: float, high: str, low: str) -> "Policy":
        return cls(kind="threshold", theta=theta, high=high, low=low)

    @classmethod
    def constraint(cls, min_accuracy_pct: float) -> "Policy":
        return cls(kind="constraint", min_accuracy_pct=min_accuracy_pct)

    @classmethod
    def parse(cls, text: str) -> "Policy":
        """fixed:NAME | threshold:THETA:HIGH:LOW | constraint:MIN_ACC"""
        parts = text.split(":")
        try:
            if parts[0] == "fixed" and len(parts) == 2:
                return cls.fixed(parts[1])
            if parts[0] == "threshold" and len(parts) == 4:
                return cls.threshold(float(parts[1]), parts[2], parts[3])
            if parts[0] == "constraint" and len(parts) == 2:
                return cls.constraint(float(parts[1]))
        except ValueError as e:
            raise ValueError(f"bad policy {text!r}: {e}") from None
        raise ValueError(f"bad policy {text!r}")

    def profiles_used(self) -> list[str]:
        if self.kind == "fixed":
            return [self.profile]
        if self.kind == "threshold":
            return [self.high, self.low]
        return []


@dataclass
class MissionSegment:
    """Run of consecutive steps under one profile."""

    start_h: float
    profile: str
    duration_h: float = 0.0
    energy_mwh: float = 0.0
    classifications: float = 0.0


@dataclass
class MissionLog:
    battery: BatteryState
    segments: list[MissionSegment] = field(default_factory=list)
    duration_h: float = 0.0
    classifications: float = 0.0
    energy_spent_mwh: float = 0.0
    switches: int = 0

    def to_csv(self) -> str:
        lines = ["start_h,profile,duration_h,energy_mwh,classifications"]
        for s in self.segments:
            lines.append(
                f"{s.start_h:.6f},{s.profile},{s.duration_h:.6f},"
                f"{s.energy_mwh:.6f},{s.classifications:.1f}"
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "capacity_mwh": self.battery.capacity_mwh,
                "duration_h": self.duration_h,
                "classifications": self.classifications,
                "energy_spent_mwh": self.energy_spent_mwh,
                "switches": self.switches,
                "segments": [
                    {"start_h": s.start_h, "profile": s.profile,
                     "duration_h": s.duration_h, "energy_mwh": s.energy_mwh,
                     "classifications": s.classifications}
                    for s in self.segments
                ],
            },
            indent=1, sort_keys=True,
        )


def select_profile(policy: Policy, battery: BatteryState,
                   metrics: dict[str, ProfileMetrics]) -> str:
    for name in policy.profiles_used():
        if name not in metrics:
            raise UnknownProfile(f"policy references unknown profile {name!r}")
    if policy.kind == "fixed":
        return policy.profile
    if policy.kind == "threshold":
        return policy.high if battery.fraction >= policy.theta else policy.low
    feasible = {
        name: m for name, m in metrics.items()
        if m.accuracy_pct is not None
        and m.accuracy_pct >= policy.min_accuracy_pct
    }
    if not feasible:
        raise InfeasibleConstraint(
            f"no profile reaches {policy.min_accuracy_pct}% accuracy"
        )
    return min(feasible, key=lambda n: (feasible[n].power_mw, n))


def simulate_mission(policy: Policy, battery: BatteryState,
                     metrics: dict[str, ProfileMetrics],
                     latency_us: float | None = None,
                     step_s: float = 1.0,
                     merged_profiles: list[str] | None = None) -> MissionLog:
    """Discrete-time mission: select, spend power*step, accrue work, stop
    at an empty battery. Deterministic; the last step is truncated so the
    energy accounting closes exactly."""
    if step_s <= 0:
        raise ValueError("step_s must be positive")
    if merged_profiles is not None:
        for name in policy.profiles_used():
            if name not in merged_profiles:
                raise UnknownProfile(
                    f"profile {name!r} not offered by the merged engine"
                )
    log = MissionLog(battery=battery)
    seg: MissionSegment | None = None
    elapsed_h = 0.0
    while battery.remaining_mwh > 0:
        name = select_profile(policy, battery, metrics)
        m = metrics[name]
        lat_us = latency_us if latency_us is not None else m.latency_us
        if m.power_mw <= 0:
            raise ValueError(f"profile {name!r} has non-positive power")
        dt_s = min(step_s, battery.remaining_mwh / (m.power_mw * MWH_PER_MW_S))
        energy = min(m.power_mw * dt_s * MWH_PER_MW_S, battery.remaining_mwh)
        if energy <= 0:
            break
        done = dt_s * 1e6 / lat_us
        if seg is None or seg.profile != name:
            if seg is not None:
                log.switches += 1
            seg = MissionSegment(start_h=elapsed_h, profile=name)
            log.segments.append(seg)
        seg.duration_h += dt_s / 3600.0
        seg.energy_mwh += energy
        seg.classifications += done
        elapsed_h += dt_s / 3600.0
        battery.remaining_mwh = max(battery.remaining_mwh - energy, 0.0)
    # totals derive from the segments and the battery, so the conservation
    # identities hold exactly in the log's own accounting
    log.duration_h = sum(s.duration_h for s in log.segments)
    log.classifications = sum(s.classifications for s in log.segments)
    log.energy_spent_mwh = battery.capacity_mwh - battery.remaining_mwh
    return log


def compare(adaptive: MissionLog, fixed: MissionLog) -> dict:
    """Relative duration/classification gains of adaptive over fixed."""
    return {
        "duration_gain_pct":
            100.0 * (adaptive.duration_h / fixed.duration_h - 1.0)
            if fixed.duration_h else 0.0,
        "classification_gain_pct":
            100.0 * (adaptive.classifications / fixed.classifications - 1.0)
            if fixed.classifications else 0.0,
    }
