"""Profile selection policies and battery mission simulation."""

import pytest

from adaflow.engine.metrics import ProfileMetrics
from adaflow.errors import InfeasibleConstraint, UnknownProfile
from adaflow.runtime import (
    BatteryState,
    Policy,
    compare,
    select_profile,
    simulate_mission,
)

A8W8 = ProfileMetrics(latency_us=329.0, lut_pct=11, bram_pct=17,
                      power_mw=142.0, accuracy_pct=98.8)
# relative working point: 5% power saving, 1.5% accuracy drop vs A8-W8
MIXED = ProfileMetrics(latency_us=329.0, lut_pct=9, bram_pct=17,
                       power_mw=142.0 * 0.95, accuracy_pct=98.8 - 1.5)
METRICS = {"A8-W8": A8W8, "Mixed": MIXED}


def closed_form_fixed(capacity_mwh, power_mw, latency_us):
    hours = capacity_mwh / power_mw
    return hours, hours * 3600.0 / (latency_us * 1e-6)


class TestSelectProfile:
    def test_threshold_high(self):
        b = BatteryState(10000, 6000)
        p = Policy.threshold(0.5, "A8-W8", "Mixed")
        assert select_profile(p, b, METRICS) == "A8-W8"

    def test_threshold_low(self):
        b = BatteryState(10000, 4000)
        p = Policy.threshold(0.5, "A8-W8", "Mixed")
        assert select_profile(p, b, METRICS) == "Mixed"

    def test_threshold_boundary_is_high(self):
        b = BatteryState(10000, 5000)
        p = Policy.threshold(0.5, "A8-W8", "Mixed")
        assert select_profile(p, b, METRICS) == "A8-W8"

    def test_constraint_picks_lowest_power(self):
        p = Policy.constraint(97.0)
        assert select_profile(p, BatteryState(1), METRICS) == "Mixed"
        assert METRICS["Mixed"].power_mw == pytest.approx(134.9)

    def test_constraint_needs_accuracy(self):
        p = Policy.constraint(99.5)
        with pytest.raises(InfeasibleConstraint):
            select_profile(p, BatteryState(1), METRICS)

    def test_fixed(self):
        assert select_profile(Policy.fixed("A8-W8"), BatteryState(1), METRICS) == "A8-W8"

    def test_unknown_profile(self):
        with pytest.raises(UnknownProfile):
            select_profile(Policy.fixed("A2-W2"), BatteryState(1), METRICS)

    def test_parse(self):
        assert Policy.parse("fixed:A8-W8").kind == "fixed"
        p = Policy.parse("threshold:0.5:A8-W8:Mixed")
        assert (p.theta, p.high, p.low) == (0.5, "A8-W8", "Mixed")
        assert Policy.parse("constraint:97").min_accuracy_pct == 97.0
        with pytest.raises(ValueError):
            Policy.parse("nonsense")


class TestMission:
    def test_fixed_profile_closed_form(self):
        log = simulate_mission(Policy.fixed("A8-W8"), BatteryState(10000.0),
                               METRICS, step_s=1.0)
        hours, classifications = closed_form_fixed(10000.0, 142.0, 329.0)
        assert hours == pytest.approx(70.42, abs=0.005)
        assert log.duration_h == pytest.approx(hours, rel=1e-3)
        assert log.classifications == pytest.approx(classifications, rel=1e-3)
        assert log.classifications == pytest.approx(7.706e8, rel=1e-3)
        assert log.switches == 0

    def test_threshold_two_phase_closed_form(self):
        log = simulate_mission(Policy.threshold(0.5, "A8-W8", "Mixed"),
                               BatteryState(10000.0), METRICS, step_s=1.0)
        hours = 5000.0 / 142.0 + 5000.0 / 134.9
        classifications = hours * 3600.0 / 329e-6
        assert hours == pytest.approx(72.27, abs=0.01)
        assert log.duration_h == pytest.approx(hours, rel=1e-3)
        assert log.classifications == pytest.approx(classifications, rel=1e-3)
        assert log.classifications == pytest.approx(7.909e8, rel=1e-3)
        assert log.switches == 1
        assert [s.profile for s in log.segments] == ["A8-W8", "Mixed"]

    def test_zero_capacity(self):
        log = simulate_mission(Policy.fixed("A8-W8"), BatteryState(0.0), METRICS)
        assert log.classifications == 0 and log.segments == []

    def test_energy_conservation_exact(self):
        b = BatteryState(537.0)
        log = simulate_mission(Policy.threshold(0.3, "A8-W8", "Mixed"), b,
                               METRICS, step_s=0.7)
        assert log.energy_spent_mwh == b.capacity_mwh - b.remaining_mwh
        assert b.remaining_mwh == 0.0
        assert log.classifications == pytest.approx(
            sum(s.classifications for s in log.segments)
        )

    def test_theta_monotonicity(self):
        prev = None
        for theta in (0.0, 0.25, 0.5, 0.75, 1.0):
            log = simulate_mission(Policy.threshold(theta, "A8-W8", "Mixed"),
                                   BatteryState(2000.0), METRICS, step_s=1.0)
            if prev is not None:
                assert log.classifications >= prev - 1e-6
            prev = log.classifications

    def test_simulator_matches_closed_form_small_steps(self):
        for step in (1.0, 0.5, 0.1):
            log = simulate_mission(Policy.threshold(0.5, "A8-W8", "Mixed"),
                                   BatteryState(100.0), METRICS, step_s=step)
            hours = 50.0 / 142.0 + 50.0 / 134.9
            assert log.duration_h == pytest.approx(hours, rel=1e-3)

    def test_merged_profile_validation(self):
        with pytest.raises(UnknownProfile):
            simulate_mission(Policy.fixed("A8-W8"), BatteryState(1.0), METRICS,
                             merged_profiles=["Mixed"])


class TestCompare:
    def test_identical_logs(self):
        a = simulate_mission(Policy.fixed("A8-W8"), BatteryState(500.0), METRICS)
        b = simulate_mission(Policy.fixed("A8-W8"), BatteryState(500.0), METRICS)
        gains = compare(a, b)
        assert gains["duration_gain_pct"] == pytest.approx(0.0)
        assert gains["classification_gain_pct"] == pytest.approx(0.0)

    def test_threshold_gains(self):
        adaptive = simulate_mission(Policy.threshold(0.5, "A8-W8", "Mixed"),
                                    BatteryState(10000.0), METRICS)
        fixed = simulate_mission(Policy.fixed("A8-W8"),
                                 BatteryState(10000.0), METRICS)
        gains = compare(adaptive, fixed)
        assert gains["duration_gain_pct"] == pytest.approx(2.63, abs=0.02)
        assert gains["classification_gain_pct"] == pytest.approx(2.63, abs=0.02)
        assert adaptive.duration_h > fixed.duration_h

    def test_always_low_power_limit(self):
        adaptive = simulate_mission(Policy.threshold(1.0, "A8-W8", "Mixed"),
                                    BatteryState(10000.0), METRICS)
        fixed = simulate_mission(Policy.fixed("A8-W8"),
                                 BatteryState(10000.0), METRICS)
        gains = compare(adaptive, fixed)
        assert gains["duration_gain_pct"] == pytest.approx(
            (142.0 / 134.9 - 1.0) * 100.0, abs=0.02
        )

    def test_log_serialization(self):
        log = simulate_mission(Policy.threshold(0.5, "A8-W8", "Mixed"),
                               BatteryState(300.0), METRICS)
        assert log.to_csv().startswith("start_h,profile,")
        assert '"switches": 1' in log.to_json()
