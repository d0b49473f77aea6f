"""Detector tests: hard brake, erratic driving, blind spot, give way, VRU."""

import math

import pytest

from v2xsim.alerts import (
    BRAKE_WINDOW,
    HISTORY_CAP,
    AlertEvent,
    ImuSample,
    Thresholds,
    TrackState,
    detect_abnormal,
    detect_blind_spot,
    detect_emergency_brake,
    detect_give_way,
    vru_alert_targets,
)
from v2xsim.geo import Heading, LocalPoint, Pose2D
from v2xsim.wire import AlertKind, NodeId, Severity

TH = Thresholds()


def track(node, samples):
    """samples: (t, x, y, heading_deg, speed) or the same plus an ImuSample."""
    ts = TrackState(node)
    for s in samples:
        t, x, y, hdg, speed = s[:5]
        imu = s[5] if len(s) > 5 else ImuSample()
        ts.add(t, Pose2D(LocalPoint(x, y), Heading(hdg), speed), imu)
    return ts


def braking_track(speeds, node=None):
    node = node or NodeId.obu(1)
    return track(node, [(100 * i, 0.0, 0.0, 0.0, v)
                        for i, v in enumerate(speeds)])


class TestTrackState:
    def test_history_capped(self):
        ts = braking_track([10.0] * (HISTORY_CAP + 10))
        assert len(ts) == HISTORY_CAP

    def test_monotonic_timestamps_enforced(self):
        ts = braking_track([10.0, 10.0])
        with pytest.raises(ValueError):
            ts.add(100, Pose2D(LocalPoint(0, 0), Heading(0), 1.0), ImuSample())

    def test_latest(self):
        ts = braking_track([10.0, 9.0])
        assert ts.latest[0] == 100
        assert TrackState(NodeId.obu(2)).latest is None

    def test_imu_bounds(self):
        with pytest.raises(ValueError):
            ImuSample(accel_x=250.0)
        with pytest.raises(ValueError):
            ImuSample(yaw_rate=math.nan)


class TestThresholds:
    def test_brake_window_pinned(self):
        with pytest.raises(ValueError):
            Thresholds(brake_window=6)

    def test_positive_required(self):
        with pytest.raises(ValueError):
            Thresholds(giveway_distance=0.0)
        with pytest.raises(ValueError):
            Thresholds(abnormal_persist=0)


class TestEmergencyBrake:
    def test_fires_on_steady_hard_drop(self):
        ev = detect_emergency_brake(
            braking_track([20, 19.1, 18.2, 17.3, 16.4, 15.5, 14.6]), TH)
        assert ev is not None
        assert ev.kind == AlertKind.EMERGENCY_BRAKE
        assert ev.severity == Severity.CRITICAL
        assert ev.subject == NodeId.obu(1)
        assert ev.timestamp_ms == 600

    def test_threshold_is_strict(self):
        # drops exactly at the limit must stay silent; 0.5 is picked so
        # every speed and every diff is an exact binary float
        th = Thresholds(brake_drop_per_packet=0.5)
        speeds = [20 - 0.5 * i for i in range(BRAKE_WINDOW)]
        assert detect_emergency_brake(braking_track(speeds), th) is None

    def test_below_threshold_silent(self):
        speeds = [20 - 0.75 * i for i in range(BRAKE_WINDOW)]
        assert detect_emergency_brake(braking_track(speeds), TH) is None

    def test_just_over_threshold(self):
        speeds = [20 - 0.801 * i for i in range(BRAKE_WINDOW)]
        assert detect_emergency_brake(braking_track(speeds), TH) is not None

    def test_single_sharp_drop_suffices(self):
        ev = detect_emergency_brake(
            braking_track([20, 20, 20, 20, 20, 20, 19.1]), TH)
        assert ev is not None

    def test_partial_window_never_fires(self):
        assert detect_emergency_brake(braking_track([20, 10, 5, 2, 1, 0.5]),
                                      TH) is None

    def test_old_drop_slides_out(self):
        # the hard drop is 8 samples back; the last 7 are gentle
        speeds = [20, 10] + [10 - 0.1 * i for i in range(1, 7)]
        assert detect_emergency_brake(braking_track(speeds), TH) is None

    def test_acceleration_ignored(self):
        speeds = [5 + i for i in range(BRAKE_WINDOW)]
        assert detect_emergency_brake(braking_track(speeds), TH) is None

    def test_custom_threshold(self):
        th = Thresholds(brake_drop_per_packet=2.0)
        speeds = [20 - 1.5 * i for i in range(BRAKE_WINDOW)]
        assert detect_emergency_brake(braking_track(speeds), th) is None
        assert detect_emergency_brake(braking_track(speeds), TH) is not None


class TestAbnormal:
    def make(self, samples):
        return track(NodeId.obu(3), samples)

    def test_sharp_turns_fire(self):
        ts = self.make([(100 * i, 0, 0, 0, 12.0, ImuSample(yaw_rate=35.0))
                        for i in range(3)])
        ev = detect_abnormal(ts, TH)
        assert ev is not None
        assert ev.kind == AlertKind.ABNORMAL_VEHICLE
        assert ev.severity == Severity.WARN

    def test_needs_persistence(self):
        ts = self.make([(100 * i, 0, 0, 0, 12.0, ImuSample(yaw_rate=35.0))
                        for i in range(2)])
        assert detect_abnormal(ts, TH) is None

    def test_yaw_at_low_speed_ignored(self):
        # a tight parking-lot turn is not erratic driving
        ts = self.make([(100 * i, 0, 0, 0, 2.0, ImuSample(yaw_rate=35.0))
                        for i in range(3)])
        assert detect_abnormal(ts, TH) is None

    def test_lateral_accel_alone_fires(self):
        ts = self.make([(100 * i, 0, 0, 0, 2.0, ImuSample(accel_y=4.5))
                        for i in range(3)])
        assert detect_abnormal(ts, TH) is not None

    def test_gap_resets(self):
        samples = [(0, 0, 0, 0, 12.0, ImuSample(yaw_rate=35.0)),
                   (100, 0, 0, 0, 12.0, ImuSample()),
                   (200, 0, 0, 0, 12.0, ImuSample(yaw_rate=35.0))]
        assert detect_abnormal(self.make(samples), TH) is None

    def test_only_tail_matters(self):
        samples = [(100 * i, 0, 0, 0, 12.0, ImuSample())
                   for i in range(5)]
        samples += [(100 * (5 + i), 0, 0, 0, 12.0, ImuSample(yaw_rate=40.0))
                    for i in range(3)]
        assert detect_abnormal(self.make(samples), TH) is not None


def converging_pair(merge_angle=90.0, start=60.0, step=10.0, n=4):
    """EV northbound on x=0, other eastbound on y=0, meeting at the origin."""
    ev = track(NodeId.obu(9, emergency=True),
               [(100 * i, 0.0, -(start - step * i), 0.0, 10.0)
                for i in range(n)])
    other = track(NodeId.obu(4),
                  [(100 * i, -(start - step * i), 0.0, merge_angle, 10.0)
                   for i in range(n)])
    return ev, other


class TestBlindSpot:
    def test_converging_pair_fires(self):
        ev, other = converging_pair()
        got = detect_blind_spot(ev, other, 90.0, TH)
        assert got is not None
        assert got.kind == AlertKind.BLIND_SPOT_COLLISION
        assert got.severity == Severity.CRITICAL
        assert got.subject == ev.id
        assert got.emitter == other.id
        assert got.location.x == pytest.approx(0.0, abs=1e-9)
        assert got.location.y == pytest.approx(0.0, abs=1e-9)

    def test_mirror_event(self):
        ev, other = converging_pair()
        got = detect_blind_spot(other, ev, 90.0, TH)
        assert got is not None
        assert got.subject == other.id
        assert got.emitter == ev.id

    def test_wrong_merge_angle(self):
        ev, other = converging_pair()
        assert detect_blind_spot(ev, other, 45.0, TH) is None

    def test_tolerance_band(self):
        ev, other = converging_pair()
        assert detect_blind_spot(ev, other, 99.0, TH) is not None
        assert detect_blind_spot(ev, other, 101.0, TH) is None

    def test_too_far_from_crossing(self):
        # closest vehicle ends 60 m out, past the 50 m gate
        ev, other = converging_pair(start=90.0)
        assert detect_blind_spot(ev, other, 90.0, TH) is None

    def test_must_be_closing(self):
        ev, other = converging_pair()
        # other vehicle backs away on its last sample
        other.add(400, Pose2D(LocalPoint(-40.0, 0.0), Heading(90.0), 10.0),
                  ImuSample())
        ev.add(400, Pose2D(LocalPoint(0.0, -20.0), Heading(0.0), 10.0),
               ImuSample())
        assert detect_blind_spot(ev, other, 90.0, TH) is None

    def test_parallel_headings_is_none(self):
        a = track(NodeId.obu(1), [(100 * i, 0.0, -50.0 + 10 * i, 0.0, 10.0)
                                  for i in range(4)])
        b = track(NodeId.obu(2), [(100 * i, 3.5, -60.0 + 10 * i, 0.0, 10.0)
                                  for i in range(4)])
        assert detect_blind_spot(a, b, 0.0, TH) is None

    def test_short_history_is_none(self):
        ev, other = converging_pair(n=3)
        assert detect_blind_spot(ev, other, 90.0, TH) is None


class TestGiveWay:
    def ev_at_origin(self, speed=20.0):
        return track(NodeId.obu(9, emergency=True),
                     [(0, 0.0, 0.0, 0.0, speed)])

    def neighbor(self, x, y, speed=2.0, serial=4):
        return track(NodeId.obu(serial), [(0, x, y, 0.0, speed)])

    def test_slow_vehicle_ahead(self):
        got = detect_give_way(self.ev_at_origin(),
                              [self.neighbor(0.0, 29.9)], TH)
        assert len(got) == 1
        assert got[0].kind == AlertKind.EV_GIVE_WAY
        assert got[0].subject == NodeId.obu(4)
        assert got[0].severity == Severity.CRITICAL

    def test_distance_gate_is_strict(self):
        assert detect_give_way(self.ev_at_origin(),
                               [self.neighbor(0.0, 30.0)], TH) == []

    def test_behind_is_ignored(self):
        assert detect_give_way(self.ev_at_origin(),
                               [self.neighbor(0.0, -10.0)], TH) == []

    def test_abeam_is_ignored(self):
        assert detect_give_way(self.ev_at_origin(),
                               [self.neighbor(10.0, 0.5)], TH) == []

    def test_slow_closing_is_warn(self):
        got = detect_give_way(self.ev_at_origin(speed=6.0),
                              [self.neighbor(0.0, 20.0, speed=2.0)], TH)
        assert got[0].severity == Severity.WARN

    def test_multiple_neighbors(self):
        nbs = [self.neighbor(0.0, 10.0, serial=4),
               self.neighbor(0.0, 20.0, serial=5),
               self.neighbor(0.0, 40.0, serial=6)]
        got = detect_give_way(self.ev_at_origin(), nbs, TH)
        assert sorted(e.subject.serial for e in got) == [4, 5]

    def test_requires_emergency_flag(self):
        plain = track(NodeId.obu(1), [(0, 0.0, 0.0, 0.0, 20.0)])
        with pytest.raises(ValueError):
            detect_give_way(plain, [], TH)

    def test_coincident_neighbor_skipped(self):
        got = detect_give_way(self.ev_at_origin(),
                              [self.neighbor(0.0, 0.0)], TH)
        assert got == []

    def test_self_skipped(self):
        ev = self.ev_at_origin()
        assert detect_give_way(ev, [ev], TH) == []


class TestVruTargets:
    RSU = LocalPoint(0.0, 0.0)
    VRU = LocalPoint(30.0, 0.0)

    def approaching(self, serial=1, d0=120.0, d1=100.0):
        return track(NodeId.obu(serial),
                     [(0, -d0, 0.0, 90.0, 10.0), (100, -d1, 0.0, 90.0, 10.0)])

    def test_approaching_vehicle_targeted(self):
        got = vru_alert_targets(self.RSU, self.VRU, [self.approaching()], TH)
        assert got == [NodeId.obu(1)]

    def test_receding_vehicle_ignored(self):
        ts = self.approaching(d0=100.0, d1=120.0)
        assert vru_alert_targets(self.RSU, self.VRU, [ts], TH) == []

    def test_radius_gate_strict(self):
        at_edge = self.approaching(d0=160.0, d1=150.0)
        assert vru_alert_targets(self.RSU, self.VRU, [at_edge], TH) == []
        just_in = self.approaching(d0=160.0, d1=149.9)
        assert vru_alert_targets(self.RSU, self.VRU, [just_in], TH) != []

    def test_single_sample_ignored(self):
        ts = track(NodeId.obu(1), [(0, -100.0, 0.0, 90.0, 10.0)])
        assert vru_alert_targets(self.RSU, self.VRU, [ts], TH) == []

    def test_stationary_ignored(self):
        ts = track(NodeId.obu(1),
                   [(0, -100.0, 0.0, 90.0, 0.0), (100, -100.0, 0.0, 90.0, 0.0)])
        assert vru_alert_targets(self.RSU, self.VRU, [ts], TH) == []


class TestAlertEvent:
    def test_blind_spot_requires_location(self):
        with pytest.raises(ValueError):
            AlertEvent(AlertKind.BLIND_SPOT_COLLISION, NodeId.obu(1),
                       NodeId.obu(2), None, 0, Severity.CRITICAL)
