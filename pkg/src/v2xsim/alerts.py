"""Pure detection rules over per-vehicle track history.

Five situations are recognized: hard braking, erratic driving, converging
blind-spot pairs at a known merge angle, slow traffic ahead of an
emergency vehicle, and vehicles approaching a roadside unit that has a
vulnerable road user in view.  Every detector is a pure function of its
inputs so each rule can be tested without any networking in the loop.
"""

import math
from dataclasses import dataclass, field

from ._kernels import impl as _k
from .geo import (
    BearingClass,
    CoincidentError,
    LocalPoint,
    Pose2D,
    collision_point,
    distance,
    relative_bearing_class,
)
from .wire import AlertKind, NodeId, Severity

HISTORY_CAP = 32
BRAKE_WINDOW = 7  # packets; the rule is defined over exactly seven


@dataclass(frozen=True)
class ImuSample:
    """Inertial readings in the vehicle frame (x forward, y left)."""

    accel_x: float = 0.0  # m/s^2
    accel_y: float = 0.0  # m/s^2
    accel_z: float = 0.0  # m/s^2
    yaw_rate: float = 0.0  # deg/s, positive counterclockwise

    def __post_init__(self):
        for name in ("accel_x", "accel_y", "accel_z"):
            v = getattr(self, name)
            if not math.isfinite(v) or abs(v) >= 200.0:
                raise ValueError(f"{name} must be finite and |.| < 200")
        if not math.isfinite(self.yaw_rate) or abs(self.yaw_rate) >= 1000.0:
            raise ValueError("yaw_rate must be finite and |.| < 1000")


@dataclass
class TrackState:
    """History of one vehicle as seen by some observer.

    Samples are (timestamp_ms, Pose2D, ImuSample) with strictly
    increasing timestamps; only the most recent HISTORY_CAP are kept.
    """

    id: NodeId
    history: list = field(default_factory=list)
    last_seq: int = 0

    def add(self, timestamp_ms: int, pose: Pose2D, imu: ImuSample) -> None:
        if self.history and timestamp_ms <= self.history[-1][0]:
            raise ValueError("timestamps must be strictly increasing")
        self.history.append((timestamp_ms, pose, imu))
        if len(self.history) > HISTORY_CAP:
            del self.history[0]

    def __len__(self):
        return len(self.history)

    @property
    def latest(self):
        """Most recent (timestamp_ms, Pose2D, ImuSample), or None."""
        return self.history[-1] if self.history else None


@dataclass(frozen=True)
class Thresholds:
    """Tunable limits for the detectors.

    brake_window is fixed at seven packets by the rule itself; everything
    else may be overridden per scenario.
    """

    brake_drop_per_packet: float = 0.8   # m/s lost between two packets
    brake_window: int = BRAKE_WINDOW
    abnormal_yaw: float = 30.0           # deg/s
    abnormal_speed: float = 8.0          # m/s
    abnormal_lateral_accel: float = 4.0  # m/s^2
    abnormal_persist: int = 3            # consecutive samples
    giveway_distance: float = 30.0       # m
    blindspot_distance: float = 50.0     # m
    blindspot_decrease_samples: int = 3
    merge_angle_tolerance: float = 10.0  # deg
    vru_radius: float = 150.0            # m

    def __post_init__(self):
        for name in ("brake_drop_per_packet", "abnormal_yaw", "abnormal_speed",
                     "abnormal_lateral_accel", "giveway_distance",
                     "blindspot_distance", "merge_angle_tolerance",
                     "vru_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("abnormal_persist", "blindspot_decrease_samples"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) <= 0:
                raise ValueError(f"{name} must be a positive integer")
        if self.brake_window != BRAKE_WINDOW:
            raise ValueError("brake_window is fixed at 7")


@dataclass(frozen=True)
class AlertEvent:
    """One detected situation, ready to be framed and broadcast.

    subject is the vehicle the alert concerns; emitter is the node whose
    data produced it.  Blind-spot events always carry the predicted
    crossing point in location.
    """

    kind: AlertKind
    emitter: NodeId
    subject: NodeId | None
    location: LocalPoint | None
    timestamp_ms: int
    severity: Severity

    def __post_init__(self):
        if self.kind == AlertKind.BLIND_SPOT_COLLISION and self.location is None:
            raise ValueError("blind-spot events must carry a location")


def detect_emergency_brake(track: TrackState, th: Thresholds) -> AlertEvent | None:
    """Hard-brake check over the last seven speed samples.

    The six consecutive speed drops are computed; an alert fires iff the
    largest single drop is strictly greater than brake_drop_per_packet.
    Partial windows never fire.
    """
    if len(track.history) < th.brake_window:
        return None
    window = track.history[-th.brake_window:]
    speeds = [pose.speed for _, pose, _ in window]
    worst = max(speeds[i] - speeds[i + 1] for i in range(len(speeds) - 1))
    if worst > th.brake_drop_per_packet:
        t, pose, _ = window[-1]
        return AlertEvent(AlertKind.EMERGENCY_BRAKE, track.id, track.id,
                          pose.pos, t, Severity.CRITICAL)
    return None


def detect_abnormal(track: TrackState, th: Thresholds) -> AlertEvent | None:
    """Erratic-driving check.

    Fires iff every one of the abnormal_persist most recent samples shows
    either a sharp turn at speed (|yaw_rate| > abnormal_yaw and speed >
    abnormal_speed) or excessive lateral acceleration.
    """
    n = th.abnormal_persist
    if len(track.history) < n:
        return None
    for t, pose, imu in track.history[-n:]:
        sharp_turn = abs(imu.yaw_rate) > th.abnormal_yaw and pose.speed > th.abnormal_speed
        if not (sharp_turn or abs(imu.accel_y) > th.abnormal_lateral_accel):
            return None
    t, pose, _ = track.history[-1]
    return AlertEvent(AlertKind.ABNORMAL_VEHICLE, track.id, track.id,
                      pose.pos, t, Severity.WARN)


def detect_blind_spot(ev: TrackState, other: TrackState, merge_angle_deg: float,
                      th: Thresholds) -> AlertEvent | None:
    """Converging-pair check against a known merging-road angle.

    Projects both latest headings forward as lines and takes their
    crossing point P.  Fires iff the distance from each vehicle to P was
    strictly decreasing over the last blindspot_decrease_samples + 1
    samples, the circular difference of the two headings matches
    merge_angle_deg within merge_angle_tolerance, and the closer vehicle
    is strictly inside blindspot_distance of P.

    The returned event concerns the first argument (subject = ev.id);
    swap the arguments for the mirror event.  Degenerate geometry yields
    None, never an exception.
    """
    k = th.blindspot_decrease_samples
    if len(ev.history) < k + 1 or len(other.history) < k + 1:
        return None
    _, pose1, _ = ev.history[-1]
    _, pose2, _ = other.history[-1]
    p = collision_point(pose1.pos, pose1.heading,
                        pose2.pos, pose2.heading)
    if p is None:
        return None
    diff = _k.circular_diff_deg(pose1.heading.compass_deg, pose2.heading.compass_deg)
    if abs(diff - merge_angle_deg) > th.merge_angle_tolerance:
        return None
    for track in (ev, other):
        dists = [distance(pose.pos, p)
                 for _, pose, _ in track.history[-(k + 1):]]
        if any(dists[i] <= dists[i + 1] for i in range(len(dists) - 1)):
            return None
    d_latest = min(distance(pose1.pos, p), distance(pose2.pos, p))
    if d_latest >= th.blindspot_distance:
        return None
    t = max(ev.history[-1][0], other.history[-1][0])
    return AlertEvent(AlertKind.BLIND_SPOT_COLLISION, other.id, ev.id,
                      p, t, Severity.CRITICAL)


def detect_give_way(ev: TrackState, neighbors, th: Thresholds) -> list:
    """Give-way alerts for slow traffic ahead of an emergency vehicle.

    For each neighbor classified as being in front of the emergency
    vehicle and strictly closer than giveway_distance, emits one
    EV_GIVE_WAY with that neighbor as subject.  Severity escalates to
    critical when the closing speed (ev speed minus neighbor speed)
    exceeds 5 m/s.  Raises ValueError when ev is not emergency-flagged.
    """
    if not ev.id.emergency:
        raise ValueError("give-way detection requires an emergency vehicle")
    if not ev.history:
        return []
    t, pose, _ = ev.history[-1]
    out = []
    for nb in neighbors:
        if nb.id == ev.id or not nb.history:
            continue
        _, npose, _ = nb.history[-1]
        d = distance(pose.pos, npose.pos)
        if d >= th.giveway_distance:
            continue
        try:
            side = relative_bearing_class(pose, npose.pos)
        except CoincidentError:
            continue
        if side != BearingClass.FRONT:
            continue
        closing = pose.speed - npose.speed
        sev = Severity.CRITICAL if closing > 5.0 else Severity.WARN
        out.append(AlertEvent(AlertKind.EV_GIVE_WAY, ev.id, nb.id,
                              npose.pos, t, sev))
    return out


def vru_alert_targets(rsu_position: LocalPoint, vru_location: LocalPoint,
                      tracks, th: Thresholds) -> list:
    """Vehicles that should be warned about a pedestrian or animal.

    Returns the id of every track whose latest position is strictly
    inside vru_radius of the roadside unit and whose distance to it
    decreased over the last two samples.  vru_location is the sighting
    itself; callers attach it to the alerts they build from this list.
    """
    del vru_location  # targeting keys off the roadside unit's coverage
    out = []
    for track in tracks:
        if len(track.history) < 2:
            continue
        _, pose_now, _ = track.history[-1]
        _, pose_prev, _ = track.history[-2]
        d_now = distance(pose_now.pos, rsu_position)
        if d_now >= th.vru_radius:
            continue
        if d_now < distance(pose_prev.pos, rsu_position):
            out.append(track.id)
    return out
