"""Scenario documents: the JSON input that describes a deployment.

Validation walks the whole document and reports every violation with a
path into it, so a bad file is fixed in one round trip rather than one
error at a time.  Unknown keys are rejected; they are almost always
typos.
"""

import json
import math
from dataclasses import dataclass, field

from ._kernels import impl as _k
from .alerts import ImuSample, Thresholds
from .channel import ChannelParams, Obstruction, DEFAULT_SEED
from .geo import GeoPoint, LocalPoint, project
from .wire import NodeId, VruClass

# wire speed field is u16 centiunits; trajectories must stay below it
MAX_SEGMENT_SPEED_MPS = 650.0

_VRU_CLASSES = {c.name.lower(): c for c in VruClass}


class ScenarioError(ValueError):
    """Raised with every violation found, not just the first."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("\n".join(self.violations))


@dataclass(frozen=True)
class RsuSpec:
    id: NodeId
    position: GeoPoint
    merge_angle_deg: float | None = None


@dataclass(frozen=True)
class VehicleSpec:
    id: NodeId
    emergency: bool
    waypoints: tuple  # of (timestamp_ms, GeoPoint)
    imu_override: tuple = ()  # of (timestamp_ms, ImuSample)


@dataclass(frozen=True)
class VruEvent:
    timestamp_ms: int
    position: GeoPoint
    vru_class: VruClass


@dataclass(frozen=True)
class Scenario:
    name: str
    origin: GeoPoint
    duration_ms: int
    seed: int
    channel: ChannelParams
    thresholds: Thresholds
    rsus: tuple = ()
    vehicles: tuple = ()
    obstructions: tuple = ()
    vru_events: tuple = ()
    tick_ms: int = 100
    base_station: str = "inline"

    @staticmethod
    def from_dict(doc, name="scenario"):
        return _parse(doc, name)

    @staticmethod
    def from_file(path):
        with open(path, "r", encoding="utf-8") as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ScenarioError([f"$: not valid JSON: {e}"]) from None
        import os
        default_name = os.path.splitext(os.path.basename(path))[0]
        if default_name.endswith(".scenario"):
            default_name = default_name[: -len(".scenario")]
        return _parse(doc, default_name)


class _Walk:
    """Collects violations while pulling typed fields out of the doc."""

    def __init__(self):
        self.violations = []

    def fail(self, path, msg):
        self.violations.append(f"{path}: {msg}")

    def obj(self, v, path, keys):
        if not isinstance(v, dict):
            self.fail(path, f"expected an object, got {type(v).__name__}")
            return None
        for k in v:
            if k not in keys:
                self.fail(f"{path}.{k}", "unknown key")
        return v

    def num(self, d, path, key, default=None, lo=None, hi=None, integer=False):
        if key not in d:
            if default is None:
                self.fail(f"{path}.{key}", "required")
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{path}.{key}", "must be a number")
            return default
        if integer and not isinstance(v, int):
            self.fail(f"{path}.{key}", "must be an integer")
            return default
        if not math.isfinite(v):
            self.fail(f"{path}.{key}", "must be finite")
            return default
        if lo is not None and v < lo:
            self.fail(f"{path}.{key}", f"must be >= {lo}, got {v}")
            return default
        if hi is not None and v > hi:
            self.fail(f"{path}.{key}", f"must be <= {hi}, got {v}")
            return default
        return v

    def geo(self, d, path):
        lat = self.num(d, path, "lat", lo=-90.0, hi=90.0)
        lon = self.num(d, path, "lon", lo=-180.0, hi=180.0)
        if lat is None or lon is None:
            return None
        return GeoPoint(float(lat), float(lon))

    def node_id(self, d, path, key, expect_rsu=None):
        v = d.get(key)
        if not isinstance(v, str):
            self.fail(f"{path}.{key}", "required node id string like 'obu:1'")
            return None
        try:
            nid = NodeId.parse(v)
        except ValueError as e:
            self.fail(f"{path}.{key}", str(e))
            return None
        if expect_rsu is True and not nid.is_rsu:
            self.fail(f"{path}.{key}", f"expected an rsu id, got {v}")
            return None
        if expect_rsu is False and nid.is_rsu:
            self.fail(f"{path}.{key}", f"expected a vehicle id, got {v}")
            return None
        return nid


def _parse(doc, name):
    w = _Walk()
    top_keys = {"name", "origin", "duration_ms", "tick_ms", "seed", "channel",
                "obstructions", "thresholds", "rsus", "vehicles", "vru_events",
                "base_station"}
    doc = w.obj(doc, "$", top_keys)
    if doc is None:
        raise ScenarioError(w.violations)

    if "name" in doc:
        if isinstance(doc["name"], str) and doc["name"]:
            name = doc["name"]
        else:
            w.fail("$.name", "must be a non-empty string")

    origin = None
    if "origin" in doc:
        od = w.obj(doc["origin"], "$.origin", {"lat", "lon"})
        if od is not None:
            origin = w.geo(od, "$.origin")
            if origin is not None and not -85.0 < origin.lat < 85.0:
                w.fail("$.origin.lat", "origin must be away from the poles")
                origin = None
    else:
        w.fail("$.origin", "required")

    duration = w.num(doc, "$", "duration_ms", lo=1, integer=True)
    tick = w.num(doc, "$", "tick_ms", default=100, lo=1, integer=True)
    seed = w.num(doc, "$", "seed", default=DEFAULT_SEED, lo=0,
                 hi=(1 << 64) - 1, integer=True)

    channel = _parse_channel(w, doc.get("channel"), seed)
    thresholds = _parse_thresholds(w, doc.get("thresholds"))
    obstructions = _parse_obstructions(w, doc.get("obstructions"))

    rsus = []
    seen_ids = {}
    for i, item in enumerate(doc.get("rsus", []) or []):
        path = f"$.rsus[{i}]"
        d = w.obj(item, path, {"id", "lat", "lon", "merge_angle_deg"})
        if d is None:
            continue
        nid = w.node_id(d, path, "id", expect_rsu=True)
        pos = w.geo(d, path)
        merge = w.num(d, path, "merge_angle_deg", default=-1.0, lo=0.0, hi=180.0)
        if nid is not None:
            if nid.raw in seen_ids:
                w.fail(f"{path}.id", f"duplicate node id {nid.label()}")
            seen_ids[nid.raw] = path
        if nid is None or pos is None:
            continue
        _check_projectable(w, origin, pos, path)
        rsus.append(RsuSpec(nid, pos, None if merge == -1.0 else float(merge)))

    vehicles = []
    for i, item in enumerate(doc.get("vehicles", []) or []):
        path = f"$.vehicles[{i}]"
        spec = _parse_vehicle(w, item, path, origin, duration, seen_ids)
        if spec is not None:
            vehicles.append(spec)

    vrus = []
    for i, item in enumerate(doc.get("vru_events", []) or []):
        path = f"$.vru_events[{i}]"
        d = w.obj(item, path, {"timestamp_ms", "lat", "lon", "class"})
        if d is None:
            continue
        t = w.num(d, path, "timestamp_ms", lo=0, integer=True)
        pos = w.geo(d, path)
        cls = d.get("class")
        if cls not in _VRU_CLASSES:
            w.fail(f"{path}.class",
                   f"must be one of {sorted(_VRU_CLASSES)}, got {cls!r}")
            continue
        if t is None or pos is None:
            continue
        if duration is not None and t >= duration:
            w.fail(f"{path}.timestamp_ms", "must fall within duration_ms")
            continue
        _check_projectable(w, origin, pos, path)
        vrus.append(VruEvent(t, pos, _VRU_CLASSES[cls]))

    base = doc.get("base_station", "inline")
    if not (base == "inline" or (isinstance(base, str)
                                 and base.startswith(("http://", "https://")))):
        w.fail("$.base_station", "must be 'inline' or an http(s) URL")
        base = "inline"

    if w.violations:
        raise ScenarioError(w.violations)
    return Scenario(
        name=name, origin=origin, duration_ms=duration, seed=seed,
        channel=channel, thresholds=thresholds, rsus=tuple(rsus),
        vehicles=tuple(vehicles), obstructions=tuple(obstructions),
        vru_events=tuple(vrus), tick_ms=tick, base_station=base,
    )


def _check_projectable(w, origin, pos, path):
    if origin is None or pos is None:
        return None
    try:
        return project(origin, pos)
    except ValueError as e:
        w.fail(path, str(e))
        return None


def _parse_channel(w, d, seed):
    fields = {"r_reliable_los", "r_reliable_nlos", "falloff", "base_loss",
              "latency_ms", "jitter_ms"}
    kwargs = {}
    if d is not None:
        d = w.obj(d, "$.channel", fields)
        if d:
            for k in fields & set(d):
                v = w.num(d, "$.channel", k)
                if v is not None:
                    kwargs[k] = float(v)
    try:
        return ChannelParams(seed=int(seed or DEFAULT_SEED), **kwargs)
    except ValueError as e:
        w.fail("$.channel", str(e))
        return ChannelParams()


def _parse_thresholds(w, d):
    int_fields = {"abnormal_persist", "blindspot_decrease_samples", "brake_window"}
    float_fields = {"brake_drop_per_packet", "abnormal_yaw", "abnormal_speed",
                    "abnormal_lateral_accel", "giveway_distance",
                    "blindspot_distance", "merge_angle_tolerance", "vru_radius"}
    kwargs = {}
    if d is not None:
        d = w.obj(d, "$.thresholds", int_fields | float_fields)
        if d:
            for k in set(d):
                v = w.num(d, "$.thresholds", k, integer=k in int_fields)
                if v is not None:
                    kwargs[k] = v if k in int_fields else float(v)
    try:
        return Thresholds(**kwargs)
    except ValueError as e:
        w.fail("$.thresholds", str(e))
        return Thresholds()


def _parse_obstructions(w, items):
    out = []
    for i, item in enumerate(items or []):
        path = f"$.obstructions[{i}]"
        d = w.obj(item, path, {"a", "b"})
        if d is None:
            continue
        pts = []
        for end in ("a", "b"):
            e = w.obj(d.get(end), f"{path}.{end}", {"x", "y"})
            if e is None:
                pts = None
                break
            x = w.num(e, f"{path}.{end}", "x")
            y = w.num(e, f"{path}.{end}", "y")
            if x is None or y is None:
                pts = None
                break
            pts.append(LocalPoint(float(x), float(y)))
        if pts is None:
            continue
        try:
            out.append(Obstruction(pts[0], pts[1]))
        except ValueError as e:
            w.fail(path, str(e))
    return out


def _parse_vehicle(w, item, path, origin, duration, seen_ids):
    d = w.obj(item, path, {"id", "emergency", "waypoints", "imu_override"})
    if d is None:
        return None
    nid = w.node_id(d, path, "id", expect_rsu=False)
    if nid is not None:
        if nid.raw in seen_ids:
            w.fail(f"{path}.id", f"duplicate node id {nid.label()}")
            nid = None
        else:
            seen_ids[nid.raw] = path
    emergency = d.get("emergency", nid.emergency if nid else False)
    if not isinstance(emergency, bool):
        w.fail(f"{path}.emergency", "must be a boolean")
        emergency = False
    elif nid is not None and emergency != nid.emergency:
        w.fail(f"{path}.emergency",
               "conflicts with the id prefix ('ev:' ids are emergency)")

    wps = d.get("waypoints")
    waypoints = []
    if not isinstance(wps, list) or len(wps) < 2:
        w.fail(f"{path}.waypoints", "at least 2 waypoints required")
    else:
        last_t = None
        prev = None
        for j, wp in enumerate(wps):
            wpath = f"{path}.waypoints[{j}]"
            wd = w.obj(wp, wpath, {"timestamp_ms", "lat", "lon"})
            if wd is None:
                continue
            t = w.num(wd, wpath, "timestamp_ms", lo=0, integer=True)
            pos = w.geo(wd, wpath)
            if t is None or pos is None:
                continue
            if duration is not None and t > duration:
                w.fail(f"{wpath}.timestamp_ms", "must fall within duration_ms")
            if last_t is not None and t <= last_t:
                w.fail(f"{wpath}.timestamp_ms",
                       "waypoint times must be strictly increasing")
            lp = _check_projectable(w, origin, pos, wpath)
            if lp is not None and prev is not None and last_t is not None:
                dt = (t - last_t) / 1000.0
                if dt > 0:
                    speed = _k.euclid(prev.x, prev.y, lp.x, lp.y) / dt
                    if speed > MAX_SEGMENT_SPEED_MPS:
                        w.fail(wpath, f"segment speed {speed:.1f} m/s exceeds "
                               f"{MAX_SEGMENT_SPEED_MPS}")
            waypoints.append((t, pos))
            last_t, prev = t, lp

    imu = []
    overrides = d.get("imu_override", [])
    if not isinstance(overrides, list):
        w.fail(f"{path}.imu_override", "must be a list")
        overrides = []
    last_t = None
    for j, ov in enumerate(overrides):
        opath = f"{path}.imu_override[{j}]"
        od = w.obj(ov, opath, {"timestamp_ms", "accel_x", "accel_y",
                               "accel_z", "yaw_rate"})
        if od is None:
            continue
        t = w.num(od, opath, "timestamp_ms", lo=0, integer=True)
        vals = {}
        for k in ("accel_x", "accel_y", "accel_z", "yaw_rate"):
            hi = 999.0 if k == "yaw_rate" else 199.0
            v = w.num(od, opath, k, default=0.0, lo=-hi, hi=hi)
            vals[k] = float(v if v is not None else 0.0)
        if t is None:
            continue
        if last_t is not None and t <= last_t:
            w.fail(f"{opath}.timestamp_ms",
                   "override times must be strictly increasing")
        last_t = t
        imu.append((t, ImuSample(**vals)))

    if nid is None:
        return None
    return VehicleSpec(nid, emergency, tuple(waypoints), tuple(imu))
