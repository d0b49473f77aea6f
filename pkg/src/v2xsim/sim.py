"""Deterministic discrete-event engine.

The loop advances in fixed ticks (default 100 ms, matching the broadcast
cadence).  Each tick: due frame deliveries are handed to their receivers,
vehicle poses advance along their trajectories, every node runs its state
machine in ascending node-id order, and outbound frames pass through the
channel.  Position broadcasts, which dominate traffic, are batched into a
single kernel call per tick; everything else (alerts, beacons,
advisories) goes through the regular scheduling path.  One seeded PRNG
stream consumed in a fixed order makes the whole run reproducible: the
same scenario and seed serialize to byte-identical logs.
"""

import heapq
import json
import math
import time
from bisect import bisect_right
from dataclasses import dataclass, field

from ._kernels import impl as _k
from .alerts import ImuSample
from .channel import Channel
from .geo import GeoPoint, Heading, LocalPoint, Pose2D, project
from .nodes import Obu, Roster, Rsu
from .scenario import Scenario, VehicleSpec
from .wire import AlertKind, AlertPayload, AdvisoryPayload, NodeId

_DEG2RAD = math.pi / 180.0


class _Trajectory:
    """Projected waypoints with per-segment derived kinematics.

    Speed is chord length over duration; heading is the segment bearing;
    longitudinal acceleration and yaw rate are finite differences of
    consecutive segments, spread over the previous segment's duration;
    lateral acceleration is the centripetal v*omega.  Stationary segments
    inherit the previous heading.
    """

    def __init__(self, spec: VehicleSpec, origin: GeoPoint):
        self.spec = spec
        self.times = [t for t, _ in spec.waypoints]
        self.points = [project(origin, p) for _, p in spec.waypoints]
        self.t0 = self.times[0]
        self.t1 = self.times[-1]
        n = len(self.times) - 1
        self.speed = [0.0] * n
        self.heading = [0.0] * n
        self.accel_x = [0.0] * n
        self.yaw_rate = [0.0] * n
        self.accel_y = [0.0] * n
        prev_heading = 0.0
        for i in range(n):
            a = self.points[i]
            b = self.points[i + 1]
            dur_s = (self.times[i + 1] - self.times[i]) / 1000.0
            chord = _k.euclid(a.x, a.y, b.x, b.y)
            self.speed[i] = chord / dur_s
            if chord < 1e-9:
                self.heading[i] = prev_heading
            else:
                bearing = math.atan2(b.x - a.x, b.y - a.y) / _DEG2RAD
                self.heading[i] = bearing % 360.0
            if i > 0:
                prev_dur = (self.times[i] - self.times[i - 1]) / 1000.0
                self.accel_x[i] = (self.speed[i] - self.speed[i - 1]) / prev_dur
                turn = _k.wrap_deg_signed(self.heading[i] - self.heading[i - 1])
                self.yaw_rate[i] = -turn / prev_dur
            self.accel_y[i] = self.speed[i] * self.yaw_rate[i] * _DEG2RAD
            prev_heading = self.heading[i]
        self._ov_times = [t for t, _ in spec.imu_override]
        self._ov_samples = [s for _, s in spec.imu_override]

    def active(self, t_ms: int) -> bool:
        return self.t0 <= t_ms <= self.t1

    def pose_at(self, t_ms: int):
        """Pose and IMU tuple at t_ms; t must lie within the waypoint span."""
        if not self.active(t_ms):
            raise ValueError(f"t={t_ms} outside trajectory window "
                             f"[{self.t0}, {self.t1}]")
        i = bisect_right(self.times, t_ms) - 1
        if i >= len(self.speed):
            i = len(self.speed) - 1
        a = self.points[i]
        b = self.points[i + 1]
        dur = self.times[i + 1] - self.times[i]
        f = (t_ms - self.times[i]) / dur
        pos = LocalPoint(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f)
        pose = Pose2D(pos, Heading(self.heading[i]), self.speed[i])
        j = bisect_right(self._ov_times, t_ms) - 1
        if j >= 0:
            s = self._ov_samples[j]
            imu = (s.accel_x, s.accel_y, s.accel_z, s.yaw_rate)
        else:
            imu = (self.accel_x[i], self.accel_y[i], 0.0, self.yaw_rate[i])
        return pose, imu


def interpolate_pose(spec: VehicleSpec, t_ms: int, origin: GeoPoint):
    """Pose2D and ImuSample of a scripted vehicle at time t_ms."""
    pose, imu = _Trajectory(spec, origin).pose_at(t_ms)
    return pose, ImuSample(*imu)


@dataclass
class RunResult:
    """Everything a finished run produced."""

    scenario_name: str
    records: list | None
    feeds: dict
    counters: dict = field(default_factory=dict)
    region_view: object = None

    def events_ndjson(self) -> str:
        if self.records is None:
            raise ValueError("run was executed with collect_events=False")
        return "".join(
            json.dumps(r, separators=(",", ":")) + "\n" for r in self.records)


class _InlineBase:
    """Base-station adapter over an in-process RegionView."""

    def __init__(self, view):
        self.view = view

    def ingest_reports(self, reports, now_ms):
        for r in reports:
            self.view.ingest_report(r)

    def poll_advisories(self):
        return self.view.pending_advisories()

    def ack_advisory(self, advisory_id):
        self.view.mark_delivered(advisory_id)


class _RemoteBase:
    """Base-station adapter talking HTTP to a separately served instance."""

    def __init__(self, url, token=None):
        import requests

        self.url = url.rstrip("/")
        self.session = requests.Session()
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"

    def ingest_reports(self, reports, now_ms):
        if not reports:
            return
        body = "".join(json.dumps(r, separators=(",", ":")) + "\n"
                       for r in reports)
        self.session.post(f"{self.url}/ingest", data=body.encode(),
                          headers={"Content-Type": "application/x-ndjson"},
                          timeout=5)

    def poll_advisories(self):
        resp = self.session.get(f"{self.url}/advisories",
                                params={"status": "pending"}, timeout=5)
        resp.raise_for_status()
        return resp.json()["advisories"]

    def ack_advisory(self, advisory_id):
        self.session.post(f"{self.url}/advisories/{advisory_id}/ack", timeout=5)


def _frame_detail(frame):
    p = frame.payload
    d = {"msg": frame.header.msg_type.name, "seq": frame.header.seq}
    if isinstance(p, AlertPayload):
        d["kind"] = p.kind.name
        d["severity"] = p.severity.name
        if p.subject:
            d["subject"] = NodeId(p.subject).label()
    elif isinstance(p, AdvisoryPayload):
        d["kind"] = p.kind.name
        d["advisory_id"] = p.advisory_id
    return d


def run(scenario: Scenario, collect_events: bool = True, base=None,
        pace: float = 0.0, token: str | None = None,
        on_feed=None) -> RunResult:
    """Execute a scenario to completion.

    base may be a RegionView, a base-station URL, an object with the
    adapter interface (ingest_reports / poll_advisories / ack_advisory),
    or None to honor the scenario's base_station field.  pace > 0 slows
    the loop to wall clock (1.0 = real time); 0 runs flat out.
    collect_events=False skips the event log (alert feeds and counters
    are still produced), which is what the large seed-sweep benchmarks
    use.  on_feed(label, entry_dict), when given, fires as each alert
    feed entry lands on a vehicle, so paced runs can stream feed files
    while still running.
    """
    origin = scenario.origin
    roster = Roster([v.id for v in scenario.vehicles]
                    + [r.id for r in scenario.rsus])
    n = len(roster)
    th = scenario.thresholds

    region_view = None
    if base is None:
        if scenario.base_station == "inline":
            from .basestation import RegionView

            region_view = RegionView()
            base = _InlineBase(region_view)
        else:
            base = _RemoteBase(scenario.base_station, token)
    elif isinstance(base, str):
        base = _RemoteBase(base, token)
    elif not hasattr(base, "poll_advisories"):
        region_view = base
        base = _InlineBase(base)

    nodes = [None] * n
    trajs = [None] * n
    rsu_by_label = {}
    for v in scenario.vehicles:
        rank = roster.rank(v.id)
        nodes[rank] = Obu(v.id, roster, origin, th)
        trajs[rank] = _Trajectory(v, origin)
    for r in scenario.rsus:
        rank = roster.rank(r.id)
        rsu = Rsu(r.id, roster, origin, project(origin, r.position), th,
                  merge_angle_deg=r.merge_angle_deg,
                  radius=scenario.channel.r_reliable_los)
        nodes[rank] = rsu
        rsu_by_label[r.id.label()] = rsu

    channel = Channel(scenario.channel, scenario.obstructions)
    p = channel.params

    vru_queue = sorted(scenario.vru_events, key=lambda e: e.timestamp_ms)
    vru_idx = 0

    records = [] if collect_events else None
    sort_keys = [] if collect_events else None

    def log(t, kind, node_raw, seq, detail):
        records.append({"t": t, "kind": kind,
                        "node": NodeId(node_raw).label(),
                        "seq": seq, "detail": detail})
        sort_keys.append((t, node_raw, seq))

    counters = {"tx": 0, "rx": 0, "drop": 0, "alerts_raised": 0,
                "feed_entries": 0, "reports": 0, "decode_errors": 0}

    pending = []  # (deliver_at, receiver_rank, sender_raw, seq, n, frame, d)
    tie = 0
    xs = [0.0] * n
    ys = [0.0] * n
    active = [0] * n
    emit = [0] * n
    quants = [(0.0,) * 8] * n
    seqs = [0] * n
    zero_q = (0.0,) * 8

    for rank in range(n):
        node = nodes[rank]
        if isinstance(node, Rsu):
            xs[rank] = node.position.x
            ys[rank] = node.position.y

    wall_start = time.monotonic()

    def deliver(entry):
        deliver_at, r_rank, s_raw, seq, _t, frame, dist = entry
        node = nodes[r_rank]
        entries = node.deliver(frame, deliver_at)
        if collect_events:
            log(deliver_at, "RX", roster.ids[r_rank].raw, seq,
                {**_frame_detail(frame), "from": NodeId(s_raw).label(),
                 "d": round(dist, 3)})
        counters["rx"] += 1
        counters["feed_entries"] += len(entries)
        if on_feed is not None and entries:
            label = roster.ids[r_rank].label()
            for e in entries:
                on_feed(label, e.to_json_dict())
        if collect_events:
            for e in entries:
                detail = {"kind": e.kind.name, "severity": e.severity.name,
                          "from": e.emitter.label()}
                if e.subject is not None:
                    detail["subject"] = e.subject.label()
                if e.advisory_id is not None:
                    detail["advisory_id"] = e.advisory_id
                log(deliver_at, "ALERT_RECEIVED", roster.ids[r_rank].raw,
                    seq, detail)

    for now in range(0, scenario.duration_ms, scenario.tick_ms):
        while pending and pending[0][0] <= now:
            deliver(heapq.heappop(pending))

        if pace > 0:
            target = wall_start + (now / 1000.0) / pace
            delay = target - time.monotonic()
            if delay > 0:
                time.sleep(delay)

        while vru_idx < len(vru_queue) and vru_queue[vru_idx].timestamp_ms <= now:
            ev = vru_queue[vru_idx]
            vru_idx += 1
            lp = project(origin, ev.position)
            best = None
            for r in scenario.rsus:
                rsu = rsu_by_label[r.id.label()]
                d = _k.euclid(lp.x, lp.y, rsu.position.x, rsu.position.y)
                if best is None or d < best[0]:
                    best = (d, rsu)
            if best is None:
                continue
            best[1].post_vru(ev.position, ev.vru_class, now)
            if collect_events:
                log(now, "VRU_EVENT", best[1].id.raw, 0,
                    {"class": ev.vru_class.name,
                     "lat": round(ev.position.lat, 7),
                     "lon": round(ev.position.lon, 7)})

        if base is not None:
            for adv in base.poll_advisories():
                rsu = rsu_by_label.get(adv["rsu"])
                if rsu is None:
                    continue
                loc = None
                if adv.get("lat") is not None and adv.get("lon") is not None:
                    loc = GeoPoint(adv["lat"], adv["lon"])
                kind = adv["kind"]
                if isinstance(kind, str):
                    kind = AlertKind[kind]
                rsu.post_advisory(adv["id"], kind, adv["ttl_ms"], loc, now)
                base.ack_advisory(adv["id"])
                if collect_events:
                    log(now, "ADVISORY", rsu.id.raw, 0,
                        {"advisory_id": adv["id"], "kind": kind.name,
                         "ttl_ms": adv["ttl_ms"]})

        other_frames = []
        all_reports = []
        for rank in range(n):
            node = nodes[rank]
            if isinstance(node, Obu):
                traj = trajs[rank]
                if traj.active(now):
                    pose, imu = traj.pose_at(now)
                    node.set_state(pose, imu, now)
                    active[rank] = 1
                    xs[rank] = pose.pos.x
                    ys[rank] = pose.pos.y
                else:
                    active[rank] = 0
                    node.pose = None
                    emit[rank] = 0
                    continue
                emitted, frames, raised = node.tick(now)
                emit[rank] = 1 if emitted else 0
                if emitted:
                    quants[rank] = node.last_quant
                    seqs[rank] = node.bsm_seq
                else:
                    quants[rank] = zero_q
            else:
                active[rank] = 1
                emit[rank] = 0
                frames, reports, raised = node.tick(now)
                all_reports.extend(reports)
            for e in raised:
                counters["alerts_raised"] += 1
                if collect_events:
                    detail = {"kind": e.kind.name, "severity": e.severity.name}
                    if e.subject is not None:
                        detail["subject"] = e.subject.label()
                    if e.location is not None:
                        detail["location"] = {"x": round(e.location.x, 3),
                                              "y": round(e.location.y, 3)}
                    log(now, "ALERT_RAISED", e.emitter.raw, 0, detail)
            for frame in frames:
                other_frames.append((rank, frame))

        want = 1 if collect_events else 0
        channel._rng_state, outcomes, n_rx, n_drop = _k.bsm_exchange(
            [nd.store for nd in nodes], xs, ys, active, emit, quants, seqs,
            now, channel._segs, p.r_reliable_los, p.r_reliable_nlos,
            p.falloff, p.base_loss, p.latency_ms, p.jitter_ms,
            channel._rng_state, want)
        n_emit = sum(emit)
        counters["tx"] += n_emit
        counters["rx"] += n_rx
        counters["drop"] += n_drop
        if collect_events and outcomes is not None:
            for i in range(n):
                if not emit[i]:
                    continue
                log(now, "TX", roster.ids[i].raw, seqs[i],
                    {"msg": "BSM", "seq": seqs[i]})
                row = i * n
                for j in range(n):
                    v = outcomes[row + j]
                    if v == -1:
                        continue
                    d = _k.euclid(xs[i], ys[i], xs[j], ys[j])
                    if v == -2:
                        log(now, "DROP", roster.ids[j].raw, seqs[i],
                            {"msg": "BSM", "from": roster.ids[i].label(),
                             "d": round(d, 3)})
                    else:
                        log(now + v, "RX", roster.ids[j].raw, seqs[i],
                            {"msg": "BSM", "from": roster.ids[i].label(),
                             "d": round(d, 3)})
        for rank, frame in other_frames:
            counters["tx"] += 1
            if collect_events:
                log(now, "TX", roster.ids[rank].raw, frame.header.seq,
                    _frame_detail(frame))
            was = active[rank]
            active[rank] = 0
            out = channel.sweep(xs[rank], ys[rank], xs, ys, active, now)
            active[rank] = was
            for j in range(n):
                v = out[j]
                if v == -1:
                    continue
                d = _k.euclid(xs[rank], ys[rank], xs[j], ys[j])
                if v == -2:
                    counters["drop"] += 1
                    if collect_events:
                        log(now, "DROP", roster.ids[j].raw, frame.header.seq,
                            {**_frame_detail(frame),
                             "from": roster.ids[rank].label(),
                             "d": round(d, 3)})
                else:
                    tie += 1
                    heapq.heappush(pending, (v, j, roster.ids[rank].raw,
                                             frame.header.seq, tie, frame, d))

        if all_reports:
            counters["reports"] += len(all_reports)
            if collect_events:
                for r in all_reports:
                    log(now, "BASE_REPORT", NodeId.parse(r["rsu"]).raw, 0,
                        dict(r))
            if base is not None:
                base.ingest_reports(all_reports, now)

    while pending and pending[0][0] <= scenario.duration_ms:
        deliver(heapq.heappop(pending))

    for node in nodes:
        counters["decode_errors"] += node.decode_errors

    feeds = {}
    for rank in range(n):
        node = nodes[rank]
        if isinstance(node, Obu):
            feeds[node.id.label()] = [e.to_json_dict() for e in node.alert_feed]

    if collect_events:
        order = sorted(range(len(records)), key=lambda i: sort_keys[i])
        records = [records[i] for i in order]

    return RunResult(scenario_name=scenario.name, records=records,
                     feeds=feeds, counters=counters, region_view=region_view)
