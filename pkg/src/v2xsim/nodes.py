"""On-board and roadside unit state machines.

These classes layer protocol behavior over the pure detectors: periodic
position broadcasts, neighbor tables with sequence screening and stale
pruning, alert emission with per-(kind, subject) cooldowns, roadside
beaconing, operator advisories, and the report stream to the base
station.  A node never re-broadcasts a frame verbatim; anything it relays
is re-authored under its own sender id and sequence number.

Each node keeps its neighbor history in a fixed-slot kernel TrackStore
indexed by the sender's rank in the shared roster, which is what lets the
simulator batch the per-tick broadcast exchange into one kernel call.
"""

from dataclasses import dataclass

from ._kernels import impl as _k
from .alerts import AlertEvent, Thresholds
from .geo import GeoPoint, LocalPoint, Pose2D, project, unproject
from .wire import (
    AlertKind,
    AlertPayload,
    AdvisoryPayload,
    DecodeError,
    Frame,
    FrameHeader,
    MsgType,
    NodeId,
    RsuBeaconPayload,
    Severity,
    decode,
)

BSM_PERIOD_MS = 100        # broadcast cadence, fixed by the message standard
ALERT_COOLDOWN_MS = 2000   # min gap between identical (kind, subject) alerts
BEACON_PERIOD_MS = 1000
REPORT_PERIOD_MS = 500
STALE_TTL_MS = 1000        # ten missed broadcasts and a track is dropped
MERGE_ANGLE_TTL_MS = 3000  # beacon-learned intersection geometry validity
FEED_DEDUP_MS = 2000       # receiver-side suppression of repeated alerts


class Roster:
    """Shared index of every node in a deployment, in ascending id order.

    A sender's rank in this ordering is its slot index in every node's
    TrackStore, and the order in which delivery draws are consumed.
    """

    def __init__(self, ids):
        ids = sorted(ids, key=lambda n: n.raw)
        if len(set(n.raw for n in ids)) != len(ids):
            raise ValueError("duplicate node ids in roster")
        self.ids = tuple(ids)
        self.rank_of = {n.raw: i for i, n in enumerate(ids)}
        self.emergency_ranks = frozenset(
            i for i, n in enumerate(ids) if n.emergency)

    def __len__(self):
        return len(self.ids)

    def rank(self, node_id: NodeId) -> int:
        return self.rank_of[node_id.raw]


@dataclass
class FeedEntry:
    """One line of a vehicle's alert feed (the in-car display stand-in)."""

    t: int
    kind: AlertKind
    severity: Severity
    emitter: NodeId
    subject: NodeId | None
    location: LocalPoint | None
    advisory_id: int | None = None

    def to_json_dict(self):
        d = {
            "t": self.t,
            "kind": self.kind.name,
            "severity": self.severity.name,
            "from": self.emitter.label(),
            "subject": self.subject.label() if self.subject else None,
        }
        if self.location is not None:
            d["location"] = {"x": round(self.location.x, 3),
                             "y": round(self.location.y, 3)}
        if self.advisory_id is not None:
            d["advisory_id"] = self.advisory_id
        return d


class _Node:
    """State shared by OBUs and RSUs: sequencing, track table, cooldowns."""

    def __init__(self, node_id: NodeId, roster: Roster, origin: GeoPoint,
                 thresholds: Thresholds | None = None):
        self.id = node_id
        self.roster = roster
        self.rank = roster.rank(node_id)
        self.origin = origin
        self.th = thresholds or Thresholds()
        self.store = _k.TrackStore(len(roster))
        self.tx_seq = 0
        self._rx_seq = {}
        self._cooldowns = {}
        self.decode_errors = 0
        self._now = 0

    def alloc_seq(self) -> int:
        s = self.tx_seq
        self.tx_seq = (self.tx_seq + 1) & 0xFFFF
        return s

    def _accept_seq(self, sender_raw: int, seq: int) -> bool:
        last = self._rx_seq.get(sender_raw)
        if last is not None:
            delta = (seq - last) & 0xFFFF
            if delta == 0 or delta > 0x7FFF:
                return False
        self._rx_seq[sender_raw] = seq
        return True

    def _under_cooldown(self, kind: AlertKind, subject_raw: int, now: int) -> bool:
        key = (kind, subject_raw)
        expires = self._cooldowns.get(key)
        if expires is not None and now < expires:
            return True
        self._cooldowns[key] = now + ALERT_COOLDOWN_MS
        return False

    def _prune_cooldowns(self, now: int) -> None:
        dead = [k for k, exp in self._cooldowns.items() if exp <= now]
        for k in dead:
            del self._cooldowns[k]

    def _frame(self, payload) -> Frame:
        return Frame(FrameHeader(payload.msg_type, self.id, self.alloc_seq(),
                                 self._now), payload)

    def _alert_frame(self, event: AlertEvent) -> Frame:
        aux_lat = aux_lon = 0
        if event.location is not None:
            gp = unproject(self.origin, event.location)
            aux_lat = round(gp.lat * 1e7)
            aux_lon = round(gp.lon * 1e7)
        return self._frame(AlertPayload(
            kind=event.kind,
            subject=event.subject.raw if event.subject else 0,
            aux_lat=aux_lat,
            aux_lon=aux_lon,
            severity=event.severity,
        ))

    def _ingest_bsm(self, frame: Frame) -> None:
        p = frame.payload
        x, y = _k.project_local(self.origin.lat, self.origin.lon,
                                p.lat * 1e-7, p.lon * 1e-7)
        self.store.ingest(self.roster.rank_of[frame.header.sender.raw],
                          frame.header.timestamp_ms, x, y,
                          p.heading * 0.01, p.speed * 0.01,
                          p.accel_x * 0.01, p.accel_y * 0.01,
                          p.accel_z * 0.01, p.yaw_rate * 0.01,
                          frame.header.seq)

    def _event_from_hit(self, kind, slot, now, severity) -> AlertEvent:
        s = self.store.latest(slot)
        subject = self.roster.ids[slot]
        return AlertEvent(kind, self.id, subject, LocalPoint(s[1], s[2]),
                          now, severity)


class Obu(_Node):
    """One vehicle's radio and alert logic.

    tick() decides whether a position broadcast is due (the emit_bsm
    flag; the payload itself is assembled by the transport layer so the
    hot path can batch it), runs every detector over the neighbor table,
    and returns any resulting alert frames.  deliver() screens inbound
    frames and turns the relevant ones into alert-feed entries.
    """

    def __init__(self, node_id, roster, origin, thresholds=None):
        if node_id.is_rsu:
            raise ValueError("Obu requires a vehicle id")
        super().__init__(node_id, roster, origin, thresholds)
        self.pose = None
        self.imu = (0.0, 0.0, 0.0, 0.0)
        self.next_bsm_at = None
        self.bsm_seq = 0
        self.last_quant = None
        self.alert_feed = []
        self.merge_angle = None
        self._merge_expires = -1
        self._feed_dedup = {}
        self._seen_advisories = set()

    def set_state(self, pose: Pose2D, imu, now: int) -> None:
        """Update own kinematics from the trajectory (or real sensors)."""
        self.pose = pose
        self.imu = imu
        self._now = now

    def tick(self, now: int):
        """Advance one step; returns (emit_bsm, frames, raised_events)."""
        self._now = now
        if self.pose is None:
            return False, [], []
        emit = False
        if self.next_bsm_at is None:
            self.next_bsm_at = now
        if now >= self.next_bsm_at:
            emit = True
            self.next_bsm_at += BSM_PERIOD_MS
            self.bsm_seq = self.alloc_seq()
            # own sample enters own history exactly as receivers will see
            # it, i.e. after the wire's fixed-point round trip
            self.last_quant = _k.bsm_quantize(
                self.pose.pos.x, self.pose.pos.y, self.pose.heading.compass_deg,
                self.pose.speed, self.imu[0], self.imu[1], self.imu[2],
                self.imu[3], self.origin.lat, self.origin.lon)
            q = self.last_quant
            self.store.ingest(self.rank, now, q[0], q[1], q[2], q[3], q[4],
                              q[5], q[6], q[7], self.bsm_seq)
        self.store.prune(now - STALE_TTL_MS)
        self._prune_cooldowns(now)
        if self.merge_angle is not None and now >= self._merge_expires:
            self.merge_angle = None

        th = self.th
        slots = self.store.occupied()
        own = self.rank
        slots = [s for s in slots if s != own]
        raised = []
        for slot in self.store.sweep_brake(slots, th.brake_window,
                                           th.brake_drop_per_packet):
            subject = self.roster.ids[slot]
            if not self._under_cooldown(AlertKind.EMERGENCY_BRAKE, subject.raw, now):
                raised.append(self._event_from_hit(
                    AlertKind.EMERGENCY_BRAKE, slot, now, Severity.CRITICAL))
        for slot in self.store.sweep_abnormal(slots, th.abnormal_persist,
                                              th.abnormal_yaw, th.abnormal_speed,
                                              th.abnormal_lateral_accel):
            subject = self.roster.ids[slot]
            if not self._under_cooldown(AlertKind.ABNORMAL_VEHICLE, subject.raw, now):
                raised.append(self._event_from_hit(
                    AlertKind.ABNORMAL_VEHICLE, slot, now, Severity.WARN))
        if (self.merge_angle is not None
                and self.store.length(own) > th.blindspot_decrease_samples):
            for slot in slots:
                hit, px, py = self.store.blindspot_pair(
                    own, slot, self.merge_angle, th.merge_angle_tolerance,
                    th.blindspot_decrease_samples, th.blindspot_distance)
                if not hit:
                    continue
                other = self.roster.ids[slot]
                if self._under_cooldown(AlertKind.BLIND_SPOT_COLLISION,
                                        other.raw, now):
                    continue
                # the broadcast warns the other party; our own driver is
                # warned by the mirror frame the other vehicle sends
                raised.append(AlertEvent(
                    AlertKind.BLIND_SPOT_COLLISION, self.id, other,
                    LocalPoint(px, py), now, Severity.CRITICAL))
        if self.id.emergency:
            hits = self.store.giveway_scan(
                self.pose.pos.x, self.pose.pos.y, self.pose.heading.compass_deg,
                self.pose.speed, slots, th.giveway_distance)
            for slot, _dist, closing in hits:
                subject = self.roster.ids[slot]
                if self._under_cooldown(AlertKind.EV_GIVE_WAY, subject.raw, now):
                    continue
                sev = Severity.CRITICAL if closing > 5.0 else Severity.WARN
                raised.append(self._event_from_hit(
                    AlertKind.EV_GIVE_WAY, slot, now, sev))

        frames = [self._alert_frame(e) for e in raised]
        return emit, frames, raised

    def deliver(self, frame, now: int):
        """Accept one inbound frame; returns new alert-feed entries."""
        if isinstance(frame, (bytes, bytearray)):
            try:
                frame = decode(bytes(frame))
            except DecodeError:
                self.decode_errors += 1
                return []
        h = frame.header
        if h.sender.raw == self.id.raw:
            return []
        if not self._accept_seq(h.sender.raw, h.seq):
            return []
        mt = h.msg_type
        if mt == MsgType.BSM:
            self._ingest_bsm(frame)
            return []
        if mt == MsgType.RSU_BEACON:
            if frame.payload.merge_angle is not None:
                self.merge_angle = frame.payload.merge_angle * 0.01
                self._merge_expires = now + MERGE_ANGLE_TTL_MS
            return []
        if mt == MsgType.ALERT:
            return self._feed_alert(frame, now)
        if mt == MsgType.ADVISORY:
            return self._feed_advisory(frame, now)
        return []

    def _feed_alert(self, frame, now):
        p = frame.payload
        subject = NodeId(p.subject) if p.subject else None
        if p.kind in (AlertKind.EV_GIVE_WAY, AlertKind.VRU_ON_PATH,
                      AlertKind.BLIND_SPOT_COLLISION):
            relevant = subject is not None and subject.raw == self.id.raw
        else:
            relevant = subject is None or subject.raw != self.id.raw
        if not relevant:
            return []
        key = (p.kind, p.subject, frame.header.sender.raw)
        if self._feed_dedup.get(key, -1) > now:
            return []
        self._feed_dedup[key] = now + FEED_DEDUP_MS
        location = None
        if p.aux_lat or p.aux_lon:
            location = LocalPoint(*_k.project_local(
                self.origin.lat, self.origin.lon,
                p.aux_lat * 1e-7, p.aux_lon * 1e-7))
        entry = FeedEntry(now, p.kind, p.severity, frame.header.sender,
                          subject, location)
        self.alert_feed.append(entry)
        return [entry]

    def _feed_advisory(self, frame, now):
        p = frame.payload
        if p.advisory_id in self._seen_advisories:
            return []
        self._seen_advisories.add(p.advisory_id)
        location = None
        if p.lat or p.lon:
            location = LocalPoint(*_k.project_local(
                self.origin.lat, self.origin.lon, p.lat * 1e-7, p.lon * 1e-7))
        entry = FeedEntry(now, p.kind, Severity.WARN, frame.header.sender,
                          None, location, advisory_id=p.advisory_id)
        self.alert_feed.append(entry)
        return [entry]


class Rsu(_Node):
    """Roadside unit: tracks passing vehicles, relays derived alerts,
    broadcasts operator advisories, and reports to the base station."""

    def __init__(self, node_id, roster, origin, position: LocalPoint,
                 thresholds=None, merge_angle_deg=None, radius=600.0):
        if not node_id.is_rsu:
            raise ValueError("Rsu requires an rsu id")
        super().__init__(node_id, roster, origin, thresholds)
        self.position = position
        self.merge_angle_deg = merge_angle_deg
        self.radius = radius
        self.next_beacon_at = None
        self.next_report_at = None
        self.advisories = []
        self._vru_queue = []
        self._active_alerts = {}

    def post_advisory(self, advisory_id: int, kind: AlertKind, ttl_ms: int,
                      location: GeoPoint | None, now: int) -> None:
        """Accept an operator advisory for broadcast until expiry.

        A ROUTE_CLEAR cancels any active ROUTE_BLOCKED on this unit.
        """
        if kind not in (AlertKind.ROUTE_BLOCKED, AlertKind.ROUTE_CLEAR):
            raise ValueError("advisories are ROUTE_BLOCKED or ROUTE_CLEAR only")
        if kind == AlertKind.ROUTE_CLEAR:
            self.advisories = [a for a in self.advisories
                               if a["kind"] != AlertKind.ROUTE_BLOCKED]
        self.advisories.append({
            "id": advisory_id,
            "kind": kind,
            "expires_at": now + ttl_ms,
            "location": location,
        })

    def post_vru(self, location: GeoPoint, vru_class, now: int) -> None:
        """Register a vulnerable-road-user sighting at this unit."""
        self._vru_queue.append((project(self.origin, location), vru_class, now))

    def deliver(self, frame, now: int):
        if isinstance(frame, (bytes, bytearray)):
            try:
                frame = decode(bytes(frame))
            except DecodeError:
                self.decode_errors += 1
                return []
        h = frame.header
        if h.sender.raw == self.id.raw:
            return []
        if not self._accept_seq(h.sender.raw, h.seq):
            return []
        if h.msg_type == MsgType.BSM:
            self._ingest_bsm(frame)
        elif h.msg_type == MsgType.VRU_EVENT:
            p = frame.payload
            self._vru_queue.append((
                LocalPoint(*_k.project_local(self.origin.lat, self.origin.lon,
                                             p.lat * 1e-7, p.lon * 1e-7)),
                p.vru_class, now))
        return []

    def _remember_alert(self, vehicle_raw: int, kind: AlertKind, now: int) -> None:
        self._active_alerts.setdefault(vehicle_raw, {})[kind] = now

    def _alerts_for(self, vehicle_raw: int, now: int):
        kinds = self._active_alerts.get(vehicle_raw)
        if not kinds:
            return ()
        live = tuple(k for k, t in kinds.items() if now - t < ALERT_COOLDOWN_MS)
        return live[:8]

    def tick(self, now: int):
        """Advance one step; returns (frames, reports, raised_events)."""
        self._now = now
        self.store.prune(now - STALE_TTL_MS)
        self._prune_cooldowns(now)
        frames = []
        raised = []
        th = self.th

        if self.next_beacon_at is None:
            self.next_beacon_at = now
        if now >= self.next_beacon_at:
            self.next_beacon_at += BEACON_PERIOD_MS
            gp = unproject(self.origin, self.position)
            merge = (None if self.merge_angle_deg is None
                     else round(self.merge_angle_deg * 100.0))
            frames.append(self._frame(RsuBeaconPayload(
                lat=round(gp.lat * 1e7), lon=round(gp.lon * 1e7),
                merge_angle=merge)))

        slots = self.store.occupied()
        near = self.store.scan_within(self.position.x, self.position.y,
                                      self.radius, slots)
        for slot in near:
            if slot not in self.roster.emergency_ranks:
                continue
            ev_id = self.roster.ids[slot]
            if self._under_cooldown(AlertKind.EV_APPROACHING, ev_id.raw, now):
                continue
            raised.append(self._event_from_hit(
                AlertKind.EV_APPROACHING, slot, now, Severity.WARN))
            self._remember_alert(ev_id.raw, AlertKind.EV_APPROACHING, now)

        for slot in self.store.sweep_brake(slots, th.brake_window,
                                           th.brake_drop_per_packet):
            subject = self.roster.ids[slot]
            self._remember_alert(subject.raw, AlertKind.EMERGENCY_BRAKE, now)
            if self._under_cooldown(AlertKind.EMERGENCY_BRAKE, subject.raw, now):
                continue
            raised.append(self._event_from_hit(
                AlertKind.EMERGENCY_BRAKE, slot, now, Severity.CRITICAL))

        for vru_pos, _cls, _t in self._vru_queue:
            for slot in slots:
                d, approaching = self.store.approach(
                    slot, self.position.x, self.position.y)
                if d >= th.vru_radius or not approaching:
                    continue
                subject = self.roster.ids[slot]
                if self._under_cooldown(AlertKind.VRU_ON_PATH, subject.raw, now):
                    continue
                raised.append(AlertEvent(
                    AlertKind.VRU_ON_PATH, self.id, subject, vru_pos, now,
                    Severity.CRITICAL))
                self._remember_alert(subject.raw, AlertKind.VRU_ON_PATH, now)
        self._vru_queue.clear()

        frames.extend(self._alert_frame(e) for e in raised)

        self.advisories = [a for a in self.advisories if a["expires_at"] > now]
        for adv in self.advisories:
            lat = lon = 0
            if adv["location"] is not None:
                lat = round(adv["location"].lat * 1e7)
                lon = round(adv["location"].lon * 1e7)
            frames.append(self._frame(AdvisoryPayload(
                kind=adv["kind"], advisory_id=adv["id"],
                ttl_ms=adv["expires_at"] - now, lat=lat, lon=lon)))

        reports = []
        if self.next_report_at is None:
            self.next_report_at = now
        if now >= self.next_report_at:
            self.next_report_at += REPORT_PERIOD_MS
            rsu_gp = unproject(self.origin, self.position)
            for slot in slots:
                s = self.store.latest(slot)
                vid = self.roster.ids[slot]
                gp = unproject(self.origin, LocalPoint(s[1], s[2]))
                reports.append({
                    "rsu": self.id.label(),
                    "rsu_lat": round(rsu_gp.lat, 7),
                    "rsu_lon": round(rsu_gp.lon, 7),
                    "vehicle": vid.label(),
                    "emergency": vid.emergency,
                    "lat": round(gp.lat, 7),
                    "lon": round(gp.lon, 7),
                    "speed": round(s[4], 2),
                    "heading": round(s[3], 2),
                    "timestamp_ms": s[0],
                    "alerts": [k.name for k in self._alerts_for(vid.raw, now)],
                })
        return frames, reports, raised
