"""Binary frame codec for OBU/RSU/base-station messages.

Every message is one frame, big-endian throughout::

    +--------+---------+----------+------------+-------+--------------+-------------+
    | magic  | version | msg_type | sender     | seq   | timestamp_ms | payload_len |
    | 0x5632 | 0x01    | u8       | u32 NodeId | u16   | u64          | u16         |
    +--------+---------+----------+------------+-------+--------------+-------------+
    | payload (payload_len bytes) | crc32 over header+payload (u32)   |
    +-----------------------------+-----------------------------------+

Header is 20 bytes, CRC is the standard IEEE 802.3 reflected CRC-32
(zlib.crc32).  Total frame size is capped at 1024 bytes.

Payload layouts (sizes in bytes):

    BSM (22):         lat i32 (1e-7 deg), lon i32 (1e-7 deg), elev i16 (0.1 m),
                      speed u16 (0.01 m/s), heading u16 (0.01 deg, < 36000),
                      accel_x/y/z i16 (0.01 m/s^2), yaw_rate i16 (0.01 deg/s)
    RSU_BEACON (11):  lat i32, lon i32, flags u8 (bit0 = merge angle present),
                      merge_angle u16 (0.01 deg)
    ALERT (14):       alert_kind u8, subject u32 (0 = none), aux_lat i32,
                      aux_lon i32 (0/0 = none), severity u8
    ADVISORY (17):    alert_kind u8 (ROUTE_BLOCKED/ROUTE_CLEAR),
                      advisory_id u32, ttl_ms u32, lat i32, lon i32
    VRU_EVENT (9):    vru_class u8, lat i32, lon i32
    BASE_REPORT (17+n): vehicle u32, lat i32, lon i32, speed u16, heading u16,
                      alert_count u8 (<= 8), then alert_count alert_kind bytes

Fixed-point scales follow SAE J2735 conventions.  Golden frames for all six
message types live in ``vectors/``.
"""

import struct
import zlib
from dataclasses import dataclass, field
from enum import IntEnum

from . import geo
from .geo import GeoPoint, Heading, Pose2D

MAGIC = b"\x56\x32"
VERSION = 1
HEADER_LEN = 20
CRC_LEN = 4
MAX_FRAME = 1024
MAX_PAYLOAD = 1000

_RSU_BIT = 1 << 31
_EMERGENCY_BIT = 1 << 30
_SERIAL_MASK = (1 << 30) - 1

_HEADER_STRUCT = struct.Struct(">2sBBIHQH")


class MsgType(IntEnum):
    BSM = 1
    RSU_BEACON = 2
    ALERT = 3
    ADVISORY = 4
    VRU_EVENT = 5
    BASE_REPORT = 6


class AlertKind(IntEnum):
    ABNORMAL_VEHICLE = 1
    EMERGENCY_BRAKE = 2
    VRU_ON_PATH = 3
    BLIND_SPOT_COLLISION = 4
    EV_GIVE_WAY = 5
    EV_APPROACHING = 6
    ROUTE_BLOCKED = 7
    ROUTE_CLEAR = 8


class Severity(IntEnum):
    INFO = 1
    WARN = 2
    CRITICAL = 3


class VruClass(IntEnum):
    PEDESTRIAN = 1
    DOG = 2
    COW = 3
    CAT = 4
    OTHER = 5


class DecodeError(ValueError):
    """Base class for every frame-decoding failure."""

    reason = "decode"


class BadMagic(DecodeError):
    reason = "magic"


class BadVersion(DecodeError):
    reason = "version"


class BadLength(DecodeError):
    reason = "length"


class BadCrc(DecodeError):
    reason = "crc"


class UnknownMsgType(DecodeError):
    reason = "msg_type"


class BadRange(DecodeError):
    reason = "range"

    def __init__(self, fieldname, message=""):
        super().__init__(message or f"field out of range: {fieldname}")
        self.field = fieldname


@dataclass(frozen=True, order=True)
class NodeId:
    """32-bit node identifier.

    Bit 31 set = RSU, bit 30 = emergency flag (OBUs only), low 30 bits are
    the serial (> 0; 0 is reserved for "unassigned").
    """

    raw: int

    def __post_init__(self):
        if not 0 <= self.raw < (1 << 32):
            raise ValueError(f"NodeId out of u32 range: {self.raw}")
        if self.serial == 0:
            raise ValueError("NodeId serial must be > 0")
        if self.is_rsu and self.raw & _EMERGENCY_BIT:
            raise ValueError("RSU ids must not set the emergency bit")

    @classmethod
    def obu(cls, serial, emergency=False):
        if not 0 < serial <= _SERIAL_MASK:
            raise ValueError(f"serial out of range: {serial}")
        return cls(serial | (_EMERGENCY_BIT if emergency else 0))

    @classmethod
    def rsu(cls, serial):
        if not 0 < serial <= _SERIAL_MASK:
            raise ValueError(f"serial out of range: {serial}")
        return cls(serial | _RSU_BIT)

    @property
    def is_rsu(self):
        return bool(self.raw & _RSU_BIT)

    @property
    def emergency(self):
        return (not self.is_rsu) and bool(self.raw & _EMERGENCY_BIT)

    @property
    def serial(self):
        return self.raw & _SERIAL_MASK

    def label(self):
        """Stable human-readable form: "rsu:N", "ev:N" or "obu:N"."""
        if self.is_rsu:
            return f"rsu:{self.serial}"
        return f"{'ev' if self.emergency else 'obu'}:{self.serial}"

    @classmethod
    def parse(cls, text):
        """Inverse of :meth:`label` (also accepts a bare integer string)."""
        text = text.strip().lower()
        if ":" in text:
            kind, _, num = text.partition(":")
            serial = int(num)
            if kind == "rsu":
                return cls.rsu(serial)
            if kind == "ev":
                return cls.obu(serial, emergency=True)
            if kind == "obu":
                return cls.obu(serial)
            raise ValueError(f"unknown node kind: {kind!r}")
        return cls(int(text))

    def __str__(self):
        return self.label()


# Pseudo-sender for wired base-station -> RSU frames (advisory/VRU pushes).
BASE_STATION_ID = NodeId(_RSU_BIT | _SERIAL_MASK)


@dataclass(frozen=True)
class FrameHeader:
    msg_type: MsgType
    sender: NodeId
    seq: int
    timestamp_ms: int

    def __post_init__(self):
        if not 0 <= self.seq < (1 << 16):
            raise ValueError(f"seq out of u16 range: {self.seq}")
        if not 0 <= self.timestamp_ms < (1 << 64):
            raise ValueError(f"timestamp out of u64 range: {self.timestamp_ms}")


def _check_i32(name, v):
    if not -(1 << 31) <= v < (1 << 31):
        raise ValueError(f"{name} out of i32 range: {v}")
    return v


def _check_i16(name, v):
    if not -(1 << 15) <= v < (1 << 15):
        raise ValueError(f"{name} out of i16 range: {v}")
    return v


def _check_u16(name, v):
    if not 0 <= v < (1 << 16):
        raise ValueError(f"{name} out of u16 range: {v}")
    return v


_BSM_STRUCT = struct.Struct(">iihHHhhhh")


@dataclass(frozen=True)
class BsmPayload:
    """Basic Safety Message body: position, speed, heading, IMU, all in
    J2735-style fixed point."""

    lat: int        # 1e-7 deg
    lon: int        # 1e-7 deg
    elev: int       # 0.1 m
    speed: int      # 0.01 m/s
    heading: int    # 0.01 deg, in [0, 36000)
    accel_x: int    # 0.01 m/s^2
    accel_y: int    # 0.01 m/s^2
    accel_z: int    # 0.01 m/s^2
    yaw_rate: int   # 0.01 deg/s

    msg_type = MsgType.BSM

    def __post_init__(self):
        if not -900000000 <= self.lat <= 900000000:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -1800000000 <= self.lon <= 1800000000:
            raise ValueError(f"lon out of range: {self.lon}")
        _check_i16("elev", self.elev)
        _check_u16("speed", self.speed)
        if not 0 <= self.heading < 36000:
            raise ValueError(f"heading out of range: {self.heading}")
        _check_i16("accel_x", self.accel_x)
        _check_i16("accel_y", self.accel_y)
        _check_i16("accel_z", self.accel_z)
        _check_i16("yaw_rate", self.yaw_rate)

    def pack(self):
        return _BSM_STRUCT.pack(self.lat, self.lon, self.elev, self.speed,
                                self.heading, self.accel_x, self.accel_y,
                                self.accel_z, self.yaw_rate)

    @classmethod
    def unpack(cls, data):
        if len(data) != _BSM_STRUCT.size:
            raise BadLength(f"BSM payload must be {_BSM_STRUCT.size} bytes")
        lat, lon, elev, speed, heading, ax, ay, az, yaw = _BSM_STRUCT.unpack(data)
        if heading >= 36000:
            raise BadRange("heading")
        if not -900000000 <= lat <= 900000000:
            raise BadRange("lat")
        if not -1800000000 <= lon <= 1800000000:
            raise BadRange("lon")
        return cls(lat, lon, elev, speed, heading, ax, ay, az, yaw)


_BEACON_STRUCT = struct.Struct(">iiBH")


@dataclass(frozen=True)
class RsuBeaconPayload:
    """Periodic RSU beacon: its position plus, at intersections, the local
    merging-road angle the blind-spot check needs."""

    lat: int                      # 1e-7 deg
    lon: int                      # 1e-7 deg
    merge_angle: int | None = None  # 0.01 deg, None if not an intersection

    msg_type = MsgType.RSU_BEACON

    def __post_init__(self):
        _check_i32("lat", self.lat)
        _check_i32("lon", self.lon)
        if self.merge_angle is not None and not 0 <= self.merge_angle < 36000:
            raise ValueError(f"merge_angle out of range: {self.merge_angle}")

    def pack(self):
        has = self.merge_angle is not None
        return _BEACON_STRUCT.pack(self.lat, self.lon, 1 if has else 0,
                                   self.merge_angle if has else 0)

    @classmethod
    def unpack(cls, data):
        if len(data) != _BEACON_STRUCT.size:
            raise BadLength(f"beacon payload must be {_BEACON_STRUCT.size} bytes")
        lat, lon, flags, merge = _BEACON_STRUCT.unpack(data)
        if flags not in (0, 1):
            raise BadRange("flags")
        if flags and merge >= 36000:
            raise BadRange("merge_angle")
        return cls(lat, lon, merge if flags else None)


_ALERT_STRUCT = struct.Struct(">BIiiB")


@dataclass(frozen=True)
class AlertPayload:
    kind: AlertKind
    subject: int = 0      # raw NodeId of the vehicle the alert is about, 0 = none
    aux_lat: int = 0      # 1e-7 deg alert location, 0/0 = none
    aux_lon: int = 0
    severity: Severity = Severity.WARN

    msg_type = MsgType.ALERT

    def __post_init__(self):
        AlertKind(self.kind)
        Severity(self.severity)
        if self.subject:
            NodeId(self.subject)
        _check_i32("aux_lat", self.aux_lat)
        _check_i32("aux_lon", self.aux_lon)

    def pack(self):
        return _ALERT_STRUCT.pack(self.kind, self.subject, self.aux_lat,
                                  self.aux_lon, self.severity)

    @classmethod
    def unpack(cls, data):
        if len(data) != _ALERT_STRUCT.size:
            raise BadLength(f"alert payload must be {_ALERT_STRUCT.size} bytes")
        kind, subject, lat, lon, severity = _ALERT_STRUCT.unpack(data)
        try:
            kind = AlertKind(kind)
        except ValueError:
            raise BadRange("alert_kind") from None
        try:
            severity = Severity(severity)
        except ValueError:
            raise BadRange("severity") from None
        if subject:
            try:
                NodeId(subject)
            except ValueError:
                raise BadRange("subject") from None
        return cls(kind, subject, lat, lon, severity)


_ADVISORY_STRUCT = struct.Struct(">BIIii")


@dataclass(frozen=True)
class AdvisoryPayload:
    kind: AlertKind       # ROUTE_BLOCKED or ROUTE_CLEAR
    advisory_id: int
    ttl_ms: int
    lat: int = 0
    lon: int = 0

    msg_type = MsgType.ADVISORY

    def __post_init__(self):
        if self.kind not in (AlertKind.ROUTE_BLOCKED, AlertKind.ROUTE_CLEAR):
            raise ValueError(f"advisory kind must be route blocked/clear: {self.kind}")
        if not 0 <= self.advisory_id < (1 << 32):
            raise ValueError("advisory_id out of u32 range")
        if not 0 <= self.ttl_ms < (1 << 32):
            raise ValueError("ttl_ms out of u32 range")
        _check_i32("lat", self.lat)
        _check_i32("lon", self.lon)

    def pack(self):
        return _ADVISORY_STRUCT.pack(self.kind, self.advisory_id, self.ttl_ms,
                                     self.lat, self.lon)

    @classmethod
    def unpack(cls, data):
        if len(data) != _ADVISORY_STRUCT.size:
            raise BadLength(f"advisory payload must be {_ADVISORY_STRUCT.size} bytes")
        kind, aid, ttl, lat, lon = _ADVISORY_STRUCT.unpack(data)
        if kind not in (AlertKind.ROUTE_BLOCKED, AlertKind.ROUTE_CLEAR):
            raise BadRange("alert_kind")
        return cls(AlertKind(kind), aid, ttl, lat, lon)


_VRU_STRUCT = struct.Struct(">Bii")


@dataclass(frozen=True)
class VruEventPayload:
    vru_class: VruClass
    lat: int
    lon: int

    msg_type = MsgType.VRU_EVENT

    def __post_init__(self):
        VruClass(self.vru_class)
        _check_i32("lat", self.lat)
        _check_i32("lon", self.lon)

    def pack(self):
        return _VRU_STRUCT.pack(self.vru_class, self.lat, self.lon)

    @classmethod
    def unpack(cls, data):
        if len(data) != _VRU_STRUCT.size:
            raise BadLength(f"VRU payload must be {_VRU_STRUCT.size} bytes")
        klass, lat, lon = _VRU_STRUCT.unpack(data)
        try:
            klass = VruClass(klass)
        except ValueError:
            raise BadRange("vru_class") from None
        return cls(klass, lat, lon)


_REPORT_STRUCT = struct.Struct(">IiiHHB")


@dataclass(frozen=True)
class BaseReportPayload:
    """Per-vehicle snapshot an RSU forwards to the base station."""

    vehicle: int          # raw NodeId
    lat: int              # 1e-7 deg
    lon: int              # 1e-7 deg
    speed: int            # 0.01 m/s
    heading: int          # 0.01 deg
    alerts: tuple = ()    # active AlertKinds for this vehicle

    msg_type = MsgType.BASE_REPORT

    def __post_init__(self):
        NodeId(self.vehicle)
        _check_i32("lat", self.lat)
        _check_i32("lon", self.lon)
        _check_u16("speed", self.speed)
        if not 0 <= self.heading < 36000:
            raise ValueError(f"heading out of range: {self.heading}")
        if len(self.alerts) > 8:
            raise ValueError("at most 8 active alerts per report")
        object.__setattr__(self, "alerts", tuple(AlertKind(a) for a in self.alerts))

    def pack(self):
        head = _REPORT_STRUCT.pack(self.vehicle, self.lat, self.lon,
                                   self.speed, self.heading, len(self.alerts))
        return head + bytes(self.alerts)

    @classmethod
    def unpack(cls, data):
        if len(data) < _REPORT_STRUCT.size:
            raise BadLength("base report payload too short")
        vehicle, lat, lon, speed, heading, count = _REPORT_STRUCT.unpack(
            data[:_REPORT_STRUCT.size])
        if count > 8:
            raise BadRange("alert_count")
        if len(data) != _REPORT_STRUCT.size + count:
            raise BadLength("base report alert list length mismatch")
        if heading >= 36000:
            raise BadRange("heading")
        try:
            NodeId(vehicle)
        except ValueError:
            raise BadRange("vehicle") from None
        try:
            alerts = tuple(AlertKind(b) for b in data[_REPORT_STRUCT.size:])
        except ValueError:
            raise BadRange("alert_kind") from None
        return cls(vehicle, lat, lon, speed, heading, alerts)


_PAYLOAD_TYPES = {
    MsgType.BSM: BsmPayload,
    MsgType.RSU_BEACON: RsuBeaconPayload,
    MsgType.ALERT: AlertPayload,
    MsgType.ADVISORY: AdvisoryPayload,
    MsgType.VRU_EVENT: VruEventPayload,
    MsgType.BASE_REPORT: BaseReportPayload,
}

Payload = (BsmPayload | RsuBeaconPayload | AlertPayload | AdvisoryPayload
           | VruEventPayload | BaseReportPayload)


@dataclass(frozen=True)
class Frame:
    header: FrameHeader
    payload: Payload
    crc: int = field(default=0, compare=False)


def encode(sender: NodeId, seq: int, timestamp_ms: int, payload: Payload) -> bytes:
    """Serialize one frame; deterministic for identical inputs."""
    body = payload.pack()
    if len(body) > MAX_PAYLOAD:
        raise ValueError(f"payload too large: {len(body)} bytes")
    header = _HEADER_STRUCT.pack(MAGIC, VERSION, payload.msg_type, sender.raw,
                                 seq, timestamp_ms, len(body))
    crc = zlib.crc32(header + body)
    return header + body + struct.pack(">I", crc)


def encode_frame(frame: Frame) -> bytes:
    return encode(frame.header.sender, frame.header.seq,
                  frame.header.timestamp_ms, frame.payload)


def decode(data: bytes) -> Frame:
    """Parse and verify a frame; total over arbitrary byte strings.

    Raises a DecodeError subclass naming the first failed check:
    BadLength, BadMagic, BadVersion, BadCrc, UnknownMsgType, BadRange.
    """
    if len(data) < HEADER_LEN + CRC_LEN:
        raise BadLength(f"frame shorter than minimum: {len(data)} bytes")
    if data[:2] != MAGIC:
        raise BadMagic(f"bad magic: {data[:2]!r}")
    if data[2] != VERSION:
        raise BadVersion(f"unsupported version: {data[2]}")
    _, _, msg_type, sender_raw, seq, timestamp, payload_len = \
        _HEADER_STRUCT.unpack(data[:HEADER_LEN])
    if len(data) != HEADER_LEN + payload_len + CRC_LEN:
        raise BadLength(
            f"frame length {len(data)} != header+{payload_len}+crc")
    if len(data) > MAX_FRAME:
        raise BadLength(f"frame exceeds {MAX_FRAME}-byte cap")
    body = data[HEADER_LEN:HEADER_LEN + payload_len]
    (crc,) = struct.unpack(">I", data[HEADER_LEN + payload_len:])
    if zlib.crc32(data[:HEADER_LEN + payload_len]) != crc:
        raise BadCrc("crc mismatch")
    try:
        mt = MsgType(msg_type)
    except ValueError:
        raise UnknownMsgType(f"unknown msg_type: {msg_type}") from None
    try:
        sender = NodeId(sender_raw)
    except ValueError:
        raise BadRange("sender") from None
    payload = _PAYLOAD_TYPES[mt].unpack(body)
    header = FrameHeader(mt, sender, seq, timestamp)
    return Frame(header, payload, crc)


def bsm_from_kinematics(pos: GeoPoint, elev_m: float, speed_mps: float,
                        heading_deg: float, accel_x: float, accel_y: float,
                        accel_z: float, yaw_rate_dps: float) -> BsmPayload:
    """Quantize physical units into a BSM payload."""
    heading = round(heading_deg * 100.0) % 36000
    return BsmPayload(
        lat=round(pos.lat * 1e7),
        lon=round(pos.lon * 1e7),
        elev=max(-32768, min(32767, round(elev_m * 10.0))),
        speed=max(0, min(65535, round(speed_mps * 100.0))),
        heading=heading,
        accel_x=max(-32768, min(32767, round(accel_x * 100.0))),
        accel_y=max(-32768, min(32767, round(accel_y * 100.0))),
        accel_z=max(-32768, min(32767, round(accel_z * 100.0))),
        yaw_rate=max(-32768, min(32767, round(yaw_rate_dps * 100.0))),
    )


def bsm_to_pose(p: BsmPayload, origin: GeoPoint):
    """Convert fixed-point BSM fields back to physical units.

    Returns (Pose2D, ImuSample-tuple) where the IMU part is
    (accel_x, accel_y, accel_z, yaw_rate) in m/s^2 and deg/s; position is
    projected into the local frame at ``origin``.
    """
    gp = GeoPoint(p.lat * 1e-7, p.lon * 1e-7)
    pos = geo.project(origin, gp)
    pose = Pose2D(pos, Heading(p.heading * 0.01), p.speed * 0.01)
    imu = (p.accel_x * 0.01, p.accel_y * 0.01, p.accel_z * 0.01, p.yaw_rate * 0.01)
    return pose, imu
