"""Deterministic simulator and protocol library for vehicle-to-everything
emergency alerting: wire codec, broadcast channel model, detection rules,
node state machines, and a base-station monitor."""

from ._kernels import BACKEND
from .alerts import (
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
from .basestation import RegionView, UnknownRsuError, create_app
from .channel import Channel, ChannelParams, Obstruction, delivery_probability, has_los
from .geo import (
    BearingClass,
    CoincidentError,
    GeoPoint,
    Heading,
    LocalPoint,
    Pose2D,
    collision_point,
    distance,
    project,
    relative_bearing_class,
    unproject,
)
from .metrics import MetricsReport
from .scenario import Scenario, ScenarioError
from .sim import RunResult, interpolate_pose, run
from .wire import (
    BASE_STATION_ID,
    AdvisoryPayload,
    AlertKind,
    AlertPayload,
    BaseReportPayload,
    BsmPayload,
    DecodeError,
    Frame,
    FrameHeader,
    MsgType,
    NodeId,
    RsuBeaconPayload,
    Severity,
    VruClass,
    VruEventPayload,
    decode,
    encode,
    encode_frame,
)

__version__ = "0.1.0"

__all__ = [
    "AdvisoryPayload",
    "AlertEvent",
    "AlertKind",
    "AlertPayload",
    "BACKEND",
    "BASE_STATION_ID",
    "BaseReportPayload",
    "BearingClass",
    "BsmPayload",
    "Channel",
    "ChannelParams",
    "CoincidentError",
    "DecodeError",
    "Frame",
    "FrameHeader",
    "GeoPoint",
    "Heading",
    "ImuSample",
    "LocalPoint",
    "MetricsReport",
    "MsgType",
    "NodeId",
    "Obstruction",
    "Pose2D",
    "RegionView",
    "RsuBeaconPayload",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "Severity",
    "Thresholds",
    "TrackState",
    "UnknownRsuError",
    "VruClass",
    "VruEventPayload",
    "__version__",
    "collision_point",
    "create_app",
    "decode",
    "delivery_probability",
    "detect_abnormal",
    "detect_blind_spot",
    "detect_emergency_brake",
    "detect_give_way",
    "distance",
    "encode",
    "encode_frame",
    "has_los",
    "interpolate_pose",
    "project",
    "relative_bearing_class",
    "run",
    "unproject",
    "vru_alert_targets",
]
