"""Planar kinematic geometry.

Local scenario frame: meters east (x) / north (y) of a fixed geographic
origin, via an equirectangular projection (scenarios span a few km, where
the projection error is negligible).  Headings are compass degrees,
clockwise from true north, as reported by GPS.
"""

import math
from dataclasses import dataclass
from enum import IntEnum

from ._kernels import impl as _k

EARTH_RADIUS_M = 6371000.0
_DEG2RAD = math.pi / 180.0

# |x|, |y| sanity bound for a local scenario frame
LOCAL_BOUND_M = 1e7


class BearingClass(IntEnum):
    FRONT = 0
    RIGHT = 1
    BACK = 2
    LEFT = 3


class CoincidentError(ValueError):
    """Observer and target are too close for a bearing to be defined."""


def _require_finite(name, *values):
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class GeoPoint:
    """Geographic coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        _require_finite("lat/lon", self.lat, self.lon)
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"lat out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"lon out of range: {self.lon}")


@dataclass(frozen=True)
class LocalPoint:
    """Meters east/north of the scenario origin.

    Scenario data (waypoints, RSU positions, obstructions) is bounded by
    LOCAL_BOUND_M at the points of entry; computed geometry such as a
    collision point may legitimately fall far outside that bound.
    """

    x: float
    y: float

    def __post_init__(self):
        _require_finite("x/y", self.x, self.y)


@dataclass(frozen=True)
class Heading:
    """Compass heading, normalized to [0, 360)."""

    compass_deg: float

    def __post_init__(self):
        _require_finite("heading", self.compass_deg)
        d = math.fmod(self.compass_deg, 360.0)
        if d < 0.0:
            d += 360.0
        object.__setattr__(self, "compass_deg", d)


@dataclass(frozen=True)
class Pose2D:
    pos: LocalPoint
    heading: Heading
    speed: float  # m/s

    def __post_init__(self):
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise ValueError(f"speed must be >= 0, got {self.speed}")


def project(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Equirectangular projection of ``p`` into the local frame at ``origin``.

    x = (lon - lon0) * pi/180 * R * cos(lat0),  y = (lat - lat0) * pi/180 * R.
    The origin latitude must lie in (-85, 85) to keep cos(lat0) well away
    from zero.
    """
    if not -85.0 < origin.lat < 85.0:
        raise ValueError(f"origin latitude too close to a pole: {origin.lat}")
    x, y = _k.project_local(origin.lat, origin.lon, p.lat, p.lon)
    if abs(x) >= LOCAL_BOUND_M or abs(y) >= LOCAL_BOUND_M:
        raise ValueError(f"projected point out of local-frame bounds: ({x}, {y})")
    return LocalPoint(x, y)


def unproject(origin: GeoPoint, p: LocalPoint) -> GeoPoint:
    """Inverse of :func:`project`; maps local meters back to geographic
    coordinates (scenario authoring works in meters, the wire in degrees)."""
    lat, lon = _k.unproject_local(origin.lat, origin.lon, p.x, p.y)
    return GeoPoint(lat, lon)


def to_math_angle(h: Heading) -> float:
    """Compass heading -> mathematical angle in radians, in (-pi, pi].

    North maps to +pi/2 (the +y axis), east to 0 (the +x axis).
    """
    return _k.compass_to_math_rad(h.compass_deg)


def collision_point(p1: LocalPoint, th1: Heading, p2: LocalPoint, th2: Heading) -> LocalPoint | None:
    """Predicted meeting point of two headed vehicles.

    Intersects the two carrier lines with a closed-form 2x2 solve that is
    robust at axis-aligned headings.  Returns None when the headings are
    parallel (|sin(dtheta)| < 1e-9).
    """
    ok, x, y = _k.line_intersection(
        p1.x, p1.y, th1.compass_deg, p2.x, p2.y, th2.compass_deg
    )
    if not ok:
        return None
    return LocalPoint(x, y)


def distance(a: LocalPoint, b: LocalPoint) -> float:
    """Euclidean distance in meters."""
    return _k.euclid(a.x, a.y, b.x, b.y)


def relative_bearing_class(observer: Pose2D, other: LocalPoint) -> BearingClass:
    """Classify ``other`` as FRONT/RIGHT/BACK/LEFT of the observer.

    beta = bearing-to-other minus observer heading, wrapped to (-180, 180].
    |beta| <= 45 is FRONT, |beta| >= 135 is BACK, positive beta RIGHT,
    negative LEFT.  Raises CoincidentError within a 0.01 m floor.
    """
    c = _k.bearing_class(
        observer.pos.x, observer.pos.y, observer.heading.compass_deg, other.x, other.y
    )
    if c < 0:
        raise CoincidentError(
            f"points within {_k.COINCIDENT_EPS} m: {observer.pos} vs {other}"
        )
    return BearingClass(c)
