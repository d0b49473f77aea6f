"""Regenerate the checked-in scenario files.

Scenarios are designed on a local metric grid and serialized as
lat/lon waypoints.  Run from the repo root:

    python3 tools/make_scenarios.py
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from v2xsim.geo import GeoPoint, LocalPoint, unproject

ORIGIN = GeoPoint(17.59, 78.12)
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def geo(x, y):
    gp = unproject(ORIGIN, LocalPoint(float(x), float(y)))
    return round(gp.lat, 7), round(gp.lon, 7)


def waypoint(t, x, y):
    lat, lon = geo(x, y)
    return {"timestamp_ms": t, "lat": lat, "lon": lon}


def rsu(ident, x, y, merge_angle_deg=None):
    lat, lon = geo(x, y)
    d = {"id": ident, "lat": lat, "lon": lon}
    if merge_angle_deg is not None:
        d["merge_angle_deg"] = merge_angle_deg
    return d


def vehicle(ident, waypoints, emergency=False, imu_override=None):
    d = {"id": ident, "waypoints": waypoints}
    if emergency:
        d["emergency"] = True
    if imu_override:
        d["imu_override"] = imu_override
    return d


def base(name, duration_ms, seed, **extra):
    d = {
        "name": name,
        "origin": {"lat": ORIGIN.lat, "lon": ORIGIN.lon},
        "duration_ms": duration_ms,
        "seed": seed,
    }
    d.update(extra)
    return d


def smoke():
    """Two vehicles passing one roadside unit; the cadence reference run."""
    return base(
        "smoke", 10000, 11,
        channel={"base_loss": 0.0},
        rsus=[rsu("rsu:1", 0, 0)],
        vehicles=[
            vehicle("obu:1", [waypoint(0, -200, 0), waypoint(10000, -100, 0)]),
            vehicle("obu:2", [waypoint(0, 150, 3.5), waypoint(10000, 50, 3.5)]),
        ],
    )


def corridor(base_loss, name, seed):
    """An emergency vehicle overtaking a 20-vehicle column past two
    roadside units."""
    vehicles = [vehicle("ev:1", [waypoint(0, -250, 3.5),
                                 waypoint(30000, 650, 3.5)], emergency=True)]
    for i in range(1, 21):
        x0 = 300 + 42 * (i - 1)
        vehicles.append(vehicle(
            f"obu:{i}",
            [waypoint(0, x0, 0), waypoint(30000, x0 + 180, 0)]))
    return base(
        name, 30000, seed,
        channel={"base_loss": base_loss},
        rsus=[rsu("rsu:1", 400, 0), rsu("rsu:2", 800, 0)],
        vehicles=vehicles,
    )


def tjunction(name, second):
    """Two roads merging at a right angle; variants swap the second
    vehicle's motion."""
    a = vehicle("obu:1", [waypoint(0, -130, 0), waypoint(12000, -10, 0)])
    if second == "crossing":
        b = vehicle("obu:2", [waypoint(0, 0, -130), waypoint(12000, 0, -10)])
    elif second == "stationary":
        b = vehicle("obu:2", [waypoint(0, 0, -30), waypoint(12000, 0, -30)])
    elif second == "parallel":
        b = vehicle("obu:2", [waypoint(0, -130, 3.5), waypoint(12000, -10, 3.5)])
    else:
        raise ValueError(second)
    return base(
        name, 12000, 23,
        channel={"base_loss": 0.0},
        rsus=[rsu("rsu:1", 0, 0, merge_angle_deg=90.0)],
        vehicles=[a, b],
    )


def brake():
    """A vehicle braking hard in front of a follower."""
    speeds = [20.0] + [20.0 - 1.0 * (k + 1) for k in range(8)]
    wps = [waypoint(0, -100, 0)]
    x = -100.0
    t = 0
    x += speeds[0] * 5.0
    t = 5000
    wps.append(waypoint(t, x, 0))
    for v in speeds[1:]:
        x += v * 0.1
        t += 100
        wps.append(waypoint(t, x, 0))
    x += speeds[-1] * (10000 - t) / 1000.0
    wps.append(waypoint(10000, x, 0))
    lead = vehicle("obu:1", wps)
    follower = vehicle("obu:2", [waypoint(0, -160, 0),
                                 waypoint(10000, -160 + 120, 0)])
    return base(
        "brake", 10000, 31,
        channel={"base_loss": 0.0},
        rsus=[rsu("rsu:1", 50, 0)],
        vehicles=[lead, follower],
    )


def vru():
    """A pedestrian steps out near a roadside unit as a vehicle closes in."""
    lat, lon = geo(30, 0)
    return base(
        "vru", 25000, 47,
        channel={"base_loss": 0.0},
        rsus=[rsu("rsu:1", 0, 0)],
        vehicles=[
            vehicle("obu:1", [waypoint(0, -300, 0), waypoint(25000, -50, 0)]),
        ],
        vru_events=[{"timestamp_ms": 16000, "lat": lat, "lon": lon,
                     "class": "pedestrian"}],
    )


def falloff():
    """One static sender with receivers planted at distance-bin centers."""
    vehicles = [vehicle("obu:1", [waypoint(0, 0, 0), waypoint(100000, 0, 0)])]
    n = 2
    for cx in range(25, 950, 50):
        vehicles.append(vehicle(
            f"obu:{n}",
            [waypoint(0, cx, 0), waypoint(100000, cx, 0)]))
        n += 1
    return base(
        "falloff", 100000, 7,
        channel={"base_loss": 0.7},
        rsus=[],
        vehicles=vehicles,
    )


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    docs = [
        smoke(),
        corridor(0.0, "corridor", 1),
        corridor(0.1, "corridor-lossy", 1),
        tjunction("tjunction", "crossing"),
        tjunction("tjunction-stationary", "stationary"),
        tjunction("tjunction-parallel", "parallel"),
        brake(),
        vru(),
        falloff(),
    ]
    for doc in docs:
        path = os.path.join(OUT_DIR, doc["name"] + ".scenario.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
