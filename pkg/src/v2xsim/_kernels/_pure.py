"""Pure-Python kernel backend.

Scalar math and the per-node track store used by the hot simulation path.
``_speedups.pyx`` reimplements this module in Cython with identical
semantics; expressions here are kept in the same order and use the same
libm functions so both backends produce bit-identical floats.
"""

import math

BACKEND = "pure"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_DEG2RAD = math.pi / 180.0
_INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53

EARTH_RADIUS_M = 6371000.0

# line orientation / intersection degeneracy cutoff
PARALLEL_EPS = 1e-9
# below this separation a bearing is undefined
COINCIDENT_EPS = 0.01

FRONT, RIGHT, BACK, LEFT = 0, 1, 2, 3


def rng_uniform(state):
    """Advance a SplitMix64 state; return (new_state, uniform in [0, 1))."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    z = z ^ (z >> 31)
    return state, (z >> 11) * _INV_2_53


def wrap_deg_signed(d):
    """Wrap degrees to (-180, 180]."""
    r = math.fmod(d, 360.0)
    if r <= -180.0:
        r += 360.0
    elif r > 180.0:
        r -= 360.0
    return r


def circular_diff_deg(a, b):
    """Absolute circular difference of two compass angles, in [0, 180]."""
    d = math.fmod(math.fabs(a - b), 360.0)
    if d > 180.0:
        d = 360.0 - d
    return d


def compass_to_math_rad(compass_deg):
    """Compass degrees (clockwise from north) -> math radians in (-pi, pi].

    North (0) maps to +pi/2, east (90) to 0.
    """
    return wrap_deg_signed(90.0 - compass_deg) * _DEG2RAD


def euclid(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return math.sqrt(dx * dx + dy * dy)


def project_local(lat0, lon0, lat, lon):
    """Equirectangular projection into the local frame at (lat0, lon0).

    Returns (x, y) in meters east/north of the origin.
    """
    x = (lon - lon0) * _DEG2RAD * EARTH_RADIUS_M * math.cos(lat0 * _DEG2RAD)
    y = (lat - lat0) * _DEG2RAD * EARTH_RADIUS_M
    return x, y


def unproject_local(lat0, lon0, x, y):
    """Inverse of :func:`project_local`; returns (lat, lon) degrees."""
    lat = lat0 + y / (_DEG2RAD * EARTH_RADIUS_M)
    lon = lon0 + x / (_DEG2RAD * EARTH_RADIUS_M * math.cos(lat0 * _DEG2RAD))
    return lat, lon


def _clamp_i16(v):
    q = round(v * 100.0)
    if q > 32767:
        return 32767
    if q < -32768:
        return -32768
    return q


def bsm_quantize(x, y, heading, speed, ax, ay, az, yaw, lat0, lon0):
    """Round-trip a local pose through the wire's fixed-point fields.

    Position goes out as 1e-7-degree geographic coordinates, everything
    else as centiunits; the values returned are exactly what a receiver
    reconstructs after decoding.  Returns (qx, qy, qheading, qspeed, qax,
    qay, qaz, qyaw).
    """
    lat, lon = unproject_local(lat0, lon0, x, y)
    qlat = round(lat * 1e7) * 1e-7
    qlon = round(lon * 1e7) * 1e-7
    qx, qy = project_local(lat0, lon0, qlat, qlon)
    qheading = (round(heading * 100.0) % 36000) * 0.01
    qs = round(speed * 100.0)
    if qs < 0:
        qs = 0
    elif qs > 65535:
        qs = 65535
    return (qx, qy, qheading, qs * 0.01, _clamp_i16(ax) * 0.01,
            _clamp_i16(ay) * 0.01, _clamp_i16(az) * 0.01,
            _clamp_i16(yaw) * 0.01)


def line_intersection(x1, y1, h1, x2, y2, h2):
    """Intersect the carrier lines of two headed points.

    Positions are local meters, headings compass degrees.  Each line is put
    in normal form  sin(t)*x - cos(t)*y = sin(t)*x0 - cos(t)*y0  and the
    2x2 system is solved in closed (Cramer/cross-product) form, which stays
    finite at axis-aligned headings where tan or cot blow up.

    Returns (ok, x, y); ok is 0 when |sin(t1 - t2)| < PARALLEL_EPS.
    """
    t1 = compass_to_math_rad(h1)
    t2 = compass_to_math_rad(h2)
    s1 = math.sin(t1)
    c1 = math.cos(t1)
    s2 = math.sin(t2)
    c2 = math.cos(t2)
    det = c1 * s2 - s1 * c2
    if math.fabs(det) < PARALLEL_EPS:
        return 0, math.nan, math.nan
    r1 = s1 * x1 - c1 * y1
    r2 = s2 * x2 - c2 * y2
    return 1, (c1 * r2 - c2 * r1) / det, (s1 * r2 - s2 * r1) / det


def bearing_class(x, y, heading, ox, oy):
    """Classify (ox, oy) relative to an observer pose.

    Returns FRONT/RIGHT/BACK/LEFT, or -1 when the points are within
    COINCIDENT_EPS of each other.  Sector boundaries: |beta| <= 45 front,
    |beta| >= 135 back (front/back sectors closed).
    """
    dx = ox - x
    dy = oy - y
    if math.sqrt(dx * dx + dy * dy) <= COINCIDENT_EPS:
        return -1
    bearing = math.atan2(dx, dy) / _DEG2RAD  # compass bearing to other
    beta = wrap_deg_signed(bearing - heading)
    ab = math.fabs(beta)
    if ab <= 45.0:
        return FRONT
    if ab >= 135.0:
        return BACK
    return RIGHT if beta > 0.0 else LEFT


def delivery_probability(d, los, r_los, r_nlos, falloff, base_loss):
    """Distance/LOS delivery probability: flat to the reliable radius, then
    a linear falloff band of width ``falloff``, then zero."""
    r = r_los if los else r_nlos
    if d <= r:
        return 1.0 - base_loss
    if d <= r + falloff:
        return (1.0 - base_loss) * (1.0 - (d - r) / falloff)
    return 0.0


def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


def _on_segment(ax, ay, bx, by, px, py):
    return (min(ax, bx) <= px <= max(ax, bx)) and (min(ay, by) <= py <= max(ay, by))


def segments_intersect(ax, ay, bx, by, cx, cy, dx, dy):
    """Closed segment intersection test (touching endpoints count)."""
    o1 = _orient(ax, ay, bx, by, cx, cy)
    o2 = _orient(ax, ay, bx, by, dx, dy)
    o3 = _orient(cx, cy, dx, dy, ax, ay)
    o4 = _orient(cx, cy, dx, dy, bx, by)
    if o1 != o2 and o3 != o4:
        return 1
    if o1 == 0 and _on_segment(ax, ay, bx, by, cx, cy):
        return 1
    if o2 == 0 and _on_segment(ax, ay, bx, by, dx, dy):
        return 1
    if o3 == 0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return 1
    if o4 == 0 and _on_segment(cx, cy, dx, dy, bx, by):
        return 1
    return 0


def max_consecutive_drop(speeds):
    """Largest single-step decrease over consecutive speed samples.

    Returns NaN when fewer than two samples are given.
    """
    n = len(speeds)
    if n < 2:
        return math.nan
    best = -math.inf
    for i in range(n - 1):
        d = speeds[i] - speeds[i + 1]
        if d > best:
            best = d
    return best


# sample tuple layout shared by both backends:
# (t_ms, x, y, heading, speed, accel_x, accel_y, accel_z, yaw_rate)


class TrackStore:
    """Fixed-slot store of per-sender kinematic history rings.

    One instance per node; slot indices are assigned by the caller (in the
    simulator: the sender's rank in the sorted node-id list).  Timestamps
    must be strictly increasing per slot; sequence numbers are 16-bit and
    accepted only when newer in the wrapping sense.
    """

    def __init__(self, n_slots, history=32):
        self.n_slots = n_slots
        self.history = history
        self._hist = [[] for _ in range(n_slots)]
        self._seq = [-1] * n_slots

    def ingest(self, slot, t, x, y, heading, speed, ax, ay, az, yaw, seq):
        last = self._seq[slot]
        if last >= 0:
            delta = (seq - last) & 0xFFFF
            if delta == 0 or delta > 0x7FFF:
                return 0
        h = self._hist[slot]
        if h and t <= h[-1][0]:
            return 0
        h.append((t, x, y, heading, speed, ax, ay, az, yaw))
        if len(h) > self.history:
            del h[0]
        self._seq[slot] = seq
        return 1

    def length(self, slot):
        return len(self._hist[slot])

    def newest_time(self, slot):
        h = self._hist[slot]
        return h[-1][0] if h else -1

    def last_seq(self, slot):
        return self._seq[slot]

    def latest(self, slot):
        h = self._hist[slot]
        return h[-1] if h else None

    def sample(self, slot, i):
        return self._hist[slot][i]

    def clear(self, slot):
        self._hist[slot].clear()
        self._seq[slot] = -1

    def prune(self, cutoff):
        """Clear every slot whose newest sample is older than ``cutoff``;
        returns the cleared slot indices."""
        cleared = []
        for slot in range(self.n_slots):
            h = self._hist[slot]
            if h and h[-1][0] < cutoff:
                self.clear(slot)
                cleared.append(slot)
        return cleared

    def occupied(self, since=-1):
        """Slots holding at least one sample newer than ``since``."""
        return [s for s in range(self.n_slots)
                if self._hist[s] and self._hist[s][-1][0] > since]

    def sweep_brake(self, slots, window, drop_th):
        """Slots whose last ``window`` speeds contain a consecutive drop
        strictly greater than ``drop_th``; partial windows never fire."""
        hits = []
        for slot in slots:
            h = self._hist[slot]
            if len(h) < window:
                continue
            best = -math.inf
            base = len(h) - window
            for i in range(window - 1):
                d = h[base + i][4] - h[base + i + 1][4]
                if d > best:
                    best = d
            if best > drop_th:
                hits.append(slot)
        return hits

    def sweep_abnormal(self, slots, persist, yaw_th, speed_th, lat_th):
        """Slots whose last ``persist`` samples all satisfy
        (|yaw| > yaw_th and speed > speed_th) or |accel_y| > lat_th."""
        hits = []
        for slot in slots:
            h = self._hist[slot]
            if len(h) < persist:
                continue
            ok = True
            for i in range(len(h) - persist, len(h)):
                s = h[i]
                if not ((math.fabs(s[8]) > yaw_th and s[4] > speed_th)
                        or math.fabs(s[6]) > lat_th):
                    ok = False
                    break
            if ok:
                hits.append(slot)
        return hits

    def giveway_scan(self, ex, ey, eheading, espeed, slots, dist_th):
        """Front-sector neighbors strictly closer than ``dist_th``.

        Returns (slot, distance, closing_speed) triples; closing speed is
        observer speed minus neighbor speed.
        """
        hits = []
        for slot in slots:
            h = self._hist[slot]
            if not h:
                continue
            s = h[-1]
            d = euclid(ex, ey, s[1], s[2])
            if d >= dist_th:
                continue
            if bearing_class(ex, ey, eheading, s[1], s[2]) != FRONT:
                continue
            hits.append((slot, d, espeed - s[4]))
        return hits

    def blindspot_pair(self, slot_a, slot_b, merge_deg, tol_deg, k, dist_th):
        """Converging-pair check against a known merging-road angle.

        Fires only when: the latest carrier lines intersect at P, the
        circular heading difference matches merge_deg within tol_deg, both
        tracks' distances to P are strictly decreasing over their last k+1
        samples, and the smaller latest distance is under dist_th.

        Returns (hit, px, py).
        """
        ha = self._hist[slot_a]
        hb = self._hist[slot_b]
        if len(ha) < k + 1 or len(hb) < k + 1:
            return 0, math.nan, math.nan
        sa = ha[-1]
        sb = hb[-1]
        ok, px, py = line_intersection(sa[1], sa[2], sa[3], sb[1], sb[2], sb[3])
        if not ok:
            return 0, math.nan, math.nan
        if math.fabs(circular_diff_deg(sa[3], sb[3]) - merge_deg) > tol_deg:
            return 0, math.nan, math.nan
        for h in (ha, hb):
            base = len(h) - (k + 1)
            prev = euclid(h[base][1], h[base][2], px, py)
            for i in range(base + 1, len(h)):
                d = euclid(h[i][1], h[i][2], px, py)
                if d >= prev:
                    return 0, math.nan, math.nan
                prev = d
        da = euclid(sa[1], sa[2], px, py)
        db = euclid(sb[1], sb[2], px, py)
        if min(da, db) >= dist_th:
            return 0, math.nan, math.nan
        return 1, px, py

    def approach(self, slot, px, py):
        """Latest distance to (px, py) and whether it decreased over the
        last two samples.  Returns (distance, approaching)."""
        h = self._hist[slot]
        if not h:
            return math.inf, 0
        s = h[-1]
        d = euclid(s[1], s[2], px, py)
        if len(h) < 2:
            return d, 0
        p = h[-2]
        dp = euclid(p[1], p[2], px, py)
        return d, 1 if dp > d else 0

    def scan_within(self, cx, cy, radius, slots):
        """Of ``slots``, those whose latest sample lies strictly inside
        ``radius`` of (cx, cy)."""
        hits = []
        for slot in slots:
            h = self._hist[slot]
            if h and euclid(h[-1][1], h[-1][2], cx, cy) < radius:
                hits.append(slot)
        return hits


def transmit_sweep(sx, sy, xs, ys, active, segs, r_los, r_nlos, falloff,
                   base_loss, latency_ms, jitter_ms, state):
    """Bernoulli delivery sweep for one broadcast.

    xs/ys/active are parallel per-node lists ordered by ascending node id
    (the determinism contract: one draw per active receiver, in that
    order; inactive entries consume nothing).  ``segs`` is a list of
    obstruction segments (ax, ay, bx, by) for line-of-sight testing.

    Returns (new_state, outcomes) where outcomes[i] is -1 for skipped
    entries, -2 for dropped, else the delivery latency in whole ms.
    """
    n = len(xs)
    out = [0] * n
    for i in range(n):
        if not active[i]:
            out[i] = -1
            continue
        d = euclid(sx, sy, xs[i], ys[i])
        los = 1
        for (ax, ay, bx, by) in segs:
            if segments_intersect(sx, sy, xs[i], ys[i], ax, ay, bx, by):
                los = 0
                break
        p = delivery_probability(d, los, r_los, r_nlos, falloff, base_loss)
        state, u = rng_uniform(state)
        if u < p:
            lat = latency_ms
            if jitter_ms > 0.0:
                state, j = rng_uniform(state)
                lat += j * jitter_ms
            out[i] = int(lat)
        else:
            out[i] = -2
    return state, out


def bsm_exchange(stores, xs, ys, active, emit, q, seqs, now_ms, segs,
                 r_los, r_nlos, falloff, base_loss, latency_ms, jitter_ms,
                 state, want_outcomes):
    """One tick's worth of position broadcasts, fully batched.

    All arrays are parallel and ordered by ascending node id; the sender's
    rank doubles as its slot index in every receiver's TrackStore.  For
    each rank i with emit[i] set, the quantized sample q[i] (an 8-tuple
    from bsm_quantize) is ingested into the sender's own store and, after
    a delivery draw against the true positions xs/ys, into each active
    receiver's store.  Draw order is sender rank, then receiver rank.

    Returns (new_state, outcomes, n_rx, n_drop): outcomes is None unless
    want_outcomes, else a flat n*n list (row = sender) of -1 skip, -2
    drop, or delivery latency in whole ms.  The counts cover every draw
    regardless of want_outcomes.
    """
    n = len(xs)
    out = [-1] * (n * n) if want_outcomes else None
    n_rx = 0
    n_drop = 0
    for i in range(n):
        if not emit[i]:
            continue
        qi = q[i]
        stores[i].ingest(i, now_ms, qi[0], qi[1], qi[2], qi[3], qi[4],
                         qi[5], qi[6], qi[7], seqs[i])
        sx = xs[i]
        sy = ys[i]
        for j in range(n):
            if j == i or not active[j]:
                continue
            d = euclid(sx, sy, xs[j], ys[j])
            los = 1
            for (ax, ay, bx, by) in segs:
                if segments_intersect(sx, sy, xs[j], ys[j], ax, ay, bx, by):
                    los = 0
                    break
            p = delivery_probability(d, los, r_los, r_nlos, falloff, base_loss)
            state, u = rng_uniform(state)
            if u < p:
                lat = latency_ms
                if jitter_ms > 0.0:
                    state, jv = rng_uniform(state)
                    lat += jv * jitter_ms
                stores[j].ingest(i, now_ms, qi[0], qi[1], qi[2], qi[3],
                                 qi[4], qi[5], qi[6], qi[7], seqs[i])
                n_rx += 1
                if want_outcomes:
                    out[i * n + j] = int(lat)
            else:
                n_drop += 1
                if want_outcomes:
                    out[i * n + j] = -2
    return state, out, n_rx, n_drop
