# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Line-for-line mirror of ``_pure.py``: identical expression order and the
same libm calls, so results are bit-identical across backends.  The
module is built with -ffp-contract=off to keep FMA contraction from
reassociating the arithmetic.
"""

from libc.math cimport (atan2, cos, fabs, fmod, llrint, sin, sqrt,
                        INFINITY, NAN, M_PI)
from cpython.mem cimport PyMem_Free, PyMem_Malloc

BACKEND = "compiled"

cdef double _DEG2RAD = M_PI / 180.0
cdef double _INV_2_53 = 1.0 / 9007199254740992.0  # 2^-53

EARTH_RADIUS_M = 6371000.0
cdef double _EARTH_R = 6371000.0

PARALLEL_EPS = 1e-9
COINCIDENT_EPS = 0.01
cdef double _PARALLEL_EPS = 1e-9
cdef double _COINCIDENT_EPS = 0.01

FRONT = 0
RIGHT = 1
BACK = 2
LEFT = 3


cdef inline unsigned long long _rng_next(unsigned long long* state) nogil:
    cdef unsigned long long z
    state[0] = state[0] + 0x9E3779B97F4A7C15ULL
    z = state[0]
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return z


cdef inline double _rng_u01(unsigned long long* state) nogil:
    return <double>(_rng_next(state) >> 11) * _INV_2_53


def rng_uniform(state):
    """Advance a SplitMix64 state; return (new_state, uniform in [0, 1))."""
    cdef unsigned long long s = state
    cdef double u = _rng_u01(&s)
    return s, u


cdef inline double _wrap_deg_signed(double d) nogil:
    cdef double r = fmod(d, 360.0)
    if r <= -180.0:
        r += 360.0
    elif r > 180.0:
        r -= 360.0
    return r


def wrap_deg_signed(double d):
    """Wrap degrees to (-180, 180]."""
    return _wrap_deg_signed(d)


cdef inline double _circular_diff_deg(double a, double b) nogil:
    cdef double d = fmod(fabs(a - b), 360.0)
    if d > 180.0:
        d = 360.0 - d
    return d


def circular_diff_deg(double a, double b):
    """Absolute circular difference of two compass angles, in [0, 180]."""
    return _circular_diff_deg(a, b)


cdef inline double _compass_to_math_rad(double compass_deg) nogil:
    return _wrap_deg_signed(90.0 - compass_deg) * _DEG2RAD


def compass_to_math_rad(double compass_deg):
    """Compass degrees (clockwise from north) -> math radians in (-pi, pi].

    North (0) maps to +pi/2, east (90) to 0.
    """
    return _compass_to_math_rad(compass_deg)


cdef inline double _euclid(double ax, double ay, double bx, double by) nogil:
    cdef double dx = bx - ax
    cdef double dy = by - ay
    return sqrt(dx * dx + dy * dy)


def euclid(double ax, double ay, double bx, double by):
    return _euclid(ax, ay, bx, by)


def project_local(double lat0, double lon0, double lat, double lon):
    """Equirectangular projection into the local frame at (lat0, lon0).

    Returns (x, y) in meters east/north of the origin.
    """
    cdef double x = (lon - lon0) * _DEG2RAD * _EARTH_R * cos(lat0 * _DEG2RAD)
    cdef double y = (lat - lat0) * _DEG2RAD * _EARTH_R
    return x, y


def unproject_local(double lat0, double lon0, double x, double y):
    """Inverse of project_local; returns (lat, lon) degrees."""
    cdef double lat = lat0 + y / (_DEG2RAD * _EARTH_R)
    cdef double lon = lon0 + x / (_DEG2RAD * _EARTH_R * cos(lat0 * _DEG2RAD))
    return lat, lon


cdef inline long long _clamp_i16(double v) nogil:
    cdef long long q = llrint(v * 100.0)
    if q > 32767:
        return 32767
    if q < -32768:
        return -32768
    return q


def bsm_quantize(double x, double y, double heading, double speed, double ax,
                 double ay, double az, double yaw, double lat0, double lon0):
    """Round-trip a local pose through the wire's fixed-point fields.

    Position goes out as 1e-7-degree geographic coordinates, everything
    else as centiunits; the values returned are exactly what a receiver
    reconstructs after decoding.  Returns (qx, qy, qheading, qspeed, qax,
    qay, qaz, qyaw).
    """
    cdef double lat = lat0 + y / (_DEG2RAD * _EARTH_R)
    cdef double lon = lon0 + x / (_DEG2RAD * _EARTH_R * cos(lat0 * _DEG2RAD))
    cdef double qlat = <double>llrint(lat * 1e7) * 1e-7
    cdef double qlon = <double>llrint(lon * 1e7) * 1e-7
    cdef double qx = (qlon - lon0) * _DEG2RAD * _EARTH_R * cos(lat0 * _DEG2RAD)
    cdef double qy = (qlat - lat0) * _DEG2RAD * _EARTH_R
    cdef long long hq = llrint(heading * 100.0) % 36000
    if hq < 0:
        hq += 36000
    cdef double qheading = <double>hq * 0.01
    cdef long long qs = llrint(speed * 100.0)
    if qs < 0:
        qs = 0
    elif qs > 65535:
        qs = 65535
    return (qx, qy, qheading, <double>qs * 0.01,
            <double>_clamp_i16(ax) * 0.01, <double>_clamp_i16(ay) * 0.01,
            <double>_clamp_i16(az) * 0.01, <double>_clamp_i16(yaw) * 0.01)


cdef inline int _line_intersection(double x1, double y1, double h1,
                                   double x2, double y2, double h2,
                                   double* px, double* py) nogil:
    cdef double t1 = _compass_to_math_rad(h1)
    cdef double t2 = _compass_to_math_rad(h2)
    cdef double s1 = sin(t1)
    cdef double c1 = cos(t1)
    cdef double s2 = sin(t2)
    cdef double c2 = cos(t2)
    cdef double det = c1 * s2 - s1 * c2
    cdef double r1, r2
    if fabs(det) < _PARALLEL_EPS:
        px[0] = NAN
        py[0] = NAN
        return 0
    r1 = s1 * x1 - c1 * y1
    r2 = s2 * x2 - c2 * y2
    px[0] = (c1 * r2 - c2 * r1) / det
    py[0] = (s1 * r2 - s2 * r1) / det
    return 1


def line_intersection(double x1, double y1, double h1,
                      double x2, double y2, double h2):
    """Intersect the carrier lines of two headed points.

    Positions are local meters, headings compass degrees.  Each line is put
    in normal form  sin(t)*x - cos(t)*y = sin(t)*x0 - cos(t)*y0  and the
    2x2 system is solved in closed (Cramer/cross-product) form, which stays
    finite at axis-aligned headings where tan or cot blow up.

    Returns (ok, x, y); ok is 0 when |sin(t1 - t2)| < PARALLEL_EPS.
    """
    cdef double px, py
    cdef int ok = _line_intersection(x1, y1, h1, x2, y2, h2, &px, &py)
    return ok, px, py


cdef inline int _bearing_class(double x, double y, double heading,
                               double ox, double oy) nogil:
    cdef double dx = ox - x
    cdef double dy = oy - y
    cdef double bearing, beta, ab
    if sqrt(dx * dx + dy * dy) <= _COINCIDENT_EPS:
        return -1
    bearing = atan2(dx, dy) / _DEG2RAD
    beta = _wrap_deg_signed(bearing - heading)
    ab = fabs(beta)
    if ab <= 45.0:
        return 0
    if ab >= 135.0:
        return 2
    return 1 if beta > 0.0 else 3


def bearing_class(double x, double y, double heading, double ox, double oy):
    """Classify (ox, oy) relative to an observer pose.

    Returns FRONT/RIGHT/BACK/LEFT, or -1 when the points are within
    COINCIDENT_EPS of each other.  Sector boundaries: |beta| <= 45 front,
    |beta| >= 135 back (front/back sectors closed).
    """
    return _bearing_class(x, y, heading, ox, oy)


cdef inline double _delivery_probability(double d, int los, double r_los,
                                         double r_nlos, double falloff,
                                         double base_loss) nogil:
    cdef double r = r_los if los else r_nlos
    if d <= r:
        return 1.0 - base_loss
    if d <= r + falloff:
        return (1.0 - base_loss) * (1.0 - (d - r) / falloff)
    return 0.0


def delivery_probability(double d, int los, double r_los, double r_nlos,
                         double falloff, double base_loss):
    """Distance/LOS delivery probability: flat to the reliable radius, then
    a linear falloff band of width ``falloff``, then zero."""
    return _delivery_probability(d, los, r_los, r_nlos, falloff, base_loss)


cdef inline int _orient(double ax, double ay, double bx, double by,
                        double cx, double cy) nogil:
    cdef double v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


cdef inline int _on_segment(double ax, double ay, double bx, double by,
                            double px, double py) nogil:
    cdef double lo, hi
    lo = ax if ax < bx else bx
    hi = ax if ax > bx else bx
    if not (lo <= px <= hi):
        return 0
    lo = ay if ay < by else by
    hi = ay if ay > by else by
    return lo <= py <= hi


cdef inline int _segments_intersect(double ax, double ay, double bx, double by,
                                    double cx, double cy, double dx,
                                    double dy) nogil:
    cdef int o1 = _orient(ax, ay, bx, by, cx, cy)
    cdef int o2 = _orient(ax, ay, bx, by, dx, dy)
    cdef int o3 = _orient(cx, cy, dx, dy, ax, ay)
    cdef int o4 = _orient(cx, cy, dx, dy, bx, by)
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


def segments_intersect(double ax, double ay, double bx, double by,
                       double cx, double cy, double dx, double dy):
    """Closed segment intersection test (touching endpoints count)."""
    return _segments_intersect(ax, ay, bx, by, cx, cy, dx, dy)


def max_consecutive_drop(speeds):
    """Largest single-step decrease over consecutive speed samples.

    Returns NaN when fewer than two samples are given.
    """
    cdef Py_ssize_t n = len(speeds)
    cdef Py_ssize_t i
    cdef double best, d
    if n < 2:
        return NAN
    best = -INFINITY
    for i in range(n - 1):
        d = <double>speeds[i] - <double>speeds[i + 1]
        if d > best:
            best = d
    return best


# sample layout shared by both backends:
# (t_ms, x, y, heading, speed, accel_x, accel_y, accel_z, yaw_rate)
# t is kept in a separate integer ring so samples round-trip as ints.

cdef class TrackStore:
    """Fixed-slot store of per-sender kinematic history rings.

    One instance per node; slot indices are assigned by the caller (in the
    simulator: the sender's rank in the sorted node-id list).  Timestamps
    must be strictly increasing per slot; sequence numbers are 16-bit and
    accepted only when newer in the wrapping sense.
    """

    cdef readonly int n_slots
    cdef readonly int history
    cdef double* _buf        # n_slots * history * 8 kinematic doubles
    cdef long long* _tbuf    # n_slots * history timestamps
    cdef int* _len
    cdef int* _start
    cdef int* _seq

    def __cinit__(self, int n_slots, int history=32):
        cdef Py_ssize_t i
        if n_slots < 1 or history < 1:
            raise ValueError("n_slots and history must be >= 1")
        self.n_slots = n_slots
        self.history = history
        self._buf = <double*>PyMem_Malloc(n_slots * history * 8 * sizeof(double))
        self._tbuf = <long long*>PyMem_Malloc(n_slots * history * sizeof(long long))
        self._len = <int*>PyMem_Malloc(n_slots * sizeof(int))
        self._start = <int*>PyMem_Malloc(n_slots * sizeof(int))
        self._seq = <int*>PyMem_Malloc(n_slots * sizeof(int))
        if (self._buf == NULL or self._tbuf == NULL or self._len == NULL
                or self._start == NULL or self._seq == NULL):
            raise MemoryError()
        for i in range(n_slots):
            self._len[i] = 0
            self._start[i] = 0
            self._seq[i] = -1

    def __dealloc__(self):
        PyMem_Free(self._buf)
        PyMem_Free(self._tbuf)
        PyMem_Free(self._len)
        PyMem_Free(self._start)
        PyMem_Free(self._seq)

    cdef inline Py_ssize_t _pos(self, int slot, int i) nogil:
        # physical ring index of logical sample i in a slot
        return slot * self.history + ((self._start[slot] + i) % self.history)

    cdef inline long long _newest_t(self, int slot) nogil:
        if self._len[slot] == 0:
            return -1
        return self._tbuf[self._pos(slot, self._len[slot] - 1)]

    cdef int _ingest(self, int slot, long long t, double x, double y,
                     double heading, double speed, double ax, double ay,
                     double az, double yaw, int seq) nogil:
        cdef int last = self._seq[slot]
        cdef int delta
        cdef Py_ssize_t p
        if last >= 0:
            delta = (seq - last) & 0xFFFF
            if delta == 0 or delta > 0x7FFF:
                return 0
        if self._len[slot] > 0 and t <= self._newest_t(slot):
            return 0
        if self._len[slot] == self.history:
            self._start[slot] = (self._start[slot] + 1) % self.history
            self._len[slot] -= 1
        p = self._pos(slot, self._len[slot])
        self._tbuf[p] = t
        p *= 8
        self._buf[p] = x
        self._buf[p + 1] = y
        self._buf[p + 2] = heading
        self._buf[p + 3] = speed
        self._buf[p + 4] = ax
        self._buf[p + 5] = ay
        self._buf[p + 6] = az
        self._buf[p + 7] = yaw
        self._len[slot] += 1
        self._seq[slot] = seq
        return 1

    def ingest(self, int slot, long long t, double x, double y, double heading,
               double speed, double ax, double ay, double az, double yaw,
               int seq):
        return self._ingest(slot, t, x, y, heading, speed, ax, ay, az, yaw,
                            seq)

    def length(self, int slot):
        return self._len[slot]

    def newest_time(self, int slot):
        return self._newest_t(slot)

    def last_seq(self, int slot):
        return self._seq[slot]

    cdef tuple _sample_tuple(self, int slot, int i):
        cdef Py_ssize_t p = self._pos(slot, i)
        cdef long long t = self._tbuf[p]
        p *= 8
        return (t, self._buf[p], self._buf[p + 1], self._buf[p + 2],
                self._buf[p + 3], self._buf[p + 4], self._buf[p + 5],
                self._buf[p + 6], self._buf[p + 7])

    def latest(self, int slot):
        if self._len[slot] == 0:
            return None
        return self._sample_tuple(slot, self._len[slot] - 1)

    def sample(self, int slot, int i):
        if i < 0:
            i += self._len[slot]
        if i < 0 or i >= self._len[slot]:
            raise IndexError("sample index out of range")
        return self._sample_tuple(slot, i)

    def clear(self, int slot):
        self._len[slot] = 0
        self._start[slot] = 0
        self._seq[slot] = -1

    def prune(self, long long cutoff):
        """Clear every slot whose newest sample is older than ``cutoff``;
        returns the cleared slot indices."""
        cdef list cleared = []
        cdef int slot
        for slot in range(self.n_slots):
            if self._len[slot] > 0 and self._newest_t(slot) < cutoff:
                self.clear(slot)
                cleared.append(slot)
        return cleared

    def occupied(self, long long since=-1):
        """Slots holding at least one sample newer than ``since``."""
        cdef list out = []
        cdef int s
        for s in range(self.n_slots):
            if self._len[s] > 0 and self._newest_t(s) > since:
                out.append(s)
        return out

    def sweep_brake(self, slots, int window, double drop_th):
        """Slots whose last ``window`` speeds contain a consecutive drop
        strictly greater than ``drop_th``; partial windows never fire."""
        cdef list hits = []
        cdef int slot, i, base
        cdef double best, d
        for slot in slots:
            if self._len[slot] < window:
                continue
            best = -INFINITY
            base = self._len[slot] - window
            for i in range(window - 1):
                d = (self._buf[self._pos(slot, base + i) * 8 + 3]
                     - self._buf[self._pos(slot, base + i + 1) * 8 + 3])
                if d > best:
                    best = d
            if best > drop_th:
                hits.append(slot)
        return hits

    def sweep_abnormal(self, slots, int persist, double yaw_th,
                       double speed_th, double lat_th):
        """Slots whose last ``persist`` samples all satisfy
        (|yaw| > yaw_th and speed > speed_th) or |accel_y| > lat_th."""
        cdef list hits = []
        cdef int slot, i
        cdef Py_ssize_t p
        cdef bint ok
        for slot in slots:
            if self._len[slot] < persist:
                continue
            ok = True
            for i in range(self._len[slot] - persist, self._len[slot]):
                p = self._pos(slot, i) * 8
                if not ((fabs(self._buf[p + 7]) > yaw_th
                         and self._buf[p + 3] > speed_th)
                        or fabs(self._buf[p + 5]) > lat_th):
                    ok = False
                    break
            if ok:
                hits.append(slot)
        return hits

    def giveway_scan(self, double ex, double ey, double eheading,
                     double espeed, slots, double dist_th):
        """Front-sector neighbors strictly closer than ``dist_th``.

        Returns (slot, distance, closing_speed) triples; closing speed is
        observer speed minus neighbor speed.
        """
        cdef list hits = []
        cdef int slot
        cdef Py_ssize_t p
        cdef double d
        for slot in slots:
            if self._len[slot] == 0:
                continue
            p = self._pos(slot, self._len[slot] - 1) * 8
            d = _euclid(ex, ey, self._buf[p], self._buf[p + 1])
            if d >= dist_th:
                continue
            if _bearing_class(ex, ey, eheading,
                              self._buf[p], self._buf[p + 1]) != 0:
                continue
            hits.append((slot, d, espeed - self._buf[p + 3]))
        return hits

    def blindspot_pair(self, int slot_a, int slot_b, double merge_deg,
                       double tol_deg, int k, double dist_th):
        """Converging-pair check against a known merging-road angle.

        Fires only when: the latest carrier lines intersect at P, the
        circular heading difference matches merge_deg within tol_deg, both
        tracks' distances to P are strictly decreasing over their last k+1
        samples, and the smaller latest distance is under dist_th.

        Returns (hit, px, py).
        """
        cdef Py_ssize_t pa, pb, p
        cdef double px, py, prev, d, da, db, mn
        cdef int side, i, slot, base
        if self._len[slot_a] < k + 1 or self._len[slot_b] < k + 1:
            return 0, NAN, NAN
        pa = self._pos(slot_a, self._len[slot_a] - 1) * 8
        pb = self._pos(slot_b, self._len[slot_b] - 1) * 8
        if not _line_intersection(self._buf[pa], self._buf[pa + 1],
                                  self._buf[pa + 2], self._buf[pb],
                                  self._buf[pb + 1], self._buf[pb + 2],
                                  &px, &py):
            return 0, NAN, NAN
        if fabs(_circular_diff_deg(self._buf[pa + 2], self._buf[pb + 2])
                - merge_deg) > tol_deg:
            return 0, NAN, NAN
        for side in range(2):
            slot = slot_a if side == 0 else slot_b
            base = self._len[slot] - (k + 1)
            p = self._pos(slot, base) * 8
            prev = _euclid(self._buf[p], self._buf[p + 1], px, py)
            for i in range(base + 1, self._len[slot]):
                p = self._pos(slot, i) * 8
                d = _euclid(self._buf[p], self._buf[p + 1], px, py)
                if d >= prev:
                    return 0, NAN, NAN
                prev = d
        da = _euclid(self._buf[pa], self._buf[pa + 1], px, py)
        db = _euclid(self._buf[pb], self._buf[pb + 1], px, py)
        mn = da if da < db else db
        if mn >= dist_th:
            return 0, NAN, NAN
        return 1, px, py

    def approach(self, int slot, double px, double py):
        """Latest distance to (px, py) and whether it decreased over the
        last two samples.  Returns (distance, approaching)."""
        cdef Py_ssize_t p, q
        cdef double d, dp
        if self._len[slot] == 0:
            return INFINITY, 0
        p = self._pos(slot, self._len[slot] - 1) * 8
        d = _euclid(self._buf[p], self._buf[p + 1], px, py)
        if self._len[slot] < 2:
            return d, 0
        q = self._pos(slot, self._len[slot] - 2) * 8
        dp = _euclid(self._buf[q], self._buf[q + 1], px, py)
        return d, 1 if dp > d else 0

    def scan_within(self, double cx, double cy, double radius, slots):
        """Of ``slots``, those whose latest sample lies strictly inside
        ``radius`` of (cx, cy)."""
        cdef list hits = []
        cdef int slot
        cdef Py_ssize_t p
        for slot in slots:
            if self._len[slot] == 0:
                continue
            p = self._pos(slot, self._len[slot] - 1) * 8
            if _euclid(self._buf[p], self._buf[p + 1], cx, cy) < radius:
                hits.append(slot)
        return hits


cdef double* _copy_segs(segs, Py_ssize_t* n_out) except? NULL:
    cdef Py_ssize_t ns = len(segs)
    cdef Py_ssize_t i
    cdef double* buf
    n_out[0] = ns
    if ns == 0:
        return NULL
    buf = <double*>PyMem_Malloc(ns * 4 * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    for i in range(ns):
        s = segs[i]
        buf[i * 4] = s[0]
        buf[i * 4 + 1] = s[1]
        buf[i * 4 + 2] = s[2]
        buf[i * 4 + 3] = s[3]
    return buf


cdef inline int _los(double sx, double sy, double rx, double ry,
                     double* segs, Py_ssize_t nsegs) nogil:
    cdef Py_ssize_t k
    for k in range(nsegs):
        if _segments_intersect(sx, sy, rx, ry, segs[k * 4], segs[k * 4 + 1],
                               segs[k * 4 + 2], segs[k * 4 + 3]):
            return 0
    return 1


def transmit_sweep(double sx, double sy, xs, ys, active, segs, double r_los,
                   double r_nlos, double falloff, double base_loss,
                   double latency_ms, double jitter_ms, state):
    """Bernoulli delivery sweep for one broadcast.

    xs/ys/active are parallel per-node lists ordered by ascending node id
    (the determinism contract: one draw per active receiver, in that
    order; inactive entries consume nothing).  ``segs`` is a list of
    obstruction segments (ax, ay, bx, by) for line-of-sight testing.

    Returns (new_state, outcomes) where outcomes[i] is -1 for skipped
    entries, -2 for dropped, else the delivery latency in whole ms.
    """
    cdef unsigned long long st = state
    cdef Py_ssize_t n = len(xs)
    cdef Py_ssize_t i, nsegs
    cdef double d, p, u, lat
    cdef double* seg_buf = _copy_segs(segs, &nsegs)
    cdef list out = [0] * n
    try:
        for i in range(n):
            if not active[i]:
                out[i] = -1
                continue
            d = _euclid(sx, sy, <double>xs[i], <double>ys[i])
            p = _delivery_probability(
                d, _los(sx, sy, <double>xs[i], <double>ys[i], seg_buf, nsegs),
                r_los, r_nlos, falloff, base_loss)
            u = _rng_u01(&st)
            if u < p:
                lat = latency_ms
                if jitter_ms > 0.0:
                    lat += _rng_u01(&st) * jitter_ms
                out[i] = <int>lat
            else:
                out[i] = -2
        return st, out
    finally:
        PyMem_Free(seg_buf)


def bsm_exchange(stores, xs, ys, active, emit, q, seqs, long long now_ms,
                 segs, double r_los, double r_nlos, double falloff,
                 double base_loss, double latency_ms, double jitter_ms,
                 state, int want_outcomes):
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
    cdef unsigned long long st = state
    cdef Py_ssize_t n = len(xs)
    cdef Py_ssize_t i, j, nsegs
    cdef double sx, sy, d, p, u, lat
    cdef double qx, qy, qh, qs, qax, qay, qaz, qyaw
    cdef int seq_i
    cdef double* seg_buf = NULL
    cdef double* cx = NULL
    cdef double* cy = NULL
    cdef char* cact = NULL
    cdef int* iout = NULL
    cdef TrackStore recv
    cdef list out_list
    cdef long long n_rx = 0
    cdef long long n_drop = 0
    try:
        seg_buf = _copy_segs(segs, &nsegs)
        cx = <double*>PyMem_Malloc(n * sizeof(double))
        cy = <double*>PyMem_Malloc(n * sizeof(double))
        cact = <char*>PyMem_Malloc(n * sizeof(char))
        if cx == NULL or cy == NULL or cact == NULL:
            raise MemoryError()
        if want_outcomes:
            iout = <int*>PyMem_Malloc(n * n * sizeof(int))
            if iout == NULL:
                raise MemoryError()
            for i in range(n * n):
                iout[i] = -1
        for i in range(n):
            cx[i] = <double>xs[i]
            cy[i] = <double>ys[i]
            cact[i] = 1 if active[i] else 0

        for i in range(n):
            if not emit[i]:
                continue
            qi = q[i]
            qx = <double>qi[0]
            qy = <double>qi[1]
            qh = <double>qi[2]
            qs = <double>qi[3]
            qax = <double>qi[4]
            qay = <double>qi[5]
            qaz = <double>qi[6]
            qyaw = <double>qi[7]
            seq_i = seqs[i]
            (<TrackStore>stores[i])._ingest(<int>i, now_ms, qx, qy, qh, qs,
                                            qax, qay, qaz, qyaw, seq_i)
            sx = cx[i]
            sy = cy[i]
            for j in range(n):
                if j == i or not cact[j]:
                    continue
                d = _euclid(sx, sy, cx[j], cy[j])
                p = _delivery_probability(
                    d, _los(sx, sy, cx[j], cy[j], seg_buf, nsegs),
                    r_los, r_nlos, falloff, base_loss)
                u = _rng_u01(&st)
                if u < p:
                    lat = latency_ms
                    if jitter_ms > 0.0:
                        lat += _rng_u01(&st) * jitter_ms
                    recv = <TrackStore>stores[j]
                    recv._ingest(<int>i, now_ms, qx, qy, qh, qs, qax, qay,
                                 qaz, qyaw, seq_i)
                    n_rx += 1
                    if want_outcomes:
                        iout[i * n + j] = <int>lat
                else:
                    n_drop += 1
                    if want_outcomes:
                        iout[i * n + j] = -2

        if want_outcomes:
            out_list = [0] * (n * n)
            for i in range(n * n):
                out_list[i] = iout[i]
            return st, out_list, n_rx, n_drop
        return st, None, n_rx, n_drop
    finally:
        PyMem_Free(seg_buf)
        PyMem_Free(cx)
        PyMem_Free(cy)
        PyMem_Free(cact)
        PyMem_Free(iout)
