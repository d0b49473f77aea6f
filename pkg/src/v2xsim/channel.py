"""Simulated DSRC broadcast medium.

Delivery is a Bernoulli draw per receiver with a probability that is flat
out to a reliable radius (600 m line-of-sight, 350 m non-line-of-sight),
then falls linearly to zero over a configurable band.  A single seeded
PRNG stream, consumed in ascending receiver-id order, makes every run
reproducible.
"""

from dataclasses import dataclass, field

from ._kernels import impl as _k
from .geo import LocalPoint
from .wire import Frame

DEFAULT_SEED = 0x5632D5AC


@dataclass(frozen=True)
class ChannelParams:
    r_reliable_los: float = 600.0   # m, full delivery with line of sight
    r_reliable_nlos: float = 350.0  # m, full delivery without line of sight
    falloff: float = 150.0          # m, linear decay band past the radius
    base_loss: float = 0.0          # loss applied even inside the radius
    latency_ms: float = 2.0
    jitter_ms: float = 0.0          # uniform extra latency, 0 disables
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.r_reliable_nlos > self.r_reliable_los:
            raise ValueError("r_reliable_nlos must be <= r_reliable_los")
        if self.falloff <= 0:
            raise ValueError("falloff must be > 0")
        if not 0.0 <= self.base_loss <= 1.0:
            raise ValueError("base_loss must be in [0, 1]")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency/jitter must be >= 0")
        if not 0 <= self.seed < (1 << 64):
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class Obstruction:
    """Opaque wall segment blocking line of sight."""

    a: LocalPoint
    b: LocalPoint

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("obstruction endpoints must be distinct")


def delivery_probability(d: float, los: bool, p: ChannelParams) -> float:
    """Probability a frame at distance ``d`` is delivered."""
    if d < 0:
        raise ValueError("distance must be >= 0")
    return _k.delivery_probability(d, 1 if los else 0, p.r_reliable_los,
                                   p.r_reliable_nlos, p.falloff, p.base_loss)


def has_los(a: LocalPoint, b: LocalPoint, obstructions) -> bool:
    """True iff the segment a-b crosses no obstruction (touching counts as
    crossing)."""
    for o in obstructions:
        if _k.segments_intersect(a.x, a.y, b.x, b.y, o.a.x, o.a.y, o.b.x, o.b.y):
            return False
    return True


@dataclass
class Channel:
    """The broadcast medium.  Owns the PRNG state; confine to one thread."""

    params: ChannelParams = field(default_factory=ChannelParams)
    obstructions: tuple = ()
    _rng_state: int = field(init=False, repr=False)

    def __post_init__(self):
        self.obstructions = tuple(self.obstructions)
        self._rng_state = self.params.seed & 0xFFFFFFFFFFFFFFFF
        self._segs = [(o.a.x, o.a.y, o.b.x, o.b.y) for o in self.obstructions]

    def reset(self, seed=None):
        self._rng_state = (self.params.seed if seed is None else seed) & 0xFFFFFFFFFFFFFFFF

    def sweep(self, sx, sy, xs, ys, active, now_ms):
        """Low-level broadcast sweep over rank-ordered parallel arrays.

        xs/ys/active must be ordered by ascending node id, with active[i]
        zero for the sender and any node that should not draw.  Returns a
        per-rank list: -1 skipped, -2 dropped, else the absolute delivery
        time in ms.
        """
        p = self.params
        self._rng_state, out = _k.transmit_sweep(
            sx, sy, xs, ys, active, self._segs,
            p.r_reliable_los, p.r_reliable_nlos, p.falloff, p.base_loss,
            p.latency_ms, p.jitter_ms, self._rng_state)
        for i, v in enumerate(out):
            if v >= 0:
                out[i] = now_ms + v
        return out

    def transmit(self, sender_pos: LocalPoint, frame: Frame, receivers, now_ms: int):
        """Decide delivery for one broadcast frame.

        ``receivers`` is an iterable of (NodeId, LocalPoint); entries whose
        id equals the frame sender are skipped without consuming a draw.
        Draws are consumed in ascending receiver-id order.  Returns
        (delivered, dropped): lists of (NodeId, deliver_at_ms, distance_m)
        and (NodeId, distance_m).
        """
        sender = frame.header.sender
        ordered = sorted(
            ((rid, pos) for rid, pos in receivers if rid != sender),
            key=lambda e: e[0].raw,
        )
        xs = [pos.x for _, pos in ordered]
        ys = [pos.y for _, pos in ordered]
        out = self.sweep(sender_pos.x, sender_pos.y, xs, ys, [1] * len(xs), now_ms)
        delivered = []
        dropped = []
        for (rid, pos), v in zip(ordered, out):
            d = _k.euclid(sender_pos.x, sender_pos.y, pos.x, pos.y)
            if v == -2:
                dropped.append((rid, d))
            else:
                delivered.append((rid, v, d))
        return delivered, dropped
