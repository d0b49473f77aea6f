"""Link-quality and alert-latency summaries over a finished event log.

Loss is measured the way the field trials did: group every frame
outcome by (sender, receiver) pair, bucket by transmit distance in
fixed-width bins, and report sent/received counts with percentage loss
per bucket.  Alert latency pairs each ALERT_RAISED with the matching
ALERT_RECEIVED entries that follow it.
"""

import io
import statistics
from dataclasses import dataclass, field

BIN_WIDTH_M = 50.0

LOSS_HEADER = "sender,receiver,bin_lo_m,bin_hi_m,sent,received,loss_pct"
ALERTS_HEADER = "kind,count,median_latency_ms"


@dataclass
class MetricsReport:
    """Tabular rollup of one run."""

    loss_rows: list = field(default_factory=list)
    alert_rows: list = field(default_factory=list)

    @classmethod
    def from_records(cls, records) -> "MetricsReport":
        pair_bins = {}
        raised_at = {}
        latencies = {}

        for r in records:
            kind = r["kind"]
            d = r["detail"]
            if kind in ("RX", "DROP"):
                key = (d["from"], r["node"], int(d["d"] // BIN_WIDTH_M))
                sent, recv = pair_bins.get(key, (0, 0))
                pair_bins[key] = (sent + 1, recv + (1 if kind == "RX" else 0))
            elif kind == "ALERT_RAISED":
                raised_at[(d["kind"], d.get("subject"))] = r["t"]
            elif kind == "ALERT_RECEIVED":
                akey = (d["kind"], d.get("subject"))
                t0 = raised_at.get(akey)
                if t0 is not None and r["t"] >= t0:
                    latencies.setdefault(d["kind"], []).append(r["t"] - t0)
            elif kind == "ADVISORY":
                raised_at[(d["kind"], None)] = r["t"]

        loss_rows = []
        for (sender, receiver, b) in sorted(pair_bins):
            sent, recv = pair_bins[(sender, receiver, b)]
            loss = 100.0 * (sent - recv) / sent
            loss_rows.append((sender, receiver, b * BIN_WIDTH_M,
                              (b + 1) * BIN_WIDTH_M, sent, recv, loss))

        alert_rows = []
        for kind in sorted(latencies):
            vals = latencies[kind]
            alert_rows.append((kind, len(vals), statistics.median(vals)))

        return cls(loss_rows=loss_rows, alert_rows=alert_rows)

    def to_loss_csv(self) -> str:
        out = io.StringIO()
        out.write(LOSS_HEADER + "\n")
        for s, r, lo, hi, sent, recv, loss in self.loss_rows:
            out.write(f"{s},{r},{lo:.0f},{hi:.0f},{sent},{recv},{loss:.2f}\n")
        return out.getvalue()

    def to_alerts_csv(self) -> str:
        out = io.StringIO()
        out.write(ALERTS_HEADER + "\n")
        for kind, count, med in self.alert_rows:
            out.write(f"{kind},{count},{med:.1f}\n")
        return out.getvalue()
