"""Metrics rollup tests over synthetic and real event logs."""

import pytest

from v2xsim.metrics import (
    ALERTS_HEADER,
    BIN_WIDTH_M,
    LOSS_HEADER,
    MetricsReport,
)
from v2xsim.scenario import Scenario
from v2xsim.sim import run

from conftest import scenario_path


def rx(t, node, frm, d):
    return {"t": t, "kind": "RX", "node": node, "seq": 0,
            "detail": {"msg": "BSM", "from": frm, "d": d}}


def drop(t, node, frm, d):
    return {"t": t, "kind": "DROP", "node": node, "seq": 0,
            "detail": {"msg": "BSM", "from": frm, "d": d}}


def raised(t, kind, subject, node="rsu:1"):
    return {"t": t, "kind": "ALERT_RAISED", "node": node, "seq": 0,
            "detail": {"kind": kind, "subject": subject}}


def received(t, kind, subject, node="obu:1"):
    return {"t": t, "kind": "ALERT_RECEIVED", "node": node, "seq": 0,
            "detail": {"kind": kind, "subject": subject, "from": "rsu:1"}}


class TestLossBinning:
    def test_counts_per_pair_and_bin(self):
        records = [
            rx(0, "obu:2", "obu:1", 10.0),
            rx(100, "obu:2", "obu:1", 20.0),
            drop(200, "obu:2", "obu:1", 30.0),
            rx(300, "obu:2", "obu:1", 60.0),
        ]
        rep = MetricsReport.from_records(records)
        assert rep.loss_rows == [
            ("obu:1", "obu:2", 0.0, 50.0, 3, 2, pytest.approx(100.0 / 3)),
            ("obu:1", "obu:2", 50.0, 100.0, 1, 1, 0.0),
        ]

    def test_bin_edges(self):
        records = [rx(0, "a", "b", 49.999), rx(100, "a", "b", 50.0)]
        rep = MetricsReport.from_records(records)
        assert len(rep.loss_rows) == 2
        assert rep.loss_rows[0][2] == 0.0
        assert rep.loss_rows[1][2] == BIN_WIDTH_M

    def test_pairs_kept_separate(self):
        records = [rx(0, "obu:2", "obu:1", 10.0),
                   drop(0, "obu:3", "obu:1", 10.0)]
        rep = MetricsReport.from_records(records)
        assert len(rep.loss_rows) == 2
        by_recv = {row[1]: row for row in rep.loss_rows}
        assert by_recv["obu:2"][6] == 0.0
        assert by_recv["obu:3"][6] == 100.0

    def test_csv_format(self):
        records = [rx(0, "obu:2", "obu:1", 10.0),
                   drop(100, "obu:2", "obu:1", 12.0)]
        csv = MetricsReport.from_records(records).to_loss_csv()
        lines = csv.strip().split("\n")
        assert lines[0] == LOSS_HEADER
        assert lines[1] == "obu:1,obu:2,0,50,2,1,50.00"

    def test_empty_log(self):
        rep = MetricsReport.from_records([])
        assert rep.loss_rows == []
        assert rep.alert_rows == []
        assert rep.to_loss_csv() == LOSS_HEADER + "\n"
        assert rep.to_alerts_csv() == ALERTS_HEADER + "\n"


class TestAlertLatency:
    def test_median_over_receivers(self):
        records = [
            raised(1000, "EV_APPROACHING", "ev:1"),
            received(1002, "EV_APPROACHING", "ev:1", node="obu:1"),
            received(1004, "EV_APPROACHING", "ev:1", node="obu:2"),
            received(1010, "EV_APPROACHING", "ev:1", node="obu:3"),
        ]
        rep = MetricsReport.from_records(records)
        assert rep.alert_rows == [("EV_APPROACHING", 3, 4)]

    def test_rebroadcast_resets_the_clock(self):
        records = [
            raised(1000, "EV_APPROACHING", "ev:1"),
            received(1002, "EV_APPROACHING", "ev:1"),
            raised(3000, "EV_APPROACHING", "ev:1"),
            received(3002, "EV_APPROACHING", "ev:1", node="obu:2"),
        ]
        rep = MetricsReport.from_records(records)
        assert rep.alert_rows == [("EV_APPROACHING", 2, 2)]

    def test_unmatched_receive_ignored(self):
        records = [received(1002, "EV_APPROACHING", "ev:1")]
        assert MetricsReport.from_records(records).alert_rows == []

    def test_kinds_sorted_in_csv(self):
        records = [
            raised(0, "EV_GIVE_WAY", "obu:1"),
            received(2, "EV_GIVE_WAY", "obu:1"),
            raised(0, "EMERGENCY_BRAKE", "obu:2"),
            received(4, "EMERGENCY_BRAKE", "obu:2"),
        ]
        csv = MetricsReport.from_records(records).to_alerts_csv()
        lines = csv.strip().split("\n")
        assert lines[0] == ALERTS_HEADER
        assert lines[1].startswith("EMERGENCY_BRAKE,")
        assert lines[2].startswith("EV_GIVE_WAY,")
        assert lines[1] == "EMERGENCY_BRAKE,1,4.0"


class TestOnRealRun:
    def test_corridor_report_consistency(self):
        out = run(Scenario.from_file(scenario_path("corridor")))
        rep = MetricsReport.from_records(out.records)
        total_sent = sum(row[4] for row in rep.loss_rows)
        total_recv = sum(row[5] for row in rep.loss_rows)
        assert total_sent == out.counters["rx"] + out.counters["drop"]
        assert total_recv == out.counters["rx"]
        assert any(kind == "EV_APPROACHING" for kind, _, _ in rep.alert_rows)
        for _, _, lo, hi, sent, recv, loss in rep.loss_rows:
            assert hi == lo + BIN_WIDTH_M
            assert 0 <= recv <= sent
            assert loss == pytest.approx(100.0 * (sent - recv) / sent)

    def test_lossy_corridor_has_falloff_band_losses(self):
        out = run(Scenario.from_file(scenario_path("corridor-lossy")))
        rep = MetricsReport.from_records(out.records)
        in_band = [row for row in rep.loss_rows if row[2] >= 600.0]
        assert in_band
        assert any(row[6] > 0.0 for row in in_band)
