"""Region monitoring service.

RegionView is the in-memory model: latest report plus bounded history per
vehicle, roadside-unit presence, active alerts with refresh-based expiry,
and the advisory lifecycle (candidate -> pending -> delivered -> expired,
never backward).  It is plain Python with a lock, usable in-process by
the simulator or wrapped by the HTTP app from create_app().

Time inside the view is report time (milliseconds).  The view clock is
the newest report timestamp seen, advanced by wall clock between
ingests, so alert expiry behaves the same whether reports arrive at
simulation speed or paced to real time.
"""

import json
import threading
import time
from collections import deque

from .wire import AlertKind, NodeId

HISTORY_CAP = 120
ALERT_TTL_MS = 5000
ADVISORY_TTL_MIN_MS = 1000
ADVISORY_TTL_MAX_MS = 600000

_REQUIRED_FIELDS = ("rsu", "vehicle", "lat", "lon", "speed", "heading",
                    "timestamp_ms")

_CRITICAL_KINDS = frozenset({
    AlertKind.EMERGENCY_BRAKE.name,
    AlertKind.VRU_ON_PATH.name,
    AlertKind.BLIND_SPOT_COLLISION.name,
})

_ADVISORY_KINDS = (AlertKind.ROUTE_BLOCKED.name, AlertKind.ROUTE_CLEAR.name)


class UnknownRsuError(KeyError):
    """Advisory targeted an rsu the view has never heard from."""


class RegionView:
    def __init__(self, retention: int = HISTORY_CAP, auto_confirm: bool = False,
                 persist_path: str | None = None):
        if retention < 1:
            raise ValueError("retention must be >= 1")
        self.retention = retention
        self.auto_confirm = auto_confirm
        self._lock = threading.RLock()
        self._vehicles = {}   # label -> {latest, history deque, keys set}
        self._rsus = {}       # label -> {lat, lon, last_seen_ms}
        self._alerts = {}     # (kind, vehicle) -> {..., first/last_seen}
        self._advisories = {}  # id -> advisory dict
        self._next_advisory_id = 1
        self._clock_ms = 0
        self._wall = time.monotonic()
        self._subscribers = []
        self.rejected = 0
        self.duplicates = 0
        self._persist_path = persist_path
        self._persist_fh = None
        if persist_path:
            self._restore(persist_path)
            self._persist_fh = open(persist_path, "a", encoding="utf-8")

    # -- clock ------------------------------------------------------------

    def now_ms(self) -> int:
        with self._lock:
            elapsed = (time.monotonic() - self._wall) * 1000.0
            return self._clock_ms + int(elapsed)

    def _advance_clock(self, t_ms: int) -> None:
        now = self.now_ms()
        self._clock_ms = max(now, t_ms)
        self._wall = time.monotonic()

    # -- persistence --------------------------------------------------------

    def _persist(self, op: dict) -> None:
        if self._persist_fh is not None:
            self._persist_fh.write(json.dumps(op, separators=(",", ":")) + "\n")
            self._persist_fh.flush()

    def _restore(self, path: str) -> None:
        try:
            fh = open(path, encoding="utf-8")
        except FileNotFoundError:
            return
        with fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                op = json.loads(line)
                if op["op"] == "report":
                    self._ingest_locked(op["d"], persist=False)
                elif op["op"] == "advisory":
                    d = op["d"]
                    self._advisories[d["id"]] = d
                    self._next_advisory_id = max(self._next_advisory_id,
                                                 d["id"] + 1)
                elif op["op"] == "status":
                    adv = self._advisories.get(op["id"])
                    if adv is not None:
                        adv["status"] = op["status"]

    def close(self) -> None:
        if self._persist_fh is not None:
            self._persist_fh.close()
            self._persist_fh = None

    # -- deltas -------------------------------------------------------------

    def subscribe(self, maxlen: int = 1000):
        q = deque(maxlen=maxlen)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q) -> None:
        with self._lock:
            try:
                self._subscribers.remove(q)
            except ValueError:
                pass

    def _publish(self, delta: dict) -> None:
        for q in self._subscribers:
            q.append(delta)

    # -- ingestion ----------------------------------------------------------

    def ingest_report(self, d: dict):
        """Apply one report; returns (accepted, reason-or-None)."""
        with self._lock:
            return self._ingest_locked(d, persist=True)

    def _ingest_locked(self, d, persist):
        if not isinstance(d, dict):
            self.rejected += 1
            return False, "not an object"
        for f in _REQUIRED_FIELDS:
            if f not in d:
                self.rejected += 1
                return False, f"missing required field: {f}"
        try:
            rsu = NodeId.parse(d["rsu"])
            vehicle = NodeId.parse(d["vehicle"])
        except (ValueError, KeyError, TypeError):
            self.rejected += 1
            return False, "unparseable rsu or vehicle id"
        if not rsu.is_rsu:
            self.rejected += 1
            return False, "rsu field is not an rsu id"
        for f in ("lat", "lon", "speed", "heading"):
            if not isinstance(d[f], (int, float)) or isinstance(d[f], bool):
                self.rejected += 1
                return False, f"field {f} is not a number"
        if not isinstance(d["timestamp_ms"], int):
            self.rejected += 1
            return False, "timestamp_ms is not an integer"

        t = d["timestamp_ms"]
        vlabel = vehicle.label()
        rec = {
            "rsu": rsu.label(),
            "vehicle": vlabel,
            "emergency": bool(d.get("emergency", vehicle.emergency)),
            "lat": d["lat"],
            "lon": d["lon"],
            "speed": d["speed"],
            "heading": d["heading"],
            "timestamp_ms": t,
            "alerts": [a for a in d.get("alerts", ())
                       if isinstance(a, str) and a in AlertKind.__members__],
        }

        entry = self._vehicles.get(vlabel)
        if entry is None:
            entry = {"latest": None, "history": deque(), "keys": set()}
            self._vehicles[vlabel] = entry
        key = (rec["rsu"], t)
        if key in entry["keys"]:
            self.duplicates += 1
            return True, "duplicate"

        entry["history"].append(rec)
        entry["keys"].add(key)
        while len(entry["history"]) > self.retention:
            old = entry["history"].popleft()
            entry["keys"].discard((old["rsu"], old["timestamp_ms"]))
        if entry["latest"] is None or t >= entry["latest"]["timestamp_ms"]:
            entry["latest"] = rec

        rstate = self._rsus.get(rec["rsu"])
        if rstate is None:
            rstate = {"id": rec["rsu"], "lat": None, "lon": None,
                      "last_seen_ms": t}
            self._rsus[rec["rsu"]] = rstate
        rstate["last_seen_ms"] = max(rstate["last_seen_ms"], t)
        if isinstance(d.get("rsu_lat"), (int, float)):
            rstate["lat"] = d["rsu_lat"]
            rstate["lon"] = d.get("rsu_lon")

        self._advance_clock(t)
        for kind in rec["alerts"]:
            akey = (kind, vlabel)
            a = self._alerts.get(akey)
            if a is None or t - a["last_seen_ms"] > ALERT_TTL_MS:
                a = {"kind": kind, "subject": vlabel, "rsu": rec["rsu"],
                     "severity": ("CRITICAL" if kind in _CRITICAL_KINDS
                                  else "WARN"),
                     "first_seen_ms": t, "last_seen_ms": t}
                self._alerts[akey] = a
            else:
                a["last_seen_ms"] = max(a["last_seen_ms"], t)
                a["rsu"] = rec["rsu"]
            if kind == AlertKind.EMERGENCY_BRAKE.name:
                self._auto_candidate(rec["rsu"])

        if persist:
            self._persist({"op": "report", "d": rec})
        self._publish({"type": "report", "d": rec})
        return True, None

    def ingest_lines(self, text: str):
        """Apply a newline-delimited batch; returns per-batch counts."""
        accepted = rejected = 0
        errors = []
        for i, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                with self._lock:
                    self.rejected += 1
                rejected += 1
                errors.append(f"line {i}: malformed JSON: {e.msg}")
                continue
            ok, reason = self.ingest_report(d)
            if ok:
                accepted += 1
            else:
                rejected += 1
                errors.append(f"line {i}: {reason}")
        return {"accepted": accepted, "rejected": rejected, "errors": errors}

    # -- advisories -----------------------------------------------------------

    def _auto_candidate(self, rsu_label: str) -> None:
        # one live blockage advisory per rsu is enough
        for adv in self._advisories.values():
            if (adv["rsu"] == rsu_label
                    and adv["kind"] == AlertKind.ROUTE_BLOCKED.name
                    and adv["status"] in ("candidate", "pending", "delivered")
                    and adv["expires_at_ms"] > self.now_ms()):
                return
        status = "pending" if self.auto_confirm else "candidate"
        self._new_advisory(AlertKind.ROUTE_BLOCKED.name, rsu_label,
                           60000, None, None, "auto", status)

    def _new_advisory(self, kind, rsu_label, ttl_ms, lat, lon, operator,
                      status):
        now = self.now_ms()
        adv = {
            "id": self._next_advisory_id,
            "kind": kind,
            "rsu": rsu_label,
            "ttl_ms": ttl_ms,
            "lat": lat,
            "lon": lon,
            "operator": operator,
            "created_ms": now,
            "expires_at_ms": now + ttl_ms,
            "status": status,
        }
        self._next_advisory_id += 1
        self._advisories[adv["id"]] = adv
        self._persist({"op": "advisory", "d": adv})
        self._publish({"type": "advisory", "d": dict(adv)})
        return adv["id"]

    def issue_advisory(self, kind: str, rsu: str, ttl_ms: int,
                       lat: float | None = None, lon: float | None = None,
                       operator: str = "") -> int:
        """Operator command; returns the advisory id."""
        if kind not in _ADVISORY_KINDS:
            raise ValueError(f"kind must be one of {_ADVISORY_KINDS}")
        if not isinstance(ttl_ms, int) or not (
                ADVISORY_TTL_MIN_MS <= ttl_ms <= ADVISORY_TTL_MAX_MS):
            raise ValueError(
                f"ttl_ms must be an integer in "
                f"[{ADVISORY_TTL_MIN_MS}, {ADVISORY_TTL_MAX_MS}]")
        with self._lock:
            if rsu not in self._rsus:
                raise UnknownRsuError(rsu)
            return self._new_advisory(kind, rsu, ttl_ms, lat, lon, operator,
                                      "pending")

    def _set_status(self, advisory_id: int, status: str) -> None:
        self._persist({"op": "status", "id": advisory_id, "status": status})
        adv = self._advisories[advisory_id]
        adv["status"] = status
        self._publish({"type": "advisory", "d": dict(adv)})

    def confirm_advisory(self, advisory_id: int) -> None:
        """Promote an auto-candidate so the target rsu will pick it up."""
        with self._lock:
            adv = self._advisories.get(advisory_id)
            if adv is None:
                raise KeyError(advisory_id)
            if adv["status"] == "candidate":
                self._set_status(advisory_id, "pending")

    def mark_delivered(self, advisory_id: int) -> None:
        with self._lock:
            adv = self._advisories.get(advisory_id)
            if adv is None:
                raise KeyError(advisory_id)
            if adv["status"] == "pending":
                self._set_status(advisory_id, "delivered")

    def _effective_status(self, adv, now):
        if adv["status"] in ("pending", "delivered") and now >= adv["expires_at_ms"]:
            return "expired"
        return adv["status"]

    def pending_advisories(self):
        """Advisories awaiting pickup, shaped for the delivery poll."""
        with self._lock:
            now = self.now_ms()
            out = []
            for adv in self._advisories.values():
                if self._effective_status(adv, now) != "pending":
                    continue
                out.append({
                    "id": adv["id"],
                    "kind": adv["kind"],
                    "rsu": adv["rsu"],
                    "ttl_ms": max(1, adv["expires_at_ms"] - now),
                    "lat": adv["lat"],
                    "lon": adv["lon"],
                })
            out.sort(key=lambda a: a["id"])
            return out

    # -- snapshots ------------------------------------------------------------

    def vehicles_snapshot(self):
        with self._lock:
            now = self.now_ms()
            rows = []
            for label in sorted(self._vehicles):
                e = self._vehicles[label]
                latest = e["latest"]
                if latest is None:
                    continue
                row = dict(latest)
                row["age_ms"] = max(0, now - latest["timestamp_ms"])
                row["history_len"] = len(e["history"])
                rows.append(row)
            return {"now_ms": now, "vehicles": rows}

    def vehicle_history(self, label: str):
        with self._lock:
            e = self._vehicles.get(label)
            if e is None:
                return None
            return [dict(r) for r in e["history"]]

    def rsus_snapshot(self):
        with self._lock:
            now = self.now_ms()
            rows = []
            for label in sorted(self._rsus):
                r = dict(self._rsus[label])
                r["age_ms"] = max(0, now - r["last_seen_ms"])
                rows.append(r)
            return {"now_ms": now, "rsus": rows}

    def alerts_snapshot(self, kind: str | None = None):
        with self._lock:
            now = self.now_ms()
            rows = []
            for a in self._alerts.values():
                if now - a["last_seen_ms"] > ALERT_TTL_MS:
                    continue
                if kind is not None and a["kind"] != kind:
                    continue
                rows.append(dict(a))
            rows.sort(key=lambda a: (a["kind"], a["subject"]))
            return {"now_ms": now, "alerts": rows}

    def advisories_snapshot(self, status: str | None = None):
        with self._lock:
            now = self.now_ms()
            rows = []
            for adv in self._advisories.values():
                row = dict(adv)
                row["status"] = self._effective_status(adv, now)
                if status is not None and row["status"] != status:
                    continue
                rows.append(row)
            rows.sort(key=lambda a: a["id"])
            return {"now_ms": now, "advisories": rows}


def create_app(view: RegionView, token: str | None = None,
               static_dir: str | None = None):
    """HTTP wrapper over a RegionView.  Returns a FastAPI application."""
    import asyncio
    import os

    from fastapi import FastAPI, HTTPException, Request
    from fastapi.responses import StreamingResponse

    app = FastAPI(title="v2x base station", docs_url=None, redoc_url=None)
    app.state.view = view

    def check_token(request: Request) -> None:
        if token is None:
            return
        header = request.headers.get("authorization", "")
        if header == f"Bearer {token}":
            return
        if request.query_params.get("token") == token:
            return
        raise HTTPException(status_code=401, detail="missing or bad token")

    @app.post("/ingest")
    async def ingest(request: Request):
        check_token(request)
        body = await request.body()
        return view.ingest_lines(body.decode("utf-8", errors="replace"))

    @app.get("/vehicles")
    async def vehicles(request: Request):
        check_token(request)
        return view.vehicles_snapshot()

    @app.get("/vehicles/{label}/history")
    async def vehicle_history(label: str, request: Request):
        check_token(request)
        hist = view.vehicle_history(label)
        if hist is None:
            raise HTTPException(status_code=404, detail="unknown vehicle")
        return {"vehicle": label, "history": hist}

    @app.get("/rsus")
    async def rsus(request: Request):
        check_token(request)
        return view.rsus_snapshot()

    @app.get("/alerts")
    async def alerts(request: Request, kind: str | None = None):
        check_token(request)
        return view.alerts_snapshot(kind)

    @app.get("/advisories")
    async def advisories(request: Request, status: str | None = None):
        check_token(request)
        return view.advisories_snapshot(status)

    @app.post("/advisories")
    async def post_advisory(request: Request):
        check_token(request)
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="malformed JSON")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be an object")
        try:
            advisory_id = view.issue_advisory(
                kind=body.get("kind"),
                rsu=body.get("rsu"),
                ttl_ms=body.get("ttl_ms"),
                lat=body.get("lat"),
                lon=body.get("lon"),
                operator=str(body.get("operator", "")),
            )
        except UnknownRsuError as e:
            raise HTTPException(status_code=404, detail=f"unknown rsu: {e.args[0]}")
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return {"id": advisory_id}

    @app.post("/advisories/{advisory_id}/ack")
    async def ack_advisory(advisory_id: int, request: Request):
        check_token(request)
        try:
            view.mark_delivered(advisory_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown advisory")
        return {"ok": True}

    @app.post("/advisories/{advisory_id}/confirm")
    async def confirm_advisory(advisory_id: int, request: Request):
        check_token(request)
        try:
            view.confirm_advisory(advisory_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown advisory")
        return {"ok": True}

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.get("/stream")
    async def stream(request: Request):
        check_token(request)

        async def gen():
            q = view.subscribe()
            try:
                yield "event: hello\ndata: {}\n\n"
                while True:
                    if await request.is_disconnected():
                        return
                    sent = 0
                    while q and sent < 200:
                        delta = q.popleft()
                        yield ("data: "
                               + json.dumps(delta, separators=(",", ":"))
                               + "\n\n")
                        sent += 1
                    if not sent:
                        await asyncio.sleep(0.05)
            finally:
                view.unsubscribe(q)

        return StreamingResponse(gen(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    if static_dir and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="console")

    return app
