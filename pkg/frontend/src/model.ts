/**
 * Console view model.  One store holds everything the UI shows; snapshot
 * and stream updates both funnel through it, and rendering reads a plain
 * view object computed for an explicit clock value so identical inputs
 * give identical output.
 *
 * Timestamps are base-station time (the region clock follows report
 * timestamps), not wall time, so a replayed log behaves like a live run.
 */

import type {
  AdvisoryRow,
  AlertRow,
  Delta,
  ReportRec,
  RsuRow,
  VehicleRow,
} from "./api.js";

export const STALE_AFTER_MS = 5000;
export const DROP_AFTER_MS = 30000;
export const ALERT_TTL_MS = 5000;
export const ADVISORY_TTL_MIN_MS = 1000;
export const ADVISORY_TTL_MAX_MS = 600000;

const CRITICAL_KINDS = new Set([
  "EMERGENCY_BRAKE",
  "VRU_ON_PATH",
  "BLIND_SPOT_COLLISION",
]);

export type ConnectionState = "connecting" | "live" | "offline" | "auth";

export interface VehicleView {
  id: string;
  emergency: boolean;
  lat: number;
  lon: number;
  speed: number;
  heading: number;
  viaRsu: string;
  lastSeenMs: number;
  ageMs: number;
  stale: boolean;
  alerts: string[];
}

export interface RsuView {
  id: string;
  lat: number | null;
  lon: number | null;
  ageMs: number;
}

export interface AlertView {
  kind: string;
  subject: string;
  severity: "CRITICAL" | "WARN";
  rsu: string;
  ageMs: number;
  lat: number | null;
  lon: number | null;
}

export interface AdvisoryView {
  id: number;
  kind: string;
  rsu: string;
  status: "candidate" | "pending" | "delivered" | "expired";
  ttlRemainingMs: number;
  operator: string;
}

export interface ConsoleView {
  connection: ConnectionState;
  nowMs: number;
  vehicles: VehicleView[];
  rsus: RsuView[];
  alerts: AlertView[];
  advisories: AdvisoryView[];
}

/** Client-side gate for the issue form; mirrors the server bounds. */
export function validateTtl(ttlMs: number): string | null {
  if (!Number.isInteger(ttlMs)) return "ttl must be a whole number of ms";
  if (ttlMs < ADVISORY_TTL_MIN_MS) {
    return `ttl below minimum ${ADVISORY_TTL_MIN_MS} ms`;
  }
  if (ttlMs > ADVISORY_TTL_MAX_MS) {
    return `ttl above maximum ${ADVISORY_TTL_MAX_MS} ms`;
  }
  return null;
}

interface AlertEpisode {
  kind: string;
  subject: string;
  rsu: string;
  severity: "CRITICAL" | "WARN";
  first_seen_ms: number;
  last_seen_ms: number;
}

export class ConsoleStore {
  private vehicles = new Map<string, ReportRec>();
  private rsus = new Map<string, { id: string; lat: number | null; lon: number | null; last_seen_ms: number }>();
  private alerts = new Map<string, AlertEpisode>();
  private advisories = new Map<number, AdvisoryRow>();
  private clock = 0;
  private connection: ConnectionState = "connecting";

  /** Bumped on every mutation; lets the UI re-render only on change. */
  revision = 0;

  nowMs(): number {
    return this.clock;
  }

  connectionState(): ConnectionState {
    return this.connection;
  }

  setConnection(s: ConnectionState): void {
    if (s === this.connection) return;
    this.connection = s;
    this.revision += 1;
  }

  private advance(t: number): void {
    if (t > this.clock) this.clock = t;
  }

  // Snapshots replace their whole section so a reconnect resync never
  // leaves ghosts from before the disconnect.

  applyVehicles(snap: { now_ms: number; vehicles: VehicleRow[] }): void {
    this.vehicles.clear();
    for (const row of snap.vehicles) {
      const { age_ms: _a, history_len: _h, ...rec } = row;
      this.vehicles.set(rec.vehicle, rec);
    }
    this.advance(snap.now_ms);
    this.revision += 1;
  }

  applyRsus(snap: { now_ms: number; rsus: RsuRow[] }): void {
    this.rsus.clear();
    for (const row of snap.rsus) {
      this.rsus.set(row.id, {
        id: row.id,
        lat: row.lat,
        lon: row.lon,
        last_seen_ms: row.last_seen_ms,
      });
    }
    this.advance(snap.now_ms);
    this.revision += 1;
  }

  applyAlerts(snap: { now_ms: number; alerts: AlertRow[] }): void {
    this.alerts.clear();
    for (const row of snap.alerts) {
      this.alerts.set(`${row.kind}|${row.subject}`, { ...row });
    }
    this.advance(snap.now_ms);
    this.revision += 1;
  }

  applyAdvisories(snap: { now_ms: number; advisories: AdvisoryRow[] }): void {
    this.advisories.clear();
    for (const row of snap.advisories) {
      this.advisories.set(row.id, { ...row });
    }
    this.advance(snap.now_ms);
    this.revision += 1;
  }

  applyDelta(delta: Delta): void {
    if (delta.type === "report") {
      this.applyReport(delta.d);
    } else if (delta.type === "advisory") {
      this.advisories.set(delta.d.id, { ...delta.d });
      this.advance(delta.d.created_ms);
      this.revision += 1;
    }
  }

  private applyReport(rec: ReportRec): void {
    const t = rec.timestamp_ms;
    const prev = this.vehicles.get(rec.vehicle);
    if (prev === undefined || t >= prev.timestamp_ms) {
      this.vehicles.set(rec.vehicle, { ...rec });
    }
    const rsu = this.rsus.get(rec.rsu);
    if (rsu === undefined) {
      // position arrives with the next /rsus resync; keep the id so the
      // issue form can already target it
      this.rsus.set(rec.rsu, { id: rec.rsu, lat: null, lon: null, last_seen_ms: t });
    } else if (t > rsu.last_seen_ms) {
      rsu.last_seen_ms = t;
    }
    for (const kind of rec.alerts) {
      const key = `${kind}|${rec.vehicle}`;
      const a = this.alerts.get(key);
      if (a === undefined || t - a.last_seen_ms > ALERT_TTL_MS) {
        this.alerts.set(key, {
          kind,
          subject: rec.vehicle,
          rsu: rec.rsu,
          severity: CRITICAL_KINDS.has(kind) ? "CRITICAL" : "WARN",
          first_seen_ms: t,
          last_seen_ms: t,
        });
      } else {
        a.last_seen_ms = Math.max(a.last_seen_ms, t);
        a.rsu = rec.rsu;
      }
    }
    this.advance(t);
    this.revision += 1;
  }

  /**
   * Snapshot of everything the UI renders, aged against the given clock
   * (defaults to the store clock).  Vehicles unseen for more than 5 s
   * show as stale, more than 30 s disappear.
   */
  view(nowMs: number = this.clock): ConsoleView {
    const vehicles: VehicleView[] = [];
    for (const id of [...this.vehicles.keys()].sort()) {
      const rec = this.vehicles.get(id)!;
      const age = Math.max(0, nowMs - rec.timestamp_ms);
      if (age > DROP_AFTER_MS) continue;
      vehicles.push({
        id,
        emergency: rec.emergency,
        lat: rec.lat,
        lon: rec.lon,
        speed: rec.speed,
        heading: rec.heading,
        viaRsu: rec.rsu,
        lastSeenMs: rec.timestamp_ms,
        ageMs: age,
        stale: age > STALE_AFTER_MS,
        alerts: [...rec.alerts],
      });
    }

    const rsus: RsuView[] = [];
    for (const id of [...this.rsus.keys()].sort()) {
      const r = this.rsus.get(id)!;
      rsus.push({
        id,
        lat: r.lat,
        lon: r.lon,
        ageMs: Math.max(0, nowMs - r.last_seen_ms),
      });
    }

    const alerts: AlertView[] = [];
    const alertKeys = [...this.alerts.keys()].sort();
    for (const key of alertKeys) {
      const a = this.alerts.get(key)!;
      if (nowMs - a.last_seen_ms > ALERT_TTL_MS) continue;
      const subject = this.vehicles.get(a.subject);
      alerts.push({
        kind: a.kind,
        subject: a.subject,
        severity: a.severity,
        rsu: a.rsu,
        ageMs: Math.max(0, nowMs - a.first_seen_ms),
        lat: subject?.lat ?? null,
        lon: subject?.lon ?? null,
      });
    }

    const advisories: AdvisoryView[] = [];
    for (const id of [...this.advisories.keys()].sort((a, b) => a - b)) {
      const adv = this.advisories.get(id)!;
      let status = adv.status;
      if ((status === "pending" || status === "delivered") && nowMs >= adv.expires_at_ms) {
        status = "expired";
      }
      advisories.push({
        id,
        kind: adv.kind,
        rsu: adv.rsu,
        status,
        ttlRemainingMs: Math.max(0, adv.expires_at_ms - nowMs),
        operator: adv.operator,
      });
    }

    return { connection: this.connection, nowMs, vehicles, rsus, alerts, advisories };
  }
}
