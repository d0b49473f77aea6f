/**
 * Typed client for the base-station HTTP API.
 *
 * The console is read-only except for issuing advisories: this module
 * exposes GET snapshots plus exactly one mutating call (POST /advisories).
 */

export interface VehicleRow {
  rsu: string;
  vehicle: string;
  emergency: boolean;
  lat: number;
  lon: number;
  speed: number;
  heading: number;
  timestamp_ms: number;
  alerts: string[];
  age_ms: number;
  history_len: number;
}

export interface RsuRow {
  id: string;
  lat: number | null;
  lon: number | null;
  last_seen_ms: number;
  age_ms: number;
}

export interface AlertRow {
  kind: string;
  subject: string;
  rsu: string;
  severity: "CRITICAL" | "WARN";
  first_seen_ms: number;
  last_seen_ms: number;
}

export interface AdvisoryRow {
  id: number;
  kind: string;
  rsu: string;
  ttl_ms: number;
  lat: number | null;
  lon: number | null;
  operator: string;
  created_ms: number;
  expires_at_ms: number;
  status: "candidate" | "pending" | "delivered" | "expired";
}

/** One report record as published on /stream and accepted by the view. */
export interface ReportRec {
  rsu: string;
  vehicle: string;
  emergency: boolean;
  lat: number;
  lon: number;
  speed: number;
  heading: number;
  timestamp_ms: number;
  alerts: string[];
}

export type Delta =
  | { type: "report"; d: ReportRec }
  | { type: "advisory"; d: AdvisoryRow };

export interface AdvisoryCommand {
  kind: "ROUTE_BLOCKED" | "ROUTE_CLEAR";
  rsu: string;
  ttl_ms: number;
  lat?: number;
  lon?: number;
  operator?: string;
}

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export interface ApiOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: typeof fetch;
}

export class ApiClient {
  readonly baseUrl: string;
  private token?: string;
  private fetchImpl: typeof fetch;

  constructor(opts: ApiOptions) {
    this.baseUrl = opts.baseUrl.replace(/\/+$/, "");
    this.token = opts.token;
    this.fetchImpl = opts.fetchImpl ?? fetch;
  }

  headers(): Record<string, string> {
    const h: Record<string, string> = {};
    if (this.token) h["Authorization"] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init?.headers as object) },
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: unknown };
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  vehicles(): Promise<{ now_ms: number; vehicles: VehicleRow[] }> {
    return this.request("/vehicles");
  }

  rsus(): Promise<{ now_ms: number; rsus: RsuRow[] }> {
    return this.request("/rsus");
  }

  alerts(): Promise<{ now_ms: number; alerts: AlertRow[] }> {
    return this.request("/alerts");
  }

  advisories(status?: string): Promise<{ now_ms: number; advisories: AdvisoryRow[] }> {
    const q = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request(`/advisories${q}`);
  }

  health(): Promise<{ ok: boolean }> {
    return this.request("/healthz");
  }

  /** The single mutating call in the console's network layer. */
  issueAdvisory(cmd: AdvisoryCommand): Promise<{ id: number }> {
    return this.request("/advisories", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(cmd),
    });
  }
}
