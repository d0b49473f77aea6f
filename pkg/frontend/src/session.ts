/**
 * A live console session: one store fed by the snapshot API plus the
 * delta stream.  Reconnects resync every snapshot, so state issued while
 * offline (or missed deltas) is recovered rather than lost.
 */

import { ApiClient, ApiError } from "./api.js";
import type { AdvisoryCommand } from "./api.js";
import { ConsoleStore, validateTtl } from "./model.js";
import { openStream } from "./stream.js";
import type { StreamHandle } from "./stream.js";

export interface SessionOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: typeof fetch;
  initialDelayMs?: number;
  maxDelayMs?: number;
  onChange?: () => void;
}

export class ConsoleSession {
  readonly store = new ConsoleStore();
  readonly api: ApiClient;
  private stream: StreamHandle;
  private onChange: () => void;

  constructor(opts: SessionOptions) {
    this.onChange = opts.onChange ?? (() => {});
    this.api = new ApiClient({
      baseUrl: opts.baseUrl,
      token: opts.token,
      fetchImpl: opts.fetchImpl,
    });
    this.stream = openStream(
      {
        baseUrl: opts.baseUrl,
        token: opts.token,
        fetchImpl: opts.fetchImpl,
        initialDelayMs: opts.initialDelayMs,
        maxDelayMs: opts.maxDelayMs,
      },
      {
        onDelta: (d) => {
          this.store.applyDelta(d);
          this.onChange();
        },
        onState: (s) => {
          this.store.setConnection(s);
          this.onChange();
          if (s === "live") void this.refresh();
        },
      },
    );
  }

  /** Pull all four snapshots and replace the store's sections. */
  async refresh(): Promise<void> {
    try {
      const [vehicles, rsus, alerts, advisories] = await Promise.all([
        this.api.vehicles(),
        this.api.rsus(),
        this.api.alerts(),
        this.api.advisories(),
      ]);
      this.store.applyVehicles(vehicles);
      this.store.applyRsus(rsus);
      this.store.applyAlerts(alerts);
      this.store.applyAdvisories(advisories);
    } catch (e) {
      if (e instanceof ApiError && e.status === 401) {
        this.store.setConnection("auth");
      }
      // network failures surface through the stream state instead
    }
    this.onChange();
  }

  /** Client-side ttl validation happens before anything leaves the page. */
  async issueAdvisory(cmd: AdvisoryCommand): Promise<{ id: number }> {
    const problem = validateTtl(cmd.ttl_ms);
    if (problem !== null) throw new Error(problem);
    return this.api.issueAdvisory(cmd);
  }

  close(): void {
    this.stream.close();
  }
}

export function connect(opts: SessionOptions): ConsoleSession {
  return new ConsoleSession(opts);
}
