import http from "node:http";
import type { AddressInfo } from "node:net";

import type { ReportRec } from "../src/api.js";

export const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function waitFor(
  cond: () => boolean,
  timeoutMs = 3000,
  label = "condition",
): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > timeoutMs) {
      throw new Error(`timed out after ${timeoutMs} ms waiting for ${label}`);
    }
    await sleep(10);
  }
}

/** Bind an http server on a free port; caller closes it. */
export function listen(
  handler: http.RequestListener,
): Promise<{ server: http.Server; url: string }> {
  return new Promise((resolve) => {
    const server = http.createServer(handler);
    server.listen(0, "127.0.0.1", () => {
      const { port } = server.address() as AddressInfo;
      resolve({ server, url: `http://127.0.0.1:${port}` });
    });
  });
}

export function report(vehicle: string, t: number, extra: Partial<ReportRec> = {}): ReportRec {
  return {
    rsu: "rsu:1",
    vehicle,
    emergency: false,
    lat: 17.59,
    lon: 78.12,
    speed: 10,
    heading: 90,
    timestamp_ms: t,
    alerts: [],
    ...extra,
  };
}
