import type http from "node:http";

import { afterEach, describe, expect, it } from "vitest";

import type { AdvisoryRow, Delta } from "../src/api.js";
import type { ConnectionState } from "../src/model.js";
import { openStream, parseSseChunk } from "../src/stream.js";
import { listen, report, sleep, waitFor } from "./helpers.js";

describe("parseSseChunk", () => {
  it("keeps an incomplete frame in the remainder", () => {
    const { frames, rest } = parseSseChunk('data: {"a"');
    expect(frames).toEqual([]);
    expect(rest).toBe('data: {"a"');
  });

  it("splits complete frames from a trailing partial", () => {
    const { frames, rest } = parseSseChunk("data: 1\n\ndata: 2");
    expect(frames).toEqual([{ event: null, data: "1" }]);
    expect(rest).toBe("data: 2");
  });

  it("reads the event name", () => {
    const { frames } = parseSseChunk("event: hello\ndata: {}\n\n");
    expect(frames).toEqual([{ event: "hello", data: "{}" }]);
  });

  it("accepts CRLF line endings", () => {
    const { frames, rest } = parseSseChunk("data: 1\r\n\r\n");
    expect(frames).toEqual([{ event: null, data: "1" }]);
    expect(rest).toBe("");
  });

  it("joins multi-line data with newlines", () => {
    const { frames } = parseSseChunk("data: a\ndata: b\n\n");
    expect(frames[0]!.data).toBe("a\nb");
  });
});

const SSE_HEAD = { "Content-Type": "text/event-stream", "Cache-Control": "no-cache" };

function sseData(delta: Delta): string {
  return `data: ${JSON.stringify(delta)}\n\n`;
}

const advisoryRow: AdvisoryRow = {
  id: 1,
  kind: "ROUTE_BLOCKED",
  rsu: "rsu:1",
  ttl_ms: 60000,
  lat: null,
  lon: null,
  operator: "op",
  created_ms: 100,
  expires_at_ms: 60100,
  status: "pending",
};

describe("openStream", () => {
  let server: http.Server | null = null;

  afterEach(() => {
    server?.close();
    server = null;
  });

  it("delivers deltas, skipping the hello frame", async () => {
    const bound = await listen((_req, res) => {
      res.writeHead(200, SSE_HEAD);
      res.write("event: hello\ndata: {}\n\n");
      res.write(sseData({ type: "report", d: report("obu:1", 100) }));
      res.write(sseData({ type: "advisory", d: advisoryRow }));
    });
    server = bound.server;

    const deltas: Delta[] = [];
    const states: ConnectionState[] = [];
    const handle = openStream(
      { baseUrl: bound.url, initialDelayMs: 20 },
      { onDelta: (d) => deltas.push(d), onState: (s) => states.push(s) },
    );
    await waitFor(() => deltas.length === 2, 3000, "two deltas");
    handle.close();

    expect(states).toEqual(["connecting", "live"]);
    expect(deltas[0]).toEqual({ type: "report", d: report("obu:1", 100) });
    expect(deltas[1]).toEqual({ type: "advisory", d: advisoryRow });
  });

  it("sends the token as a bearer header", async () => {
    let seen: string | undefined;
    const bound = await listen((req, res) => {
      seen = req.headers.authorization;
      res.writeHead(200, SSE_HEAD);
      res.write("event: hello\ndata: {}\n\n");
    });
    server = bound.server;

    const states: ConnectionState[] = [];
    const handle = openStream(
      { baseUrl: bound.url, token: "sekrit", initialDelayMs: 20 },
      { onDelta: () => {}, onState: (s) => states.push(s) },
    );
    await waitFor(() => states.includes("live"), 3000, "live state");
    handle.close();
    expect(seen).toBe("Bearer sekrit");
  });

  it("stops for good on 401 instead of retrying", async () => {
    let hits = 0;
    const bound = await listen((_req, res) => {
      hits += 1;
      res.writeHead(401, { "Content-Type": "application/json" });
      res.end('{"detail":"missing or bad token"}');
    });
    server = bound.server;

    const states: ConnectionState[] = [];
    const handle = openStream(
      { baseUrl: bound.url, initialDelayMs: 10, maxDelayMs: 20 },
      { onDelta: () => {}, onState: (s) => states.push(s) },
    );
    await waitFor(() => states.includes("auth"), 3000, "auth state");
    await sleep(150);
    handle.close();

    expect(hits).toBe(1);
    expect(states).toEqual(["connecting", "auth"]);
  });

  it("reconnects after the stream drops and keeps receiving", async () => {
    let conn = 0;
    const bound = await listen((_req, res) => {
      conn += 1;
      res.writeHead(200, SSE_HEAD);
      res.write("event: hello\ndata: {}\n\n");
      if (conn === 1) {
        res.write(sseData({ type: "report", d: report("obu:1", 100) }));
        setTimeout(() => res.end(), 20);
      } else {
        res.write(sseData({ type: "report", d: report("obu:1", 200) }));
      }
    });
    server = bound.server;

    const deltas: Delta[] = [];
    const states: ConnectionState[] = [];
    const handle = openStream(
      { baseUrl: bound.url, initialDelayMs: 20, maxDelayMs: 50 },
      { onDelta: (d) => deltas.push(d), onState: (s) => states.push(s) },
    );
    await waitFor(() => deltas.length === 2, 5000, "delta after reconnect");
    handle.close();

    expect(conn).toBeGreaterThanOrEqual(2);
    expect(states).toEqual(["connecting", "live", "offline", "live"]);
  });

  it("backs off while the server stays down, then recovers", async () => {
    let up = false;
    let attempts = 0;
    const bound = await listen((_req, res) => {
      attempts += 1;
      if (!up) {
        res.destroy();
        return;
      }
      res.writeHead(200, SSE_HEAD);
      res.write("event: hello\ndata: {}\n\n");
    });
    server = bound.server;

    const states: ConnectionState[] = [];
    const handle = openStream(
      { baseUrl: bound.url, initialDelayMs: 15, maxDelayMs: 40 },
      { onDelta: () => {}, onState: (s) => states.push(s) },
    );
    await waitFor(() => attempts >= 3, 3000, "several failed attempts");
    up = true;
    await waitFor(() => states[states.length - 1] === "live", 3000, "recovery");
    handle.close();

    expect(states.filter((s) => s === "offline").length).toBeGreaterThanOrEqual(2);
  });
});
