/**
 * Server-sent-events consumer for /stream with automatic reconnect.
 *
 * Built on fetch rather than EventSource so the bearer token can ride in
 * a header and the same code runs in browser and test processes.  A 401
 * stops the loop for good (retrying cannot fix a bad token); everything
 * else backs off exponentially and keeps trying.
 */

import type { Delta } from "./api.js";
import type { ConnectionState } from "./model.js";

export interface StreamOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: typeof fetch;
  initialDelayMs?: number;
  maxDelayMs?: number;
}

export interface StreamEvents {
  onDelta(d: Delta): void;
  onState(s: ConnectionState): void;
}

export interface StreamHandle {
  close(): void;
}

interface SseFrame {
  event: string | null;
  data: string;
}

/** Split accumulated SSE text into complete frames plus the remainder. */
export function parseSseChunk(buffer: string): { frames: SseFrame[]; rest: string } {
  const frames: SseFrame[] = [];
  const parts = buffer.split(/\r?\n\r?\n/);
  const rest = parts.pop() ?? "";
  for (const part of parts) {
    let event: string | null = null;
    const data: string[] = [];
    for (const line of part.split(/\r?\n/)) {
      if (line.startsWith("data:")) data.push(line.slice(5).trimStart());
      else if (line.startsWith("event:")) event = line.slice(6).trim();
    }
    if (data.length) frames.push({ event, data: data.join("\n") });
  }
  return { frames, rest };
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export function openStream(opts: StreamOptions, ev: StreamEvents): StreamHandle {
  const base = opts.baseUrl.replace(/\/+$/, "");
  const doFetch = opts.fetchImpl ?? fetch;
  const initialDelay = opts.initialDelayMs ?? 500;
  const maxDelay = opts.maxDelayMs ?? 10000;

  let closed = false;
  let controller: AbortController | null = null;

  async function readBody(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      const { frames, rest } = parseSseChunk(buffer);
      buffer = rest;
      for (const frame of frames) {
        if (frame.event === "hello") continue;
        let delta: Delta;
        try {
          delta = JSON.parse(frame.data) as Delta;
        } catch {
          continue;
        }
        if (delta && (delta.type === "report" || delta.type === "advisory")) {
          ev.onDelta(delta);
        }
      }
    }
  }

  async function loop(): Promise<void> {
    let delay = initialDelay;
    ev.onState("connecting");
    while (!closed) {
      controller = new AbortController();
      try {
        const headers: Record<string, string> = { Accept: "text/event-stream" };
        if (opts.token) headers["Authorization"] = `Bearer ${opts.token}`;
        const resp = await doFetch(`${base}/stream`, {
          headers,
          signal: controller.signal,
        });
        if (resp.status === 401) {
          ev.onState("auth");
          return;
        }
        if (!resp.ok || !resp.body) {
          throw new Error(`stream HTTP ${resp.status}`);
        }
        ev.onState("live");
        delay = initialDelay;
        await readBody(resp.body);
        throw new Error("stream ended");
      } catch (e) {
        if (closed) return;
        ev.onState("offline");
        await sleep(delay);
        delay = Math.min(delay * 2, maxDelay);
      }
    }
  }

  void loop();

  return {
    close() {
      closed = true;
      controller?.abort();
    },
  };
}
