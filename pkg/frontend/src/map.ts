/**
 * Planar map of the monitored region.
 *
 * planMap turns a console view into a flat list of draw operations, a
 * pure function that snapshot tests can diff; paint replays the list
 * onto a canvas context and holds no state of its own.
 */

import type { ConsoleView } from "./model.js";

const M_PER_DEG_LAT = 111320;
const PAD_PX = 40;
const DEFAULT_METERS_PER_PX = 1;

export interface MapSize {
  width: number;
  height: number;
}

export type MapOp =
  | { op: "clear"; width: number; height: number }
  | { op: "origin"; x: number; y: number }
  | { op: "rsu"; x: number; y: number; id: string }
  | { op: "vehicle"; x: number; y: number; headingDeg: number; emergency: boolean; stale: boolean; id: string }
  | { op: "alert"; x: number; y: number; kind: string }
  | { op: "legend"; metersPerPixel: number };

interface LocalPoint {
  x: number;
  y: number;
}

function project(lat0: number, lon0: number, lat: number, lon: number): LocalPoint {
  const mPerDegLon = M_PER_DEG_LAT * Math.cos((lat0 * Math.PI) / 180);
  return { x: (lon - lon0) * mPerDegLon, y: (lat - lat0) * M_PER_DEG_LAT };
}

export function planMap(view: ConsoleView, size: MapSize): MapOp[] {
  const ops: MapOp[] = [{ op: "clear", width: size.width, height: size.height }];

  // local frame reference: first positioned rsu, else first vehicle
  let ref: { lat: number; lon: number } | null = null;
  for (const r of view.rsus) {
    if (r.lat !== null && r.lon !== null) {
      ref = { lat: r.lat, lon: r.lon };
      break;
    }
  }
  if (ref === null && view.vehicles.length > 0) {
    const v = view.vehicles[0]!;
    ref = { lat: v.lat, lon: v.lon };
  }

  const cx = size.width / 2;
  const cy = size.height / 2;
  if (ref === null) {
    ops.push({ op: "origin", x: cx, y: cy });
    ops.push({ op: "legend", metersPerPixel: DEFAULT_METERS_PER_PX });
    return ops;
  }

  const points: LocalPoint[] = [{ x: 0, y: 0 }];
  const vehiclePts = view.vehicles.map((v) => project(ref!.lat, ref!.lon, v.lat, v.lon));
  points.push(...vehiclePts);
  const rsuPts = view.rsus.map((r) =>
    r.lat !== null && r.lon !== null ? project(ref!.lat, ref!.lon, r.lat, r.lon) : null,
  );
  for (const p of rsuPts) if (p) points.push(p);

  let minX = Infinity;
  let maxX = -Infinity;
  let minY = Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    minX = Math.min(minX, p.x);
    maxX = Math.max(maxX, p.x);
    minY = Math.min(minY, p.y);
    maxY = Math.max(maxY, p.y);
  }
  const spanX = Math.max(maxX - minX, 1);
  const spanY = Math.max(maxY - minY, 1);
  const scale = Math.min(
    (size.width - 2 * PAD_PX) / spanX,
    (size.height - 2 * PAD_PX) / spanY,
    1 / DEFAULT_METERS_PER_PX,
  );
  const midX = (minX + maxX) / 2;
  const midY = (minY + maxY) / 2;
  // north up: canvas y grows downward
  const toCanvas = (p: LocalPoint) => ({
    x: cx + (p.x - midX) * scale,
    y: cy - (p.y - midY) * scale,
  });

  const originPx = toCanvas({ x: 0, y: 0 });
  ops.push({ op: "origin", x: originPx.x, y: originPx.y });

  view.rsus.forEach((r, i) => {
    const p = rsuPts[i];
    if (!p) return;
    const q = toCanvas(p);
    ops.push({ op: "rsu", x: q.x, y: q.y, id: r.id });
  });

  view.vehicles.forEach((v, i) => {
    const q = toCanvas(vehiclePts[i]!);
    ops.push({
      op: "vehicle",
      x: q.x,
      y: q.y,
      headingDeg: v.heading,
      emergency: v.emergency,
      stale: v.stale,
      id: v.id,
    });
  });

  for (const a of view.alerts) {
    if (a.lat === null || a.lon === null) continue;
    const q = toCanvas(project(ref.lat, ref.lon, a.lat, a.lon));
    ops.push({ op: "alert", x: q.x, y: q.y, kind: a.kind });
  }

  ops.push({ op: "legend", metersPerPixel: 1 / scale });
  return ops;
}

/** Minimal slice of CanvasRenderingContext2D the painter needs. */
export interface CanvasLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  save(): void;
  restore(): void;
  translate(x: number, y: number): void;
  rotate(rad: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export function paint(ctx: CanvasLike, ops: MapOp[]): void {
  for (const o of ops) {
    switch (o.op) {
      case "clear":
        ctx.clearRect(0, 0, o.width, o.height);
        break;
      case "origin":
        ctx.strokeStyle = "#4b5563";
        ctx.lineWidth = 1;
        ctx.beginPath();
        ctx.moveTo(o.x - 8, o.y);
        ctx.lineTo(o.x + 8, o.y);
        ctx.moveTo(o.x, o.y - 8);
        ctx.lineTo(o.x, o.y + 8);
        ctx.stroke();
        break;
      case "rsu":
        ctx.fillStyle = "#38bdf8";
        ctx.beginPath();
        ctx.rect(o.x - 5, o.y - 5, 10, 10);
        ctx.fill();
        ctx.font = "10px sans-serif";
        ctx.fillText(o.id, o.x + 8, o.y + 4);
        break;
      case "vehicle": {
        ctx.save();
        ctx.translate(o.x, o.y);
        // compass heading: 0 north, clockwise; canvas rotation matches
        ctx.rotate((o.headingDeg * Math.PI) / 180);
        ctx.fillStyle = o.stale ? "#6b7280" : o.emergency ? "#f87171" : "#4ade80";
        ctx.beginPath();
        ctx.moveTo(0, -8);
        ctx.lineTo(5, 6);
        ctx.lineTo(-5, 6);
        ctx.fill();
        if (o.emergency) {
          ctx.strokeStyle = o.stale ? "#6b7280" : "#f87171";
          ctx.lineWidth = 1.5;
          ctx.beginPath();
          ctx.arc(0, 0, 12, 0, 2 * Math.PI);
          ctx.stroke();
        }
        ctx.restore();
        ctx.fillStyle = o.stale ? "#6b7280" : "#d1d5db";
        ctx.font = "10px sans-serif";
        ctx.fillText(o.id, o.x + 10, o.y - 8);
        break;
      }
      case "alert":
        ctx.strokeStyle = "#fbbf24";
        ctx.lineWidth = 2;
        ctx.beginPath();
        ctx.moveTo(o.x - 6, o.y - 6);
        ctx.lineTo(o.x + 6, o.y + 6);
        ctx.moveTo(o.x + 6, o.y - 6);
        ctx.lineTo(o.x - 6, o.y + 6);
        ctx.stroke();
        break;
      case "legend":
        ctx.fillStyle = "#9ca3af";
        ctx.font = "10px sans-serif";
        ctx.fillText(`${o.metersPerPixel.toFixed(1)} m/px`, 8, 14);
        break;
    }
  }
}
