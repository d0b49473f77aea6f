/**
 * DOM rendering for the non-map panels.  Every function rebuilds its
 * container from the view object alone and uses textContent throughout,
 * so untrusted strings from the wire never become markup.
 */

import type { AdvisoryView, ConsoleView } from "./model.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function fmtAge(ms: number): string {
  if (ms < 1000) return `${ms} ms`;
  if (ms < 60000) return `${(ms / 1000).toFixed(1)} s`;
  return `${Math.floor(ms / 60000)} m ${Math.round((ms % 60000) / 1000)} s`;
}

const CONNECTION_TEXT: Record<ConsoleView["connection"], string> = {
  connecting: "connecting",
  live: "live",
  offline: "offline, retrying",
  auth: "authentication failed",
};

export function renderStatus(container: HTMLElement, view: ConsoleView): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const dot = el(doc, "span", `dot ${view.connection}`);
  const label = el(doc, "span", "conn-text", CONNECTION_TEXT[view.connection]);
  container.append(dot, label);
  container.className = `status ${view.connection}`;
}

export function renderVehicleTable(tbody: HTMLElement, view: ConsoleView): void {
  const doc = tbody.ownerDocument;
  tbody.textContent = "";
  for (const v of view.vehicles) {
    const tr = el(doc, "tr", v.stale ? "vehicle stale" : "vehicle");
    tr.dataset["vehicle"] = v.id;
    const idCell = el(doc, "td", "id");
    idCell.append(el(doc, "span", undefined, v.id));
    if (v.emergency) idCell.append(el(doc, "span", "badge ev", "EV"));
    tr.append(idCell);
    tr.append(el(doc, "td", undefined, `${v.lat.toFixed(6)}, ${v.lon.toFixed(6)}`));
    tr.append(el(doc, "td", undefined, `${v.speed.toFixed(1)} m/s`));
    tr.append(el(doc, "td", undefined, `${Math.round(v.heading)}°`));
    tr.append(el(doc, "td", undefined, v.viaRsu));
    tr.append(el(doc, "td", "age", fmtAge(v.ageMs)));
    tbody.append(tr);
  }
}

export function renderAlerts(container: HTMLElement, view: ConsoleView): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (view.alerts.length === 0) {
    container.append(el(doc, "div", "empty", "no active alerts"));
    return;
  }
  for (const a of view.alerts) {
    const row = el(doc, "div", `alert ${a.severity.toLowerCase()}`);
    row.append(el(doc, "span", "sev", a.severity));
    row.append(el(doc, "span", "kind", a.kind));
    row.append(el(doc, "span", "subject", a.subject));
    row.append(el(doc, "span", "age", fmtAge(a.ageMs)));
    container.append(row);
  }
}

export interface AdvisoryActions {
  clear(rsu: string): void;
}

export function renderAdvisories(
  container: HTMLElement,
  view: ConsoleView,
  actions: AdvisoryActions,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (view.advisories.length === 0) {
    container.append(el(doc, "div", "empty", "no advisories"));
    return;
  }
  for (const adv of view.advisories) {
    const row = el(doc, "div", "advisory");
    row.dataset["advisoryId"] = String(adv.id);
    row.append(el(doc, "span", "adv-id", `#${adv.id}`));
    row.append(el(doc, "span", "kind", adv.kind));
    row.append(el(doc, "span", "rsu", adv.rsu));
    row.append(el(doc, "span", `chip ${adv.status}`, adv.status));
    if (adv.status === "pending" || adv.status === "delivered") {
      row.append(el(doc, "span", "ttl", `${Math.ceil(adv.ttlRemainingMs / 1000)} s left`));
    }
    if (offerClear(adv)) {
      const btn = el(doc, "button", "clear-btn", "issue ROUTE_CLEAR");
      btn.addEventListener("click", () => actions.clear(adv.rsu));
      row.append(btn);
    }
    container.append(row);
  }
}

/** ROUTE_CLEAR is offered on any still-active ROUTE_BLOCKED. */
export function offerClear(adv: AdvisoryView): boolean {
  return (
    adv.kind === "ROUTE_BLOCKED" &&
    (adv.status === "pending" || adv.status === "delivered")
  );
}

export function renderRsuOptions(select: HTMLSelectElement, view: ConsoleView): void {
  const doc = select.ownerDocument;
  const current = select.value;
  select.textContent = "";
  for (const r of view.rsus) {
    const opt = doc.createElement("option");
    opt.value = r.id;
    opt.textContent = r.id;
    select.append(opt);
  }
  if (view.rsus.some((r) => r.id === current)) select.value = current;
}
