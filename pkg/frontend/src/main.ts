/**
 * Page bootstrap: wires the session, the render loop, and the advisory
 * form.  All state lives in the session's store; this file only moves it
 * into the DOM.
 */

import { ApiError } from "./api.js";
import { planMap, paint } from "./map.js";
import { ConsoleSession } from "./session.js";
import {
  renderAdvisories,
  renderAlerts,
  renderRsuOptions,
  renderStatus,
  renderVehicleTable,
} from "./table.js";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const statusEl = byId<HTMLElement>("status");
const canvas = byId<HTMLCanvasElement>("map");
const vehiclesBody = byId<HTMLElement>("vehicles-body");
const alertsEl = byId<HTMLElement>("alerts");
const advisoriesEl = byId<HTMLElement>("advisories");
const form = byId<HTMLFormElement>("issue-form");
const kindSelect = byId<HTMLSelectElement>("issue-kind");
const rsuSelect = byId<HTMLSelectElement>("issue-rsu");
const ttlInput = byId<HTMLInputElement>("issue-ttl");
const formError = byId<HTMLElement>("issue-error");
const tokenInput = byId<HTMLInputElement>("token");

function storedToken(): string | undefined {
  const fromUrl = new URLSearchParams(location.search).get("token");
  if (fromUrl) {
    localStorage.setItem("v2x_token", fromUrl);
    return fromUrl;
  }
  return localStorage.getItem("v2x_token") ?? undefined;
}

let session: ConsoleSession | null = null;
let renderQueued = false;

function scheduleRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    render();
  });
}

function render(): void {
  if (!session) return;
  const view = session.store.view();
  renderStatus(statusEl, view);
  renderVehicleTable(vehiclesBody, view);
  renderAlerts(alertsEl, view);
  renderAdvisories(advisoriesEl, view, {
    clear(rsu) {
      void issue("ROUTE_CLEAR", rsu, 60000);
    },
  });
  renderRsuOptions(rsuSelect, view);

  const box = canvas.getBoundingClientRect();
  if (box.width > 0 && box.height > 0) {
    canvas.width = Math.floor(box.width);
    canvas.height = Math.floor(box.height);
  }
  const ctx = canvas.getContext("2d");
  if (ctx) paint(ctx, planMap(view, { width: canvas.width, height: canvas.height }));
}

async function issue(kind: "ROUTE_BLOCKED" | "ROUTE_CLEAR", rsu: string, ttlMs: number) {
  if (!session) return;
  formError.textContent = "";
  try {
    await session.issueAdvisory({ kind, rsu, ttl_ms: ttlMs });
  } catch (e) {
    // server rejections show verbatim so the operator sees the real reason
    formError.textContent = e instanceof ApiError ? e.detail : String(e);
  }
}

function start(): void {
  session?.close();
  session = new ConsoleSession({
    baseUrl: "",
    token: tokenInput.value || storedToken(),
    onChange: scheduleRender,
  });
}

form.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const kind = kindSelect.value as "ROUTE_BLOCKED" | "ROUTE_CLEAR";
  const rsu = rsuSelect.value;
  if (!rsu) {
    formError.textContent = "no rsu selected";
    return;
  }
  void issue(kind, rsu, Number(ttlInput.value));
});

tokenInput.addEventListener("change", () => {
  localStorage.setItem("v2x_token", tokenInput.value);
  start();
});

tokenInput.value = storedToken() ?? "";
setInterval(scheduleRender, 1000);
start();
