/** Pure DOM rendering of a TimelineModel. No handlers are attached
 * here; the app wires one delegated listener on the root. */

import type { TimelineModel } from "./model.js";
import { unitLength } from "./model.js";

export const REVERSE_VERBS = ["reverse-step", "reverse-next", "reverse-continue", "reverse-finish"];
export const FORWARD_VERBS = ["s", "n", "c", "f"];

interface Unit {
  index: number;
  token: string;
  line?: number;
}

function flattenUnits(model: TimelineModel): Unit[] {
  const units: Unit[] = [];
  for (const e of model.history.entries) {
    for (let i = 0; i < e.repeat; i++) {
      // annotations describe the state after the entry's final unit
      const last = i === e.repeat - 1;
      units.push({ index: units.length, token: e.token, line: last ? e.line : undefined });
    }
  }
  return units;
}

function el(tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function renderBanner(model: TimelineModel): HTMLElement | null {
  if (model.fatalError) {
    return el("div", { class: "banner error", "data-role": "fatal" }, model.fatalError);
  }
  if (model.connection === "disconnected") {
    const banner = el("div", { class: "banner warn", "data-role": "reconnect" });
    banner.append(
      el("span", {}, "Connection lost — the view below is stale. "),
      el("button", { "data-action": "reconnect" }, "Reconnect"),
    );
    return banner;
  }
  return null;
}

function renderTimeline(model: TimelineModel): HTMLElement {
  const total = unitLength(model.history);
  const wrap = el("div", { class: "timeline", "data-cursor": String(model.cursor), "data-units": String(total) });
  const strip = el("ol", { class: "pearls" });
  const ckptsByPrefix = new Map<number, number[]>();
  for (const c of model.checkpoints) {
    if (c.substep !== 0) continue; // mid-unit slices live inside a pearl
    ckptsByPrefix.set(c.prefix_len, (ckptsByPrefix.get(c.prefix_len) ?? []).concat([c.id]));
  }
  const marker = (prefix: number): HTMLElement[] =>
    (ckptsByPrefix.get(prefix) ?? []).map((id) =>
      el("span", { class: "ckpt", "data-ckpt": String(id), "data-prefix": String(prefix), title: `checkpoint ${id}` }, "◆"),
    );
  const boundary = (prefix: number): HTMLElement => {
    const li = el("li", { class: "boundary", "data-prefix": String(prefix) });
    for (const m of marker(prefix)) li.append(m);
    if (prefix === model.cursor) {
      li.append(el("span", { class: "cursor", "data-role": "cursor" }, "▲"));
      li.classList.add("at-cursor");
    }
    return li;
  };
  strip.append(boundary(0));
  for (const unit of flattenUnits(model)) {
    const pearl = el("li", { class: "pearl", "data-unit": String(unit.index), "data-token": unit.token }, unit.token);
    if (model.witness && unit.index === model.witness.prefixLen - 1) pearl.classList.add("witness");
    if (unit.index >= model.cursor) pearl.classList.add("future");
    strip.append(pearl);
    strip.append(boundary(unit.index + 1));
  }
  wrap.append(strip);
  return wrap;
}

function renderSource(model: TimelineModel): HTMLElement {
  const pane = el("div", { class: "source" });
  pane.append(el("div", { class: "source-file" }, model.source.file || model.state?.file || ""));
  const code = el("pre", { class: "code" });
  const currentLine = model.state?.line ?? -1;
  const witnessLine = model.witness && model.witness.stop.file === model.state?.file ? model.witness.stop.line : -1;
  model.source.text.split("\n").forEach((text, i) => {
    const lineNo = i + 1;
    const row = el("div", { class: "code-line", "data-line": String(lineNo) }, `${String(lineNo).padStart(3)}  ${text}`);
    if (lineNo === currentLine) row.classList.add("current");
    if (lineNo === witnessLine) row.classList.add("witness-line");
    code.append(row);
  });
  pane.append(code);
  return pane;
}

function renderControls(model: TimelineModel): HTMLElement {
  const bar = el("div", { class: "controls" });
  const fwd = el("div", { class: "group forward" });
  for (const verb of FORWARD_VERBS) fwd.append(el("button", { "data-cmd": verb }, verb));
  const rev = el("div", { class: "group reverse" });
  for (const verb of REVERSE_VERBS) rev.append(el("button", { "data-cmd": verb }, verb));
  const undo = el("div", { class: "group undo" });
  const max = Math.max(1, unitLength(model.history));
  undo.append(
    el("input", { type: "range", min: "1", max: String(max), value: "1", "data-role": "undo-k" }),
    el("button", { "data-action": "undo" }, "undo k"),
  );
  const watch = el("form", { class: "group watch", "data-role": "watch-form" });
  watch.append(
    el("input", { type: "text", placeholder: "reverse-watch expression", "data-role": "watch-expr" }),
    el("button", { type: "submit" }, "reverse-watch"),
  );
  bar.append(fwd, rev, undo, watch);
  return bar;
}

function renderStatus(model: TimelineModel): HTMLElement {
  const s = model.state;
  const status = el("div", { class: "status" });
  if (s) {
    status.append(
      el("span", { "data-role": "location" }, `${s.file}:${s.line}`),
      el("span", { "data-role": "depth" }, `depth ${s.depth}`),
      el("span", { "data-role": "bp-count" }, `bp# ${s.bp_count}`),
      el("span", { "data-role": "reason" }, s.reason),
      el("span", { "data-role": "live" }, s.live ? "live" : "not live"),
    );
    if (s.work !== null) status.append(el("span", { "data-role": "work" }, `work ${s.work}`));
  }
  if (model.lastNotice) status.append(el("span", { class: "notice", "data-role": "notice" }, model.lastNotice));
  if (model.witness) {
    status.append(
      el(
        "span",
        { class: "witness-info", "data-role": "witness-info" },
        `watch: ${model.witness.witnessValue} -> ${model.witness.origValue}`,
      ),
    );
  }
  return status;
}

function renderOutput(model: TimelineModel): HTMLElement {
  const log = el("pre", { class: "output", "data-role": "output" });
  log.textContent = (model.state?.output ?? []).join("\n");
  return log;
}

export function render(model: TimelineModel, root: HTMLElement): void {
  root.textContent = "";
  root.classList.toggle("stale", model.connection === "disconnected");
  const banner = renderBanner(model);
  if (banner) root.append(banner);
  if (model.fatalError) return; // blocking banner: nothing else renders
  root.append(renderStatus(model), renderTimeline(model), renderControls(model), renderSource(model), renderOutput(model));
}
