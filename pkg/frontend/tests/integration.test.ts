/** End-to-end fidelity test against a live chronoscope server (the
 * real Python process, spawned on a random TCP port).
 *
 * After scripted reverse-next / reverse-watch interactions the
 * rendered cursor, checkpoint markers, and highlighted witness must
 * equal the server's get-state / get-history snapshots; after a server
 * restart (with a persisted session) reconnecting restores a
 * consistent view.
 */

import { mkdtempSync, rmSync } from "node:fs";
import os from "node:os";
import path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { TimelineApp } from "../src/app.js";
import { unitLength } from "../src/model.js";
import type { CheckpointPayload, HistoryPayload, StatePayload } from "../src/protocol.js";
import { startServer, tcpTransport, type LiveServer } from "./helpers.js";

let server: LiveServer;
let sessionDir: string;
let app: TimelineApp;
let root: HTMLElement;

async function until(cond: () => boolean, timeoutMs = 10_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error("condition not reached in time");
}

async function serverSnapshots() {
  const client = app.client!;
  const state = await client.request<StatePayload>("get-state");
  const history = await client.request<HistoryPayload>("get-history");
  const ckpts = await client.request<{ checkpoints: CheckpointPayload[] }>("get-checkpoints");
  return { state, history, checkpoints: ckpts.checkpoints };
}

/** Diff the rendered DOM against fresh server snapshots. */
async function expectViewFidelity() {
  const { state, history, checkpoints } = await serverSnapshots();
  const timeline = root.querySelector(".timeline")!;
  expect(Number(timeline.getAttribute("data-cursor"))).toBe(state.history_len);
  expect(root.querySelectorAll(".pearl").length).toBe(unitLength(history));
  const cursorBoundary = root.querySelector(".boundary.at-cursor")!;
  expect(Number(cursorBoundary.getAttribute("data-prefix"))).toBe(state.history_len);
  const renderedMarkers = [...root.querySelectorAll(".ckpt")].map((m) => ({
    id: Number(m.getAttribute("data-ckpt")),
    prefix: Number(m.getAttribute("data-prefix")),
  }));
  const serverMarkers = checkpoints
    .filter((c) => c.substep === 0)
    .sort((a, b) => a.prefix_len - b.prefix_len || a.id - b.id)
    .map((c) => ({ id: c.id, prefix: c.prefix_len }));
  expect(renderedMarkers).toEqual(serverMarkers);
  const current = root.querySelector(".code-line.current");
  expect(Number(current?.getAttribute("data-line"))).toBe(state.line);
  return { state, history, checkpoints };
}

beforeAll(async () => {
  sessionDir = mkdtempSync(path.join(os.tmpdir(), "chrono-ui-"));
  server = await startServer(["--session-dir", sessionDir]);
  root = document.createElement("div");
  document.body.append(root);
  app = new TimelineApp(root, () => tcpTransport("127.0.0.1", server.port));
  await app.connect();
});

afterAll(async () => {
  await server?.stop();
  rmSync(sessionDir, { recursive: true, force: true });
});

describe("timeline UI against a live session", () => {
  it("connects, checks the protocol version, and renders an empty history", async () => {
    expect(app.model.connection).toBe("connected");
    expect(app.model.role).toBe("controller");
    expect(root.querySelectorAll(".pearl").length).toBe(0);
    expect(app.model.source.text).toContain("fn main");
    await expectViewFidelity();
  });

  it("forward commands grow the timeline; the view mirrors the server", async () => {
    await app.command("break", { line: 6 });
    await app.command("c");
    await app.command("n");
    const { state } = await expectViewFidelity();
    expect(state.history_len).toBe(2);
    expect(root.querySelectorAll(".pearl").length).toBe(2);
  });

  it("a clicked button issues the verb and the cursor follows the stop", async () => {
    root.querySelector<HTMLButtonElement>('button[data-cmd="n"]')!.click();
    await until(() => app.model.cursor === 3);
    await expectViewFidelity();
  });

  it("reverse-next moves the cursor left, exactly as the server says", async () => {
    const before = app.model.cursor;
    await app.command("reverse-next");
    const { state } = await expectViewFidelity();
    expect(app.model.cursor).toBe(state.history_len);
    expect(app.model.cursor).toBeLessThan(before);
  });

  it("reverse-watch highlights the witness on timeline and in source", async () => {
    await app.command("delete", { bp_id: 1 });
    await app.command("c"); // run to termination
    const input = root.querySelector<HTMLInputElement>('[data-role="watch-expr"]')!;
    input.value = "product >= 120";
    root
      .querySelector<HTMLFormElement>('[data-role="watch-form"]')!
      .dispatchEvent(new window.Event("submit", { bubbles: true, cancelable: true }));
    await until(() => app.model.witness !== null);
    const { state } = await expectViewFidelity();
    // the search lands on the witness: the value flips one step forward
    expect(app.model.witness!.origValue).toBe("true");
    expect(app.model.witness!.witnessValue).toBe("false");
    expect(app.model.witness!.prefixLen).toBe(state.history_len);
    const witnessPearl = root.querySelector(".pearl.witness")!;
    expect(Number(witnessPearl.getAttribute("data-unit"))).toBe(state.history_len - 1);
    const witnessLine = root.querySelector(".code-line.witness-line")!;
    expect(Number(witnessLine.getAttribute("data-line"))).toBe(state.line);
  });

  it("reconnect after a server restart restores a consistent view", async () => {
    const before = await serverSnapshots();
    await app.client!.request("quit");
    await until(() => app.model.connection === "disconnected");
    expect(root.classList.contains("stale")).toBe(true);

    server = await startServer(["--session-dir", sessionDir, "--resume"], server.port);
    root.querySelector<HTMLButtonElement>('button[data-action="reconnect"]')!.click();
    await until(() => app.model.connection === "connected" && app.model.state !== null);
    const after = await expectViewFidelity();
    expect(after.state.history_len).toBe(before.state.history_len);
    expect(after.state.file).toBe(before.state.file);
    expect(after.state.line).toBe(before.state.line);
    expect(after.state.work).toBe(before.state.work);
  });
});
