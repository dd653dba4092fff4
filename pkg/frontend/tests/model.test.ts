import { describe, expect, it } from "vitest";

import {
  applyCheckpoints,
  applyEvent,
  applyHistory,
  applyState,
  applyWatchResult,
  initialModel,
  onConnected,
  onDisconnected,
  onFatalError,
  unitLength,
} from "../src/model.js";
import type { HistoryPayload, StatePayload, WatchPayload } from "../src/protocol.js";

const stop = { file: "x.tvm", line: 6, depth: 1, bp_count: 1, reason: "step-complete", work: 9 };

function state(historyLen: number, extra: Partial<StatePayload> = {}): StatePayload {
  return { ...stop, history_len: historyLen, live: true, output: [], ...extra };
}

function history(entries: HistoryPayload["entries"]): HistoryPayload {
  return { entries, mutations: [] };
}

describe("TimelineModel", () => {
  it("starts connecting with an empty timeline", () => {
    const m = initialModel();
    expect(m.connection).toBe("connecting");
    expect(m.cursor).toBe(0);
    expect(unitLength(m.history)).toBe(0);
  });

  it("tracks cursor from server state, clamped to history length", () => {
    let m = onConnected(initialModel(), "controller");
    m = applyHistory(m, history([{ token: "n", repeat: 3 }]));
    m = applyState(m, state(3));
    expect(m.cursor).toBe(3);
    // a shorter history snapshot clamps the cursor — never past the end
    m = applyHistory(m, history([{ token: "n", repeat: 2 }]));
    expect(m.cursor).toBe(2);
  });

  it("counts units across repeat counts", () => {
    const h = history([
      { token: "c", repeat: 1 },
      { token: "n", repeat: 4 },
    ]);
    expect(unitLength(h)).toBe(5);
  });

  it("history-truncated events move the cursor back, never forward", () => {
    let m = applyState(applyHistory(onConnected(initialModel(), "controller"), history([{ token: "n", repeat: 5 }])), state(5));
    m = applyEvent(m, { event: "history-truncated", payload: { prefix_len: 2 } });
    expect(m.cursor).toBe(2);
    m = applyEvent(m, { event: "history-truncated", payload: { prefix_len: 4 } });
    expect(m.cursor).toBe(2);
  });

  it("checkpoint markers stay sorted by prefix position", () => {
    const ck = (id: number, prefix: number) => ({
      id, prefix_len: prefix, substep: 0, file: "x.tvm", line: 1, depth: 1, bp_count: 0, work: 0, auto: false,
    });
    let m = applyCheckpoints(initialModel(), [ck(2, 5), ck(0, 0), ck(1, 3)]);
    expect(m.checkpoints.map((c) => c.prefix_len)).toEqual([0, 3, 5]);
    m = applyEvent(m, { event: "checkpoint", payload: ck(3, 4) as unknown as Record<string, unknown> });
    expect(m.checkpoints.map((c) => c.id)).toEqual([0, 1, 3, 2]);
  });

  it("stop events only overwrite stop fields — no speculation", () => {
    let m = applyState(onConnected(initialModel(), "controller"), state(2, { output: [7] }));
    m = applyEvent(m, { event: "stop", payload: { ...stop, line: 9 } });
    expect(m.state?.line).toBe(9);
    expect(m.state?.history_len).toBe(2); // untouched until the next snapshot
    expect(m.state?.output).toEqual([7]);
  });

  it("watch results record the witness; notices clear it", () => {
    const payload: WatchPayload = { ...stop, orig_value: "true", witness_value: "false", counts: { expr_evals: 5 } };
    let m = applyState(onConnected(initialModel(), "controller"), state(4));
    m = applyWatchResult(m, payload, 4);
    expect(m.witness?.prefixLen).toBe(4);
    expect(m.witness?.origValue).toBe("true");
    m = applyWatchResult(m, { ...payload, notice: "no change found in recorded history" }, 4);
    expect(m.witness).toBeNull();
    expect(m.lastNotice).toContain("no change");
  });

  it("fatal errors and disconnects are distinct states", () => {
    const dead = onFatalError(initialModel(), "protocol version mismatch: chronoscope/2");
    expect(dead.fatalError).toContain("mismatch");
    const lost = onDisconnected(onConnected(initialModel(), "controller"));
    expect(lost.connection).toBe("disconnected");
    expect(lost.fatalError).toBeNull();
  });
});
