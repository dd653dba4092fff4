/** TimelineModel: the single source of truth for the rendered view.
 *
 * Invariants:
 *  - cursor <= total history units;
 *  - checkpoint markers appear at their prefix positions;
 *  - the model mirrors server responses/events only — no client-side
 *    speculation about what a command "should" have done.
 */

import type {
  CheckpointPayload,
  EventFrame,
  HistoryPayload,
  StatePayload,
  StopPayload,
  WatchPayload,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface Witness {
  stop: StopPayload;
  origValue: string;
  witnessValue: string;
  /** history prefix length at the witness (the unit the search landed on) */
  prefixLen: number;
}

export interface TimelineModel {
  connection: ConnectionStatus;
  /** blocking banner text (protocol version mismatch etc.) */
  fatalError: string | null;
  role: string | null;
  state: StatePayload | null;
  history: HistoryPayload;
  checkpoints: CheckpointPayload[];
  /** current prefix position on the timeline */
  cursor: number;
  witness: Witness | null;
  source: { file: string; text: string };
  lastNotice: string | null;
}

export function initialModel(): TimelineModel {
  return {
    connection: "connecting",
    fatalError: null,
    role: null,
    state: null,
    history: { entries: [], mutations: [] },
    checkpoints: [],
    cursor: 0,
    witness: null,
    source: { file: "", text: "" },
    lastNotice: null,
  };
}

export function unitLength(history: HistoryPayload): number {
  return history.entries.reduce((n, e) => n + e.repeat, 0);
}

function clampCursor(model: TimelineModel): TimelineModel {
  const max = unitLength(model.history);
  return model.cursor > max ? { ...model, cursor: max } : model;
}

export function onConnected(model: TimelineModel, role: string): TimelineModel {
  return { ...model, connection: "connected", role, fatalError: null };
}

export function onFatalError(model: TimelineModel, message: string): TimelineModel {
  return { ...model, fatalError: message, connection: "disconnected" };
}

export function onDisconnected(model: TimelineModel): TimelineModel {
  return { ...model, connection: "disconnected" };
}

export function applyState(model: TimelineModel, state: StatePayload): TimelineModel {
  return clampCursor({ ...model, state, cursor: state.history_len, lastNotice: state.notice ?? model.lastNotice });
}

export function applyHistory(model: TimelineModel, history: HistoryPayload): TimelineModel {
  return clampCursor({ ...model, history });
}

export function applyCheckpoints(model: TimelineModel, checkpoints: CheckpointPayload[]): TimelineModel {
  const sorted = [...checkpoints].sort((a, b) => a.prefix_len - b.prefix_len || a.id - b.id);
  return { ...model, checkpoints: sorted };
}

export function applySource(model: TimelineModel, source: { file: string; text: string }): TimelineModel {
  return { ...model, source };
}

export function applyWatchResult(model: TimelineModel, payload: WatchPayload, prefixLen: number): TimelineModel {
  if (payload.notice) {
    return { ...model, lastNotice: payload.notice, witness: null };
  }
  return {
    ...model,
    witness: {
      stop: payload,
      origValue: payload.orig_value,
      witnessValue: payload.witness_value,
      prefixLen,
    },
    lastNotice: null,
  };
}

export function setNotice(model: TimelineModel, notice: string | null): TimelineModel {
  return { ...model, lastNotice: notice };
}

/** Fold an unsolicited server event into the model. Stop events update
 * the last-stop fields; truncation moves the cursor back; checkpoint
 * events upsert markers. Anything richer (exact history annotations)
 * comes from the snapshot refresh that follows. */
export function applyEvent(model: TimelineModel, frame: EventFrame): TimelineModel {
  switch (frame.event) {
    case "stop": {
      const stop = frame.payload as unknown as StopPayload;
      if (model.state === null) return model;
      return { ...model, state: { ...model.state, ...stop } };
    }
    case "history-truncated": {
      const prefixLen = frame.payload.prefix_len as number;
      const cursor = Math.min(model.cursor, prefixLen);
      return { ...model, cursor };
    }
    case "checkpoint": {
      const ckpt = frame.payload as unknown as CheckpointPayload;
      const rest = model.checkpoints.filter((c) => c.id !== ckpt.id);
      return applyCheckpoints({ ...model, checkpoints: rest.concat([ckpt]) }, rest.concat([ckpt]));
    }
    case "watch-result": {
      const stop = frame.payload as unknown as StopPayload;
      if (model.state === null) return model;
      return { ...model, state: { ...model.state, ...stop } };
    }
    default:
      return model;
  }
}
