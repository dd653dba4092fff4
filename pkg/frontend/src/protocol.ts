/** chronoscope/1 protocol client: newline-delimited JSON frames.
 *
 * The client is transport-agnostic: anything that can carry text lines
 * works (a WebSocket-to-TCP bridge in the browser, a raw TCP socket in
 * node-based tests). The UI issues only these verbs and mutates its
 * model only from responses and events.
 */

export const PROTOCOL_VERSION = "chronoscope/1";

export interface StopPayload {
  file: string;
  line: number;
  depth: number;
  bp_count: number;
  reason: string;
  work: number | null;
  notice?: string;
}

export interface CheckpointPayload {
  id: number;
  prefix_len: number;
  substep: number;
  file: string;
  line: number;
  depth: number;
  bp_count: number;
  work: number;
  auto: boolean;
}

export interface HistoryEntryPayload {
  token: string;
  repeat: number;
  depth?: number;
  file?: string;
  line?: number;
  bp_count?: number;
  work?: number | null;
  embedded?: number[];
}

export interface MutationPayload {
  position: number;
  action: "set" | "delete";
  bp_id: number;
  line: number;
}

export interface HistoryPayload {
  entries: HistoryEntryPayload[];
  mutations: MutationPayload[];
}

export interface StatePayload extends StopPayload {
  history_len: number;
  live: boolean;
  output: number[];
}

export interface WatchPayload extends StopPayload {
  orig_value: string;
  witness_value: string;
  counts: Record<string, number>;
}

export interface EventFrame {
  event: string;
  payload: Record<string, unknown>;
}

export interface HelloPayload {
  version: string;
  role: "controller" | "observer";
}

/** Minimal duplex text transport. Implementations assign data to
 * `onData`/`onClose` as it arrives. */
export interface Transport {
  send(text: string): void;
  close(): void;
  onData: ((chunk: string) => void) | null;
  onClose: (() => void) | null;
}

export class ProtocolError extends Error {}

interface Pending {
  resolve: (payload: unknown) => void;
  reject: (err: Error) => void;
}

export class ChronoClient {
  readonly hello: Promise<HelloPayload>;
  onEvent: ((frame: EventFrame) => void) | null = null;
  onClose: (() => void) | null = null;

  private transport: Transport;
  private buf = "";
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private helloResolve!: (h: HelloPayload) => void;
  private helloReject!: (e: Error) => void;
  private gotHello = false;
  private closed = false;

  constructor(transport: Transport) {
    this.transport = transport;
    this.hello = new Promise<HelloPayload>((resolve, reject) => {
      this.helloResolve = resolve;
      this.helloReject = reject;
    });
    transport.onData = (chunk) => this.feed(chunk);
    transport.onClose = () => this.handleClose();
  }

  private feed(chunk: string): void {
    this.buf += chunk;
    let idx: number;
    while ((idx = this.buf.indexOf("\n")) >= 0) {
      const line = this.buf.slice(0, idx);
      this.buf = this.buf.slice(idx + 1);
      if (line.trim()) this.dispatch(JSON.parse(line));
    }
  }

  private dispatch(msg: Record<string, unknown>): void {
    if (typeof msg.event === "string") {
      const frame = msg as unknown as EventFrame;
      if (frame.event === "hello" && !this.gotHello) {
        this.gotHello = true;
        const payload = frame.payload as unknown as HelloPayload;
        if (payload.version !== PROTOCOL_VERSION) {
          this.helloReject(
            new ProtocolError(
              `protocol version mismatch: server speaks ${payload.version}, client speaks ${PROTOCOL_VERSION}`,
            ),
          );
          this.transport.close();
          return;
        }
        this.helloResolve(payload);
        return;
      }
      this.onEvent?.(frame);
      return;
    }
    const id = msg.id as number;
    const pending = this.pending.get(id);
    if (!pending) return;
    this.pending.delete(id);
    if (typeof msg.error === "string") pending.reject(new ProtocolError(msg.error));
    else pending.resolve(msg.payload);
  }

  private handleClose(): void {
    if (this.closed) return;
    this.closed = true;
    const err = new ProtocolError("connection closed");
    if (!this.gotHello) this.helloReject(err);
    for (const p of this.pending.values()) p.reject(err);
    this.pending.clear();
    this.onClose?.();
  }

  request<T = unknown>(verb: string, args: Record<string, unknown> = {}): Promise<T> {
    if (this.closed) return Promise.reject(new ProtocolError("connection closed"));
    const id = this.nextId++;
    const promise = new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (p: unknown) => void, reject });
    });
    this.transport.send(JSON.stringify({ id, verb, args }) + "\n");
    return promise;
  }

  close(): void {
    this.transport.close();
    this.handleClose();
  }
}

/** Browser transport over a WebSocket-to-TCP bridge (e.g. websockify
 * pointed at the chronoscope `--serve` port). */
export function webSocketTransport(url: string): Transport {
  const ws = new WebSocket(url);
  const transport: Transport = {
    send: (text) => ws.send(text),
    close: () => ws.close(),
    onData: null,
    onClose: null,
  };
  ws.onmessage = (ev) => transport.onData?.(typeof ev.data === "string" ? ev.data : "");
  ws.onclose = () => transport.onClose?.();
  ws.onerror = () => transport.onClose?.();
  return transport;
}
