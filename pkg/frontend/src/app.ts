/** Glue: connects a ChronoClient to the TimelineModel and the DOM.
 * All model changes originate from server responses or events; user
 * gestures only send protocol verbs. */

import {
  ChronoClient,
  type CheckpointPayload,
  type HistoryPayload,
  type StatePayload,
  type StopPayload,
  type Transport,
  type WatchPayload,
} from "./protocol.js";
import {
  applyCheckpoints,
  applyEvent,
  applyHistory,
  applySource,
  applyState,
  applyWatchResult,
  initialModel,
  onConnected,
  onDisconnected,
  onFatalError,
  setNotice,
  type TimelineModel,
} from "./model.js";
import { render } from "./view.js";

export type TransportFactory = () => Transport;

export class TimelineApp {
  model: TimelineModel = initialModel();
  client: ChronoClient | null = null;

  constructor(
    private root: HTMLElement,
    private transportFactory: TransportFactory,
  ) {
    this.wireDom();
    this.render();
  }

  private render(): void {
    render(this.model, this.root);
  }

  private update(next: TimelineModel): void {
    this.model = next;
    this.render();
  }

  async connect(): Promise<void> {
    this.update({ ...initialModel(), source: this.model.source });
    const client = new ChronoClient(this.transportFactory());
    this.client = client;
    client.onEvent = (frame) => this.update(applyEvent(this.model, frame));
    client.onClose = () => this.update(onDisconnected(this.model));
    try {
      const hello = await client.hello;
      this.update(onConnected(this.model, hello.role));
    } catch (err) {
      this.update(onFatalError(this.model, String((err as Error).message ?? err)));
      return;
    }
    await this.refresh(true);
  }

  /** Re-pull authoritative snapshots from the server. */
  async refresh(includeSource = false): Promise<void> {
    if (!this.client) return;
    const state = await this.client.request<StatePayload>("get-state");
    const history = await this.client.request<HistoryPayload>("get-history");
    const ckpts = await this.client.request<{ checkpoints: CheckpointPayload[] }>("get-checkpoints");
    // history before state: the cursor clamp must see the new length
    let model = applyCheckpoints(applyState(applyHistory(this.model, history), state), ckpts.checkpoints);
    if (includeSource) {
      const source = await this.client.request<{ file: string; text: string }>("get-source");
      model = applySource(model, source);
    }
    this.update(model);
  }

  async command(verb: string, args: Record<string, unknown> = {}): Promise<void> {
    if (!this.client) return;
    try {
      const payload = await this.client.request<StopPayload>(verb, args);
      this.update(setNotice(this.model, payload.notice ?? null));
    } catch (err) {
      this.update(setNotice(this.model, String((err as Error).message ?? err)));
    }
    await this.refresh();
  }

  async reverseWatch(expr: string): Promise<void> {
    if (!this.client) return;
    try {
      const payload = await this.client.request<WatchPayload>("reverse-watch", { expr });
      // the search lands on the witness; its prefix is the new history length
      const state = await this.client.request<StatePayload>("get-state");
      this.update(applyWatchResult(applyState(this.model, state), payload, state.history_len));
    } catch (err) {
      this.update(setNotice(this.model, String((err as Error).message ?? err)));
    }
    await this.refresh();
  }

  private wireDom(): void {
    this.root.addEventListener("click", (ev) => {
      const target = ev.target as HTMLElement;
      const cmd = target.getAttribute("data-cmd");
      if (cmd) {
        void this.command(cmd);
        return;
      }
      const action = target.getAttribute("data-action");
      if (action === "reconnect") {
        void this.connect();
      } else if (action === "undo") {
        const slider = this.root.querySelector<HTMLInputElement>('[data-role="undo-k"]');
        void this.command("undo", { k: Number(slider?.value ?? 1) });
      }
    });
    this.root.addEventListener("submit", (ev) => {
      const form = ev.target as HTMLElement;
      if (form.getAttribute("data-role") === "watch-form") {
        ev.preventDefault();
        const input = form.querySelector<HTMLInputElement>('[data-role="watch-expr"]');
        const expr = input?.value.trim();
        if (expr) void this.reverseWatch(expr);
      }
    });
  }
}
