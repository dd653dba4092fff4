/** Browser entry point. Browsers cannot open raw TCP sockets, so the
 * UI connects through a WebSocket-to-TCP bridge (e.g.
 * `websockify 7322 localhost:7321` against `chronoscope --serve 7321`)
 * and speaks chronoscope/1 over it unchanged. */

import { TimelineApp } from "./app.js";
import { webSocketTransport } from "./protocol.js";

const root = document.getElementById("app");
if (root) {
  const params = new URLSearchParams(window.location.search);
  const url = params.get("bridge") ?? "ws://localhost:7322/";
  const app = new TimelineApp(root, () => webSocketTransport(url));
  void app.connect();
}
