/** Test-only plumbing: a raw TCP transport (node `net`) and a spawner
 * for a live chronoscope server. The UI source stays browser-only; the
 * protocol client is transport-agnostic, so tests drive it over TCP
 * directly. */

import { spawn, type ChildProcess } from "node:child_process";
import net from "node:net";
import path from "node:path";
import { fileURLToPath } from "node:url";
import type { Transport } from "../src/protocol.js";

export const REPO_ROOT = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..", "..");

export function tcpTransport(host: string, port: number): Transport {
  const sock = net.createConnection({ host, port });
  sock.setEncoding("utf-8");
  const transport: Transport = {
    send: (text) => sock.write(text),
    close: () => sock.destroy(),
    onData: null,
    onClose: null,
  };
  sock.on("data", (chunk: string) => transport.onData?.(chunk));
  sock.on("close", () => transport.onClose?.());
  sock.on("error", () => transport.onClose?.());
  return transport;
}

export interface LiveServer {
  port: number;
  proc: ChildProcess;
  stop(): Promise<void>;
}

async function portOpen(port: number): Promise<boolean> {
  return new Promise((resolve) => {
    const sock = net.createConnection({ host: "127.0.0.1", port });
    sock.once("connect", () => {
      sock.destroy();
      resolve(true);
    });
    sock.once("error", () => resolve(false));
  });
}

export async function waitForPort(port: number, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (await portOpen(port)) return;
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error(`server did not open port ${port}`);
}

export async function startServer(extraArgs: string[] = [], port?: number): Promise<LiveServer> {
  for (let attempt = 0; attempt < 10; attempt++) {
    const p = port ?? 20000 + Math.floor(Math.random() * 40000);
    const proc = spawn(
      "python3",
      [
        "-m",
        "chronoscope.repl",
        "--vm",
        path.join(REPO_ROOT, "fixtures", "fact_iter.tvm"),
        "--serve",
        String(p),
        ...extraArgs,
      ],
      { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
    );
    let stderr = "";
    proc.stderr?.on("data", (d) => (stderr += d));
    try {
      await waitForPort(p);
    } catch (err) {
      proc.kill();
      if (port !== undefined) throw new Error(`${err}: ${stderr}`);
      continue; // port collision: retry another random port
    }
    return {
      port: p,
      proc,
      stop: () =>
        new Promise<void>((resolve) => {
          if (proc.exitCode !== null) return resolve();
          proc.once("exit", () => resolve());
          proc.kill();
          setTimeout(() => resolve(), 2000);
        }),
    };
  }
  throw new Error("could not find a free port");
}
