// Harness for integration tests: spawn the simulator CLI, connect with the
// node ws client, and await wire messages by predicate.

import { spawn, type ChildProcess } from "node:child_process";
import WebSocket from "ws";

const REPO_ROOT = new URL("../..", import.meta.url).pathname;

export type Wire = { type: string; t: number | null; payload: any } | { v: number };

export class Stream {
  readonly msgs: Wire[] = [];
  private waiters: {
    pred: (m: Wire) => boolean;
    resolve: (m: Wire) => void;
  }[] = [];

  push(m: Wire): void {
    this.msgs.push(m);
    this.waiters = this.waiters.filter((w) => {
      if (!w.pred(m)) return true;
      w.resolve(m);
      return false;
    });
  }

  next(pred: (m: Wire) => boolean, timeoutMs = 30000, label = "message"): Promise<Wire> {
    const hit = this.msgs.find(pred);
    if (hit) return Promise.resolve(hit);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out waiting for ${label}`)),
        timeoutMs,
      );
      this.waiters.push({
        pred,
        resolve: (m) => {
          clearTimeout(timer);
          resolve(m);
        },
      });
    });
  }

  states(): { t: number; payload: any }[] {
    return this.msgs.filter((m) => "type" in m && m.type === "state") as never;
  }
}

export interface Server {
  proc: ChildProcess;
  port: number;
  stderr: string;
  stop: () => void;
}

/** Start `handover <args> --port N` on a random port, retrying on collisions. */
export async function startServer(args: string[]): Promise<Server> {
  for (let attempt = 0; attempt < 4; attempt++) {
    const port = 20000 + Math.floor(Math.random() * 30000);
    const proc = spawn("python3", ["-m", "handover.cli", ...args, "--port", String(port)], {
      cwd: REPO_ROOT,
      env: { ...process.env, HANDOVER_LOG_LEVEL: "WARNING" },
    });
    let stderr = "";
    proc.stderr?.on("data", (d) => (stderr += d));
    const up = await waitForPort(port, proc);
    if (up) {
      return { proc, port, stderr, stop: () => proc.kill("SIGTERM") };
    }
    proc.kill("SIGTERM");
    if (!stderr.includes("error:")) {
      throw new Error(`server never came up on :${port}\n${stderr}`);
    }
    // bind failure -> roll a new port
  }
  throw new Error("no free port found");
}

function waitForPort(port: number, proc: ChildProcess): Promise<boolean> {
  return new Promise((resolve) => {
    let exited = false;
    proc.on("exit", () => {
      exited = true;
      resolve(false);
    });
    const probe = () => {
      if (exited) return;
      const ws = new WebSocket(`ws://127.0.0.1:${port}/ws`);
      ws.on("open", () => {
        ws.close();
        resolve(true);
      });
      ws.on("error", () => setTimeout(probe, 150));
    };
    setTimeout(probe, 300);
    setTimeout(() => resolve(false), 20000);
  });
}

export function connect(port: number): Promise<{ ws: WebSocket; stream: Stream }> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(`ws://127.0.0.1:${port}/ws`);
    const stream = new Stream();
    ws.on("message", (data) => stream.push(JSON.parse(String(data))));
    ws.on("open", () => resolve({ ws, stream }));
    ws.on("error", reject);
  });
}

/** Run a CLI subcommand to completion; resolves with its exit code. */
export function runCli(args: string[]): Promise<{ code: number; out: string; err: string }> {
  return new Promise((resolve) => {
    const proc = spawn("python3", ["-m", "handover.cli", ...args], {
      cwd: REPO_ROOT,
      env: { ...process.env, HANDOVER_LOG_LEVEL: "WARNING" },
    });
    let out = "";
    let err = "";
    proc.stdout?.on("data", (d) => (out += d));
    proc.stderr?.on("data", (d) => (err += d));
    proc.on("exit", (code) => resolve({ code: code ?? -1, out, err }));
  });
}
