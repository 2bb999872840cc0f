/**
 * Client for the engine's stdio session protocol.
 *
 * The protocol is strictly lockstep (one JSON line in, one JSON line out),
 * so requests are queued and resolved in order.  Protocol-level failures
 * ({"ok": false}) become thrown EngineError; transport problems (process
 * death, malformed lines) become SessionError.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

/** The engine reported a failed operation; the session stays usable. */
export class EngineError extends Error {}

/** The session transport itself broke. */
export class SessionError extends Error {}

export interface SessionOptions {
  /** Path to a grammar text file (compiled at startup), or ... */
  grammarPath?: string;
  /** ... path to a precompiled bundle. Exactly one must be given. */
  bundlePath?: string;
  vocabPath: string;
  /** Rollback window (accepted tokens). */
  historyWindow?: number;
  /** Extra pipeline flags, e.g. ["--no-ctx-expansion"]. */
  pipelineFlags?: string[];
  /** Python executable launching the engine. */
  python?: string;
}

interface Pending {
  resolve: (doc: Record<string, unknown>) => void;
  reject: (err: Error) => void;
}

export interface SessionInfo {
  vocabSize: number;
  eosId: number;
}

export class Session {
  private proc: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private pending: Pending[] = [];
  private dead: Error | null = null;
  readonly info: SessionInfo;

  private constructor(proc: ChildProcessWithoutNullStreams, info: SessionInfo) {
    this.proc = proc;
    this.info = info;
    this.lines = createInterface({ input: proc.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    proc.on("exit", () => this.onExit());
    proc.stderr.on("data", () => undefined); // engine diagnostics, not protocol
  }

  static async start(opts: SessionOptions): Promise<Session> {
    if (!opts.grammarPath === !opts.bundlePath) {
      throw new SessionError("exactly one of grammarPath or bundlePath is required");
    }
    const args = [
      "-m",
      "grammask.cli",
      "session",
      "--vocab",
      opts.vocabPath,
      "--window",
      String(opts.historyWindow ?? 32),
      ...(opts.grammarPath ? ["--grammar", opts.grammarPath] : []),
      ...(opts.bundlePath ? ["--bundle", opts.bundlePath] : []),
      ...(opts.pipelineFlags ?? []),
    ];
    const proc = spawn(opts.python ?? "python3", args, { stdio: "pipe" });
    const ready = await new Promise<Record<string, unknown>>((resolve, reject) => {
      const rl = createInterface({ input: proc.stdout });
      const bail = (msg: string) => {
        rl.close();
        reject(new SessionError(msg));
      };
      proc.once("exit", (code) => bail(`engine exited with code ${code} before ready`));
      rl.once("line", (line) => {
        rl.close();
        rl.removeAllListeners();
        try {
          resolve(JSON.parse(line));
        } catch {
          bail(`bad ready line: ${line}`);
        }
      });
    });
    if (!ready["ok"] || !ready["ready"]) {
      throw new SessionError(`engine not ready: ${JSON.stringify(ready)}`);
    }
    return new Session(proc, {
      vocabSize: ready["vocab_size"] as number,
      eosId: ready["eos_id"] as number,
    });
  }

  private onLine(line: string) {
    const waiter = this.pending.shift();
    if (!waiter) return;
    let doc: Record<string, unknown>;
    try {
      doc = JSON.parse(line);
    } catch {
      waiter.reject(new SessionError(`malformed response: ${line}`));
      return;
    }
    waiter.resolve(doc);
  }

  private onExit() {
    this.dead = new SessionError("engine process exited");
    for (const waiter of this.pending.splice(0)) {
      waiter.reject(this.dead);
    }
  }

  /** Send one request; resolves with the response object on ok=true. */
  async request(doc: Record<string, unknown>): Promise<Record<string, unknown>> {
    if (this.dead) throw this.dead;
    const reply = await new Promise<Record<string, unknown>>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.proc.stdin.write(JSON.stringify(doc) + "\n");
    });
    if (!reply["ok"]) {
      throw new EngineError(String(reply["error"] ?? "engine error"));
    }
    return reply;
  }

  /** Politely stop the engine and wait for it to exit. */
  async close(): Promise<void> {
    if (this.dead) return;
    try {
      await this.request({ op: "exit" });
    } catch {
      // transport died mid-exit; the wait below still applies
    }
    this.proc.stdin.end();
    await new Promise<void>((resolve) => {
      if (this.proc.exitCode !== null) return resolve();
      this.proc.once("exit", () => resolve());
    });
  }
}
