/**
 * Bindings for the grammask constrained-decoding engine.
 *
 * All grammar semantics live in the engine; these classes marshal bytes,
 * integers and mask buffers across its documented external interfaces
 * (the `compile` CLI for bundles, the stdio session protocol for
 * matchers).  Masks arrive in the engine's wire format and are written
 * into caller-owned Uint32Array buffers unchanged.
 */

import { execFile } from "node:child_process";
import { mkdtemp, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";

import { decodeHexInto, maskWordCount } from "./bitset.js";
import { EngineError, Session, type SessionOptions } from "./session.js";

export { EngineError, Session, SessionError, type SessionOptions } from "./session.js";
export * as bitset from "./bitset.js";

const execFileAsync = promisify(execFile);

export interface CompileOptions {
  inline?: boolean;
  merge?: boolean;
  cache?: boolean;
  ctxExpansion?: boolean;
  inlineMaxRuleSize?: number;
  inlineMaxResultSize?: number;
}

export interface BundleHandle {
  bundlePath: string;
  vocabPath: string;
}

function pipelineFlags(options: CompileOptions): string[] {
  const flags: string[] = [];
  if (options.inline === false) flags.push("--no-inline");
  if (options.merge === false) flags.push("--no-merge");
  if (options.cache === false) flags.push("--no-cache");
  if (options.ctxExpansion === false) flags.push("--no-ctx-expansion");
  if (options.inlineMaxRuleSize !== undefined) {
    flags.push("--inline-max-rule-size", String(options.inlineMaxRuleSize));
  }
  if (options.inlineMaxResultSize !== undefined) {
    flags.push("--inline-max-result-size", String(options.inlineMaxResultSize));
  }
  return flags;
}

/**
 * Compile grammar text against a vocabulary into a bundle file.
 *
 * Mirrors the engine's `compile` subcommand; the returned handle opens
 * matchers without recompiling.
 */
export async function compileBundle(
  grammarText: string,
  vocabPath: string,
  options: CompileOptions = {},
  python = "python3",
): Promise<BundleHandle> {
  const dir = await mkdtemp(join(tmpdir(), "grammask-"));
  const grammarPath = join(dir, "grammar.gmk");
  const bundlePath = join(dir, "bundle.gmb");
  await writeFile(grammarPath, grammarText, "utf-8");
  try {
    await execFileAsync(python, [
      "-m",
      "grammask.cli",
      "compile",
      grammarPath,
      "--vocab",
      vocabPath,
      "-o",
      bundlePath,
      ...pipelineFlags(options),
    ]);
  } catch (err) {
    const detail = (err as { stderr?: string }).stderr ?? String(err);
    throw new EngineError(detail.trim());
  }
  return { bundlePath, vocabPath };
}

export interface MatcherOptions extends CompileOptions {
  historyWindow?: number;
  python?: string;
}

/**
 * A matcher over one engine session.
 *
 * The matcher opened by {@link Matcher.open} owns the session: closing it
 * shuts the engine down.  {@link Matcher.branch} returns independent
 * matchers sharing the session.  Every operation on a closed matcher
 * throws; it never crashes the session.
 */
export class Matcher {
  readonly vocabSize: number;
  readonly eosId: number;
  private session: Session;
  private id: number;
  private owner: boolean;
  private closed = false;

  private constructor(session: Session, id: number, owner: boolean) {
    this.session = session;
    this.id = id;
    this.owner = owner;
    this.vocabSize = session.info.vocabSize;
    this.eosId = session.info.eosId;
  }

  /** Start an engine session from a grammar file or compiled bundle. */
  static async open(
    source: { grammarPath?: string; bundlePath?: string },
    vocabPath: string,
    options: MatcherOptions = {},
  ): Promise<Matcher> {
    const sessionOpts: SessionOptions = {
      grammarPath: source.grammarPath,
      bundlePath: source.bundlePath,
      vocabPath,
      historyWindow: options.historyWindow,
      pipelineFlags: pipelineFlags(options),
      python: options.python,
    };
    const session = await Session.start(sessionOpts);
    return new Matcher(session, 0, true);
  }

  /** Open directly from a {@link compileBundle} result. */
  static async fromBundle(handle: BundleHandle, options: MatcherOptions = {}): Promise<Matcher> {
    return Matcher.open({ bundlePath: handle.bundlePath }, handle.vocabPath, options);
  }

  private guard(): void {
    if (this.closed) {
      throw new EngineError(`matcher ${this.id} is closed`);
    }
  }

  /** Mask word count this matcher's buffers must have. */
  get maskWords(): number {
    return maskWordCount(this.vocabSize);
  }

  /** Fetch the current mask as protocol hex. */
  async maskHex(): Promise<string> {
    this.guard();
    const reply = await this.session.request({ op: "mask", m: this.id });
    return reply["mask"] as string;
  }

  /** Write the current mask into a caller-owned word buffer, in place. */
  async fillMaskInto(buffer: Uint32Array): Promise<void> {
    this.guard();
    if (buffer.length !== this.maskWords) {
      throw new RangeError(`mask buffer needs ${this.maskWords} words, got ${buffer.length}`);
    }
    decodeHexInto(await this.maskHex(), buffer);
  }

  /** Consume one token id; false leaves the state unchanged. */
  async acceptToken(id: number): Promise<boolean> {
    this.guard();
    const reply = await this.session.request({ op: "accept_token", m: this.id, id });
    return reply["accepted"] as boolean;
  }

  /** Consume raw bytes; false leaves the state unchanged. */
  async acceptBytes(data: Uint8Array): Promise<boolean> {
    this.guard();
    const reply = await this.session.request({
      op: "accept_bytes",
      m: this.id,
      bytes: Buffer.from(data).toString("hex"),
    });
    return reply["accepted"] as boolean;
  }

  /** Restore the state from `steps` acceptances ago. */
  async rollback(steps: number): Promise<void> {
    this.guard();
    await this.session.request({ op: "rollback", m: this.id, steps });
  }

  /** Split an independent matcher sharing this session. */
  async branch(): Promise<Matcher> {
    this.guard();
    const reply = await this.session.request({ op: "branch", m: this.id });
    return new Matcher(this.session, reply["m"] as number, false);
  }

  /** Grammar-forced bytes from the current state, possibly empty. */
  async jumpForward(): Promise<Uint8Array> {
    this.guard();
    const reply = await this.session.request({ op: "jump_forward", m: this.id });
    return Uint8Array.from(Buffer.from(reply["bytes"] as string, "hex"));
  }

  /** May EOS be accepted right now? */
  async canTerminate(): Promise<boolean> {
    this.guard();
    const reply = await this.session.request({ op: "can_terminate", m: this.id });
    return reply["value"] as boolean;
  }

  /** How many acceptances the rollback window currently holds. */
  async historyDepth(): Promise<number> {
    this.guard();
    const reply = await this.session.request({ op: "history_depth", m: this.id });
    return reply["value"] as number;
  }

  /** Release this matcher; the session-owning matcher stops the engine. */
  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    if (this.owner) {
      await this.session.close();
      return;
    }
    await this.session.request({ op: "close", m: this.id });
  }
}
