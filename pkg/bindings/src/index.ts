/**
 * Flat bridge to the phonekit core, mirroring its CLI subcommands.
 *
 * Every call shells out to the `phonekit` command and exchanges data through
 * its documented file formats, so results are exactly what the CLI produces.
 * Only the pure text operations are bound; decoding and manifest streaming
 * stay CLI-side.  Scores cross the boundary as the exact rational's decimal
 * text plus a float convenience value.
 */
import { accessSync, constants, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { CliError, cliCommand, runCli, withTempDir } from "./proc.js";

export { CliError, cliCommand };

export interface ScoreValue {
  /** Exact rational rendered as decimal text, e.g. "1/24" or "0". */
  exact: string;
  /** Float convenience value of the same rational. */
  value: number;
}

export interface UtteranceRecord {
  id: string;
  lang: string;
  text: string;
  ipa: string;
  duration_s?: number;
  audio?: string;
}

export interface TaskExample {
  utterance_id: string;
  task: "pr" | "asr" | "g2p" | "p2g";
  task_token: string;
  lang_token: string;
  prompt: string[];
  target: string[];
}

export type Metric = "pfer" | "per" | "pter" | "wer" | "cer";

/** Base for handles over core-owned tables; double release is rejected. */
abstract class Handle {
  #path: string;
  #released = false;

  protected constructor(path: string) {
    accessSync(path, constants.R_OK); // surface missing/unreadable files now
    this.#path = path;
  }

  get path(): string {
    this.assertLive();
    return this.#path;
  }

  get released(): boolean {
    return this.#released;
  }

  release(): void {
    if (this.#released) {
      throw new Error("handle already released");
    }
    this.#released = true;
  }

  protected assertLive(): void {
    if (this.#released) {
      throw new Error("handle already released");
    }
  }
}

/** A loaded feature table, addressed by its file path. */
export class FeatureTableHandle extends Handle {
  /**
   * Open a feature-table file.  With `validate` the core parses the table
   * once (one CLI round trip) so schema errors surface immediately.
   */
  static open(path: string, opts: { validate?: boolean } = {}): FeatureTableHandle {
    const handle = new FeatureTableHandle(path);
    if (opts.validate) {
      withTempDir((dir) => {
        const hyp = join(dir, "h.tsv");
        const ref = join(dir, "r.tsv");
        writeFileSync(hyp, "probe\tp\n", "utf8");
        writeFileSync(ref, "probe\tp\n", "utf8");
        runCli(["score", "--hyp", hyp, "--ref", ref, "--metric", "pfer", "--feature-table", path,
                "--out", join(dir, "out.tsv")]);
      });
    }
    return handle;
  }
}

/** A mark-class override file, addressed by its file path. */
export class MarkTableHandle extends Handle {
  static open(path: string): MarkTableHandle {
    return new MarkTableHandle(path);
  }
}

export interface TokenizeOptions {
  lenient?: boolean;
  marks?: MarkTableHandle;
  stripTones?: boolean;
}

function renderedToSurfaces(line: string): string[] {
  if (!line) {
    return [];
  }
  return line.split(" ").map((unit) => unit.slice(1, -1));
}

function runLines(subcommand: string, texts: string[], flags: string[]): string[] {
  return withTempDir((dir) => {
    const input = join(dir, "in.txt");
    writeFileSync(input, texts.map((t) => t + "\n").join(""), "utf8");
    const out = join(dir, "out.txt");
    runCli([subcommand, input, "--out", out, ...flags]);
    const produced = readFileSync(out, "utf8");
    const lines = produced.length ? produced.replace(/\n$/, "").split("\n") : [];
    if (lines.length !== texts.length) {
      throw new Error(`expected ${texts.length} output lines, got ${lines.length}`);
    }
    return lines;
  });
}

function tokenFlags(opts: TokenizeOptions, withTones: boolean): string[] {
  const flags: string[] = [];
  if (opts.lenient) {
    flags.push("--lenient");
  }
  if (opts.marks) {
    flags.push("--marks-table", opts.marks.path);
  }
  if (withTones && opts.stripTones) {
    flags.push("--strip-tones");
  }
  return flags;
}

/** Split IPA text into phone token surfaces. */
export function tokenize(text: string, opts: TokenizeOptions = {}): string[] {
  return tokenizeLines([text], opts)[0];
}

/** Batch form of {@link tokenize}: one core invocation for many lines. */
export function tokenizeLines(texts: string[], opts: TokenizeOptions = {}): string[][] {
  return runLines("tokenize", texts, tokenFlags(opts, false)).map(renderedToSurfaces);
}

/** Remove length marks, syllable breaks, and ties; returns token surfaces. */
export function strip(text: string, opts: TokenizeOptions = {}): string[] {
  return stripLines([text], opts)[0];
}

export function stripLines(texts: string[], opts: TokenizeOptions = {}): string[][] {
  return runLines("strip", texts, tokenFlags(opts, true)).map(renderedToSurfaces);
}

/** Apply the English VOT/allophony corrections; returns plain IPA text. */
export function refineG2p(text: string, table?: FeatureTableHandle): string {
  return refineG2pLines([text], table)[0];
}

export function refineG2pLines(texts: string[], table?: FeatureTableHandle): string[] {
  const flags = table ? ["--feature-table", table.path] : [];
  return runLines("refine-g2p", texts, flags);
}

export interface ScoredPair {
  id: string;
  hyp: string;
  ref: string;
  lang?: string;
}

interface ScoreReport {
  utterances: { id: string; score: string; score_float: number }[];
  failures: { id: string; error: string }[];
}

/** Score many pairs in one core invocation; per-pair failures throw. */
export function scorePairs(
  pairs: ScoredPair[],
  metric: Metric,
  table?: FeatureTableHandle,
): Map<string, ScoreValue> {
  const report = withTempDir((dir) => {
    const hyp = join(dir, "h.tsv");
    const ref = join(dir, "r.tsv");
    const lines = (key: "hyp" | "ref") =>
      pairs.map((p) => `${p.id}\t${p.lang ?? "unk"}\t${p[key]}\n`).join("");
    writeFileSync(hyp, lines("hyp"), "utf8");
    writeFileSync(ref, lines("ref"), "utf8");
    const out = join(dir, "report.json");
    const flags = ["score", "--hyp", hyp, "--ref", ref, "--metric", metric, "--format", "json", "--out", out];
    if (table) {
      flags.push("--feature-table", table.path);
    }
    runCli(flags);
    return JSON.parse(readFileSync(out, "utf8")) as ScoreReport;
  });
  if (report.failures.length > 0) {
    const first = report.failures[0];
    throw new Error(`${first.id}: ${first.error}`);
  }
  const result = new Map<string, ScoreValue>();
  for (const u of report.utterances) {
    result.set(u.id, { exact: u.score, value: u.score_float });
  }
  return result;
}

function scoreOne(hyp: string, ref: string, metric: Metric, table?: FeatureTableHandle): ScoreValue {
  const scores = scorePairs([{ id: "u0", hyp, ref }], metric, table);
  const value = scores.get("u0");
  if (!value) {
    throw new Error("scoring produced no result");
  }
  return value;
}

/** Articulatory-feature error rate of one pair. */
export function pfer(hyp: string, ref: string, table?: FeatureTableHandle): ScoreValue {
  return scoreOne(hyp, ref, "pfer", table);
}

/** Exact-match phone error rate of one pair. */
export function per(hyp: string, ref: string): ScoreValue {
  return scoreOne(hyp, ref, "per");
}

/** Phone-token error rate (diacritics as separate tokens) of one pair. */
export function pter(hyp: string, ref: string): ScoreValue {
  return scoreOne(hyp, ref, "pter");
}

/** Build the four task examples (PR, ASR, G2P, P2G) for one utterance. */
export function buildExamples(utt: UtteranceRecord): TaskExample[] {
  return buildExamplesBatch([utt])[0];
}

/** Batch form of {@link buildExamples}: one core invocation. */
export function buildExamplesBatch(utts: UtteranceRecord[]): TaskExample[][] {
  const grouped = withTempDir((dir) => {
    const corpus = join(dir, "corpus.jsonl");
    writeFileSync(corpus, utts.map((u) => JSON.stringify(u) + "\n").join(""), "utf8");
    const outDir = join(dir, "out");
    runCli(["make-manifests", corpus, "--out-dir", outDir]);
    const lines = readFileSync(join(outDir, "examples.jsonl"), "utf8")
      .replace(/\n$/, "")
      .split("\n")
      .filter((l) => l.length > 0);
    const byId = new Map<string, TaskExample[]>();
    for (const line of lines) {
      const example = JSON.parse(line) as TaskExample;
      const bucket = byId.get(example.utterance_id) ?? [];
      bucket.push(example);
      byId.set(example.utterance_id, bucket);
    }
    return byId;
  });
  return utts.map((u) => {
    const examples = grouped.get(u.id);
    if (!examples || examples.length !== 4) {
      throw new Error(`utterance ${u.id} did not produce 4 examples (was it filtered?)`);
    }
    return examples;
  });
}
