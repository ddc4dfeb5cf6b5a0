/**
 * Equivalence suite: every vector in the shared golden file must come back
 * identical through the bindings.  The golden outputs were produced by the
 * core, and the bindings reach the core through its CLI, so this pins the
 * whole bridge: argument wiring, file formats, and parsing.
 */
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  buildExamples,
  buildExamplesBatch,
  per,
  pfer,
  pter,
  refineG2p,
  refineG2pLines,
  scorePairs,
  strip,
  stripLines,
  tokenize,
  tokenizeLines,
  type Metric,
  type TaskExample,
  type UtteranceRecord,
} from "../src/index.js";

const GOLDEN = fileURLToPath(new URL("../../tests/data/golden_vectors.jsonl", import.meta.url));

interface Vector {
  kind: string;
  input?: string;
  tokens?: string[];
  text?: string;
  id?: string;
  hyp?: string;
  ref?: string;
  exact?: string;
  value?: number;
  utt?: UtteranceRecord;
  examples?: TaskExample[];
}

const vectors: Vector[] = readFileSync(GOLDEN, "utf8")
  .trim()
  .split("\n")
  .map((line) => JSON.parse(line));

const byKind = (kind: string) => vectors.filter((v) => v.kind === kind);

it("golden file carries at least 1000 vectors", () => {
  expect(vectors.length).toBeGreaterThanOrEqual(1000);
});

describe("tokenize", () => {
  const vecs = byKind("tokenize");

  it("matches every golden vector (batch)", () => {
    const got = tokenizeLines(vecs.map((v) => v.input!));
    got.forEach((tokens, i) => expect(tokens, vecs[i].input).toEqual(vecs[i].tokens));
  });

  it("matches single calls", () => {
    expect(tokenize("pʰɔsəm")).toEqual(["pʰ", "ɔ", "s", "ə", "m"]);
    for (const v of vecs.slice(0, 3)) {
      expect(tokenize(v.input!)).toEqual(v.tokens);
    }
  });
});

describe("strip", () => {
  const vecs = byKind("strip");

  it("matches every golden vector (batch)", () => {
    const got = stripLines(vecs.map((v) => v.input!));
    got.forEach((tokens, i) => expect(tokens, vecs[i].input).toEqual(vecs[i].tokens));
  });

  it("matches single calls", () => {
    expect(strip("t͡ʃaː")).toEqual(["t", "ʃ", "a"]);
  });
});

describe("refineG2p", () => {
  const vecs = byKind("refine");

  it("matches every golden vector (batch)", () => {
    const got = refineG2pLines(vecs.map((v) => v.input!));
    got.forEach((text, i) => expect(text, vecs[i].input).toBe(vecs[i].text));
  });

  it("matches single calls", () => {
    expect(refineG2p("bæt")).toBe("pæt");
  });
});

describe("error-rate scoring", () => {
  for (const metric of ["pfer", "per", "pter"] as Metric[]) {
    it(`${metric} matches every golden vector (batch)`, () => {
      const vecs = byKind(metric);
      const scores = scorePairs(
        vecs.map((v) => ({ id: v.id!, hyp: v.hyp!, ref: v.ref! })),
        metric,
      );
      for (const v of vecs) {
        const got = scores.get(v.id!);
        expect(got, v.id).toBeDefined();
        expect(got!.exact, v.id).toBe(v.exact);
        expect(got!.value, v.id).toBe(v.value);
      }
    });
  }

  it("identity scores are exactly zero", () => {
    expect(pfer("pæt", "pæt")).toEqual({ exact: "0", value: 0 });
    expect(per("pa", "pa").exact).toBe("0");
    expect(pter("pʰa", "pʰa").exact).toBe("0");
  });

  it("single-pair calls agree with golden vectors", () => {
    for (const v of byKind("pfer").slice(0, 2)) {
      expect(pfer(v.hyp!, v.ref!).exact).toBe(v.exact);
    }
  });
});

describe("buildExamples", () => {
  const vecs = byKind("examples");

  it("matches every golden vector (batch)", () => {
    const got = buildExamplesBatch(vecs.map((v) => v.utt!));
    got.forEach((examples, i) => expect(examples, vecs[i].utt!.id).toEqual(vecs[i].examples));
  });

  it("single call yields the four cross-consistent records", () => {
    const examples = buildExamples({ id: "x", lang: "eng", text: "possum", ipa: "pʰɔsəm" });
    expect(examples.map((e) => e.task)).toEqual(["pr", "asr", "g2p", "p2g"]);
    const [pr, asr, g2p, p2g] = examples;
    expect(pr.target).toEqual(g2p.target);
    expect(p2g.prompt).toEqual(pr.target);
    expect(asr.target.join("")).toBe("possum");
    expect(pr.prompt).toEqual(["<na>"]);
  });
});
