#!/usr/bin/env python3
"""Regenerate the shared golden-vector file at tests/data/golden_vectors.jsonl.

Each line is one vector: an input for a public operation together with the
expected output.  The bindings package replays the same inputs through the
command-line interface and must agree exactly, so this file is the shared
contract between the core suite and the bindings suite.
"""
import argparse
import json
from pathlib import Path

import numpy as np

from phonekit import (
    build_examples,
    default_table,
    per,
    pfer,
    pter,
    refine_english,
    render_slash,
    strip_suprasegmentals,
    tokenize,
    Utterance,
)

BASES = list("ptkbdmnszfvaeiou") + ["ʃ", "ŋ", "æ", "ɔ", "ə", "ɪ"]
MARKS = ["ʰ", "ʲ", "ː", "̆", "̃", "̥"]
TIES = ["͡", "͜"]
ENGLISH = list("pbtdkmnszfvhlwj") + ["ɡ", "ŋ", "i", "ɪ", "ɛ", "æ", "ɑ", "ə"]
METRIC_PHONES = ["p", "b", "pʰ", "aː", "s", "æ"]


def random_ipa(rng, with_boundaries=True, max_units=8):
    parts = []
    for _ in range(int(rng.integers(1, max_units))):
        roll = rng.random()
        if with_boundaries and roll < 0.1:
            parts.append(" ")
        elif with_boundaries and roll < 0.16:
            parts.append(".")
        else:
            seg = str(rng.choice(BASES))
            if rng.random() < 0.2:
                seg += str(rng.choice(TIES)) + str(rng.choice(BASES))
            for _ in range(int(rng.integers(0, 3))):
                seg += str(rng.choice(MARKS))
            parts.append(seg)
    return "".join(parts)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=424242)
    parser.add_argument(
        "--out",
        default=str(Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_vectors.jsonl"),
    )
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    table = default_table()
    vectors = []

    vectors.append({
        "kind": "tokenize",
        "input": "pʰɔsəm",
        "tokens": ["pʰ", "ɔ", "s", "ə", "m"],
    })
    for _ in range(399):
        text = random_ipa(rng)
        seq = tokenize(text)
        vectors.append({
            "kind": "tokenize",
            "input": text,
            "tokens": list(seq.surfaces()),
            "rendered": render_slash(seq),
        })

    for _ in range(200):
        text = random_ipa(rng)
        stripped = strip_suprasegmentals(tokenize(text))
        vectors.append({
            "kind": "strip",
            "input": text,
            "tokens": list(stripped.surfaces()),
            "rendered": render_slash(stripped),
        })

    for _ in range(100):
        words = [
            "".join(str(rng.choice(ENGLISH)) for _ in range(int(rng.integers(1, 6))))
            for _ in range(int(rng.integers(1, 3)))
        ]
        text = " ".join(words)
        refined = refine_english(tokenize(text), table=table)
        vectors.append({"kind": "refine", "input": text, "text": refined.text()})

    metric_fns = {"pfer": lambda h, r: pfer(h, r, table), "per": per, "pter": pter}
    for metric, fn in metric_fns.items():
        for i in range(100):
            hyp = "".join(str(rng.choice(METRIC_PHONES)) for _ in range(int(rng.integers(0, 6))))
            ref = "".join(str(rng.choice(METRIC_PHONES)) for _ in range(int(rng.integers(1, 6))))
            value = fn(tokenize(hyp), tokenize(ref))
            vectors.append({
                "kind": metric,
                "id": f"{metric}{i:03d}",
                "hyp": hyp,
                "ref": ref,
                "exact": str(value),
                "value": float(value),
            })

    for i in range(50):
        lang = ("eng", "deu", "tam")[i % 3]
        utt = Utterance(
            id=f"g{i:03d}",
            lang=lang,
            text=f"golden text {i}",
            ipa=random_ipa(rng, with_boundaries=False),
        )
        examples = build_examples(utt)
        vectors.append({
            "kind": "examples",
            "utt": {"id": utt.id, "lang": utt.lang, "text": utt.text, "ipa": utt.ipa},
            "examples": [json.loads(ex.to_json()) for ex in examples],
        })

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for vec in vectors:
            fh.write(json.dumps(vec, ensure_ascii=False, sort_keys=True) + "\n")
    print(f"{len(vectors)} vectors -> {out_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
