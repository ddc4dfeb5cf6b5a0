#!/usr/bin/env python3
"""Generate a synthetic utterance corpus (JSONL) for pipeline experiments.

The IPA strings are sampled from the embedded segment inventory with
random diacritics, ties, and word/syllable boundaries, so they exercise
the tokenizer, the stripper, and manifest generation end to end.
"""
import argparse
import json
import sys

import numpy as np

BASES = list("ptkbdmnszfvaeiou") + ["ʃ", "ŋ", "æ", "ɔ", "ə", "ɪ"]
MARKS = ["ʰ", "ʲ", "ː", "̆", "̃", "̥", "́"]
TIES = ["͡", "͜"]
LANGS = ["eng", "deu", "fra", "tam", "cmn", "unk"]


def random_ipa(rng: np.random.Generator, max_units: int) -> str:
    parts = []
    for _ in range(int(rng.integers(2, max_units))):
        roll = rng.random()
        if roll < 0.12:
            parts.append(" ")
        elif roll < 0.2:
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
    parser.add_argument("--utterances", type=int, default=200)
    parser.add_argument("--seed", type=int, default=13)
    parser.add_argument("--max-units", type=int, default=12)
    parser.add_argument("--out", default="-")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    try:
        for i in range(args.utterances):
            record = {
                "id": f"syn{i:05d}",
                "lang": str(rng.choice(LANGS)),
                "text": f"synthetic utterance {i}",
                "ipa": random_ipa(rng, args.max_units),
                "duration_s": round(float(rng.uniform(0.4, 12.0)), 3),
            }
            out.write(json.dumps(record, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
