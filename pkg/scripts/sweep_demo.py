#!/usr/bin/env python3
"""Decode-weight sweep on a synthetic fixture.

Builds a handful of random log-prob matrices with table-driven attention
scorers whose references are planted sequences, then decodes the grid of
CTC weights x beam sizes and prints the per-setting score table.
"""
import argparse
import itertools
import math

import numpy as np

from phonekit import LogProbMatrix, SweepItem, TableAttentionScorer, decode_sweep, sweep_tsv
from phonekit.ctc import EOS

VOCAB = ["<blank>", "a", "b"]


def planted_matrix(rng: np.random.Generator, frames: int, target: tuple[int, ...], sharpness: float):
    """Rows biased toward a blank-padded rendering of the target sequence."""
    vocab = len(VOCAB)
    probs = rng.gamma(1.0, 1.0, size=(frames, vocab)) + 0.2
    slots = np.linspace(0, frames - 1, num=len(target), dtype=int) if target else []
    for slot, tok in zip(slots, target):
        probs[slot, tok] += sharpness
    probs /= probs.sum(axis=1, keepdims=True)
    return LogProbMatrix.from_probs(probs)


def table_scorer(rng: np.random.Generator, frames: int, target: tuple[int, ...], sharpness: float):
    labels = list(range(1, len(VOCAB)))
    table = {}
    for size in range(frames + 1):
        for prefix in itertools.product(labels, repeat=size):
            raw = rng.gamma(1.0, 1.0, size=len(labels) + 1) + 0.2
            if prefix == target:
                raw[0] += sharpness  # favor ending exactly at the target
            elif target[: len(prefix)] == prefix:
                nxt = target[len(prefix)]
                raw[nxt] += sharpness
            probs = raw / raw.sum()
            dist = {EOS: math.log(probs[0])}
            for i, tok in enumerate(labels):
                dist[tok] = math.log(probs[i + 1])
            table[prefix] = dist
    return TableAttentionScorer(table)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--utterances", type=int, default=12)
    parser.add_argument("--frames", type=int, default=5)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--sharpness", type=float, default=4.0)
    parser.add_argument("--lambdas", default="0.3,0.7,0.9")
    parser.add_argument("--beams", default="1,3")
    parser.add_argument("--metric", default="per")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    labels = list(range(1, len(VOCAB)))
    items = []
    for i in range(args.utterances):
        length = int(rng.integers(1, args.frames))
        target = tuple(int(t) for t in rng.choice(labels, size=length))
        items.append(
            SweepItem(
                id=f"u{i:03d}",
                matrix=planted_matrix(rng, args.frames, target, args.sharpness),
                scorer=table_scorer(rng, args.frames, target, args.sharpness),
                reference=" ".join(VOCAB[t] for t in target),
            )
        )
    lambdas = [float(x) for x in args.lambdas.split(",")]
    beams = [int(x) for x in args.beams.split(",")]
    cells = decode_sweep(items, lambdas, beams, VOCAB, metric=args.metric)
    print(sweep_tsv(cells), end="")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
