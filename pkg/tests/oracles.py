"""Brute-force reference implementations used to check the fast paths.

These deliberately avoid the production recurrences: edit distance is an
exhaustive recursion over edit scripts, CTC quantities come from summing
over every one of the V^T frame paths, and joint decoding enumerates all
label sequences.  Only usable at tiny sizes.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_edit_distance(hyp, ref, subst, ins=Fraction(1), dele=Fraction(1)) -> Fraction:
    """Exhaustive minimum over all edit scripts transforming hyp into ref."""

    def best(i: int, j: int) -> Fraction:
        if i == len(hyp) and j == len(ref):
            return Fraction(0)
        options = []
        if i < len(hyp):
            options.append(dele + best(i + 1, j))
        if j < len(ref):
            options.append(ins + best(i, j + 1))
        if i < len(hyp) and j < len(ref):
            options.append(Fraction(subst(hyp[i], ref[j])) + best(i + 1, j + 1))
        return min(options)

    return best(0, 0)


def collapse(path: tuple[int, ...], blank: int = 0) -> tuple[int, ...]:
    """CTC collapse: merge repeats, then drop blanks."""
    merged = [k for k, _ in itertools.groupby(path)]
    return tuple(k for k in merged if k != blank)


def ctc_label_probs(log_matrix: np.ndarray, blank: int = 0) -> dict[tuple[int, ...], float]:
    """Total probability of every label sequence, by enumerating frame paths."""
    t_max, v = log_matrix.shape
    probs = np.exp(log_matrix)
    out: dict[tuple[int, ...], float] = {}
    for path in itertools.product(range(v), repeat=t_max):
        p = 1.0
        for t, k in enumerate(path):
            p *= probs[t, k]
        key = collapse(path, blank)
        out[key] = out.get(key, 0.0) + p
    return out


def brute_ctc_nll(log_matrix: np.ndarray, target: tuple[int, ...]) -> float:
    total = ctc_label_probs(log_matrix).get(tuple(target), 0.0)
    return -math.log(total) if total > 0 else math.inf


def brute_prefix_prob(log_matrix: np.ndarray, prefix: tuple[int, ...]) -> float:
    """Probability the output begins with ``prefix`` (proper or improper)."""
    n = len(prefix)
    return sum(p for seq, p in ctc_label_probs(log_matrix).items() if seq[:n] == tuple(prefix))


def brute_sequence_prob(log_matrix: np.ndarray, seq: tuple[int, ...]) -> float:
    return ctc_label_probs(log_matrix).get(tuple(seq), 0.0)


def attention_total(scorer, tokens: tuple[int, ...], eos: int) -> float:
    """Cumulative attention log-prob of a finished sequence, end token included."""
    total = 0.0
    for i, tok in enumerate(tokens):
        total += scorer.next_log_probs(tokens[:i])[tok]
    total += scorer.next_log_probs(tokens)[eos]
    return total


def brute_joint_argmax(
    log_matrix: np.ndarray,
    scorer,
    lam: float,
    max_len: int,
    eos: int,
) -> tuple[tuple[int, ...], float]:
    """Exhaustive argmax of the joint score over sequences up to max_len.

    Ties break exactly like the beam search: higher score, then
    lexicographically smaller token tuple.
    """
    label_probs = ctc_label_probs(log_matrix)
    v = log_matrix.shape[1]
    best: tuple[float, tuple[int, ...]] | None = None
    for length in range(max_len + 1):
        for seq in itertools.product(range(1, v), repeat=length):
            if lam > 0:
                p = label_probs.get(seq, 0.0)
                ctc_score = math.log(p) if p > 0 else -math.inf
            else:
                ctc_score = 0.0
            att_score = attention_total(scorer, seq, eos) if lam < 1 else 0.0
            if lam == 0:
                score = att_score
            elif lam == 1:
                score = ctc_score
            else:
                score = lam * ctc_score + (1 - lam) * att_score
            key = (-score, seq)
            if best is None or key < (-best[0], best[1]):
                best = (score, seq)
    assert best is not None
    return best[1], best[0]
