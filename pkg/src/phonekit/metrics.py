"""Weighted edit-distance alignment and the error-rate metric suite.

PFER substitutes at articulatory-feature cost (k/24) with unit insertions
and deletions, normalized by reference phone count.  PER/PTER/WER/CER are
unit-cost edit distances over phones, phone scalars, words, and characters.
All arithmetic is exact (``fractions.Fraction``); floats appear only when
reports are rendered.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .features import FeatureTable, phone_distance
from .ipa import MarkClassTable, PhoneSequence, normalize_nfd, pter_tokens, strip_slashes, tokenize


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class EditOp:
    kind: str  # "match" | "substitute" | "insert" | "delete"
    hyp_index: int | None
    ref_index: int | None
    cost: Fraction


@dataclass(frozen=True)
class AlignmentResult:
    cost: Fraction
    ops: tuple[EditOp, ...]


def weighted_edit_distance(
    hyp: Sequence,
    ref: Sequence,
    subst_cost: Callable[[object, object], Fraction],
    ins_cost: Fraction = Fraction(1),
    del_cost: Fraction = Fraction(1),
) -> AlignmentResult:
    """Minimal-cost alignment transforming ``hyp`` into ``ref``.

    Ties are broken match/substitute first, then delete, then insert, so
    the returned op trace is reproducible byte for byte.
    """
    m, n = len(hyp), len(ref)
    ins_cost, del_cost = Fraction(ins_cost), Fraction(del_cost)
    bound = ins_cost + del_cost

    # cost[i][j]: transform hyp[:i] into ref[:j]; moves[i][j]: chosen op.
    cost = [[Fraction(0)] * (n + 1) for _ in range(m + 1)]
    move = [[""] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        cost[i][0] = cost[i - 1][0] + del_cost
        move[i][0] = "D"
    for j in range(1, n + 1):
        cost[0][j] = cost[0][j - 1] + ins_cost
        move[0][j] = "I"
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            sub = Fraction(subst_cost(hyp[i - 1], ref[j - 1]))
            if not (0 <= sub <= bound):
                raise MetricError(
                    f"substitution cost {sub} outside [0, {bound}] for pair "
                    f"({hyp[i - 1]!r}, {ref[j - 1]!r})"
                )
            diag = cost[i - 1][j - 1] + sub
            up = cost[i - 1][j] + del_cost
            left = cost[i][j - 1] + ins_cost
            best, op = diag, "S"
            if up < best:
                best, op = up, "D"
            if left < best:
                best, op = left, "I"
            cost[i][j] = best
            move[i][j] = op

    ops: list[EditOp] = []
    i, j = m, n
    while i > 0 or j > 0:
        op = move[i][j]
        if op == "S":
            sub = cost[i][j] - cost[i - 1][j - 1]
            kind = "match" if hyp[i - 1] == ref[j - 1] else "substitute"
            ops.append(EditOp(kind=kind, hyp_index=i - 1, ref_index=j - 1, cost=sub))
            i, j = i - 1, j - 1
        elif op == "D":
            ops.append(EditOp(kind="delete", hyp_index=i - 1, ref_index=None, cost=del_cost))
            i -= 1
        else:
            ops.append(EditOp(kind="insert", hyp_index=None, ref_index=j - 1, cost=ins_cost))
            j -= 1
    ops.reverse()
    return AlignmentResult(cost=cost[m][n], ops=tuple(ops))


def _unit_distance(hyp_items: Sequence, ref_items: Sequence) -> Fraction:
    result = weighted_edit_distance(
        hyp_items, ref_items, lambda a, b: Fraction(0) if a == b else Fraction(1)
    )
    return result.cost


def per(hyp: PhoneSequence, ref: PhoneSequence) -> Fraction:
    """Exact-match phone error rate."""
    if ref.phone_count == 0:
        raise MetricError("empty reference")
    return _unit_distance(hyp.surfaces(), ref.surfaces()) / ref.phone_count


def pter(hyp: PhoneSequence, ref: PhoneSequence) -> Fraction:
    """Phone-token error rate: bases and marks scored as separate tokens."""
    ref_toks = pter_tokens(ref)
    if not ref_toks:
        raise MetricError("empty reference")
    return _unit_distance(pter_tokens(hyp), ref_toks) / len(ref_toks)


def wer(hyp_words: Sequence[str], ref_words: Sequence[str]) -> Fraction:
    if not ref_words:
        raise MetricError("empty reference")
    return _unit_distance(hyp_words, ref_words) / len(ref_words)


def cer(hyp_chars: Sequence[str], ref_chars: Sequence[str]) -> Fraction:
    if not ref_chars:
        raise MetricError("empty reference")
    return _unit_distance(hyp_chars, ref_chars) / len(ref_chars)


def pfer_alignment(
    hyp: PhoneSequence,
    ref: PhoneSequence,
    table: FeatureTable,
    *,
    fallback: str = "strip-marks",
) -> AlignmentResult:
    """Feature-weighted alignment: substitution k/24, insertion/deletion 1."""
    hyp_vecs = [table.lookup(t, fallback=fallback).vector for t in hyp.tokens]
    ref_vecs = [table.lookup(t, fallback=fallback).vector for t in ref.tokens]
    return weighted_edit_distance(hyp_vecs, ref_vecs, phone_distance)


def pfer(
    hyp: PhoneSequence,
    ref: PhoneSequence,
    table: FeatureTable,
    *,
    fallback: str = "strip-marks",
) -> Fraction:
    """Phonetic feature error rate for one utterance pair."""
    if ref.phone_count == 0:
        raise MetricError("empty reference")
    return pfer_alignment(hyp, ref, table, fallback=fallback).cost / ref.phone_count


METRICS = ("pfer", "per", "pter", "wer", "cer")


@dataclass(frozen=True)
class UtteranceScore:
    id: str
    lang: str
    distance: Fraction
    ref_units: int

    @property
    def score(self) -> Fraction:
        return self.distance / self.ref_units


@dataclass(frozen=True)
class CorpusScore:
    metric: str
    per_utterance: tuple[UtteranceScore, ...]
    failures: tuple[tuple[str, str], ...] = field(default=())

    @property
    def total_distance(self) -> Fraction:
        return sum((u.distance for u in self.per_utterance), Fraction(0))

    @property
    def total_ref_units(self) -> int:
        return sum(u.ref_units for u in self.per_utterance)

    @property
    def per_language(self) -> dict[str, tuple[Fraction, int]]:
        out: dict[str, tuple[Fraction, int]] = {}
        for u in self.per_utterance:
            dist, units = out.get(u.lang, (Fraction(0), 0))
            out[u.lang] = (dist + u.distance, units + u.ref_units)
        return dict(sorted(out.items()))

    def score(self, average: str = "micro") -> Fraction:
        """Micro: total distance over total reference units.  Macro: mean of
        per-utterance scores."""
        if not self.per_utterance:
            raise MetricError("no scored utterances")
        if average == "micro":
            return self.total_distance / self.total_ref_units
        if average == "macro":
            return sum((u.score for u in self.per_utterance), Fraction(0)) / len(self.per_utterance)
        raise MetricError(f"unknown average {average!r}")


def _metric_units(
    metric: str,
    hyp_text: str,
    ref_text: str,
    table: FeatureTable | None,
    marks: MarkClassTable | None,
    mode: str,
    fallback: str,
) -> tuple[Fraction, int]:
    """Distance and reference-unit count for one pair of raw texts."""
    if metric in ("pfer", "per", "pter"):
        hyp_seq = tokenize(strip_slashes(hyp_text), marks, mode=mode)
        ref_seq = tokenize(strip_slashes(ref_text), marks, mode="strict")
        if metric == "pfer":
            if table is None:
                raise MetricError("pfer requires a feature table")
            if ref_seq.phone_count == 0:
                raise MetricError("empty reference")
            return pfer_alignment(hyp_seq, ref_seq, table, fallback=fallback).cost, ref_seq.phone_count
        if metric == "per":
            if ref_seq.phone_count == 0:
                raise MetricError("empty reference")
            return _unit_distance(hyp_seq.surfaces(), ref_seq.surfaces()), ref_seq.phone_count
        ref_toks = pter_tokens(ref_seq)
        if not ref_toks:
            raise MetricError("empty reference")
        return _unit_distance(pter_tokens(hyp_seq), ref_toks), len(ref_toks)
    if metric == "wer":
        ref_words = ref_text.split()
        if not ref_words:
            raise MetricError("empty reference")
        return _unit_distance(hyp_text.split(), ref_words), len(ref_words)
    if metric == "cer":
        ref_chars = list(normalize_nfd(ref_text))
        if not ref_chars:
            raise MetricError("empty reference")
        return _unit_distance(list(normalize_nfd(hyp_text)), ref_chars), len(ref_chars)
    raise MetricError(f"unknown metric {metric!r} (expected one of {METRICS})")


def score_corpus(
    pairs: Iterable[tuple[str, str, str, str]],
    metric: str,
    table: FeatureTable | None = None,
    *,
    marks: MarkClassTable | None = None,
    mode: str = "lenient",
    fallback: str = "strip-marks",
) -> CorpusScore:
    """Score a stream of ``(id, lang, hyp, ref)`` text pairs.

    Hypotheses are tokenized in ``mode`` (lenient by default, so noisy
    output does not abort scoring); references are always strict.  Per-pair
    failures are collected rather than fatal; duplicate ids are fatal.  The
    result is identical regardless of input order.
    """
    seen: set[str] = set()
    scored: list[UtteranceScore] = []
    failures: list[tuple[str, str]] = []
    for utt_id, lang, hyp_text, ref_text in pairs:
        if utt_id in seen:
            raise MetricError(f"duplicate utterance id {utt_id!r}")
        seen.add(utt_id)
        try:
            distance, units = _metric_units(metric, hyp_text, ref_text, table, marks, mode, fallback)
        except MetricError as exc:
            if str(exc).startswith("unknown metric") or "requires a feature table" in str(exc):
                raise
            failures.append((utt_id, str(exc)))
            continue
        except ValueError as exc:
            failures.append((utt_id, str(exc)))
            continue
        scored.append(UtteranceScore(id=utt_id, lang=lang, distance=distance, ref_units=units))
    scored.sort(key=lambda u: u.id)
    failures.sort()
    return CorpusScore(metric=metric, per_utterance=tuple(scored), failures=tuple(failures))


def _render_fraction(x: Fraction) -> str:
    return str(x)


def report_tsv(score: CorpusScore, *, average: str = "micro") -> str:
    """Tabular report: per-utterance rows, per-language rows, summary row."""
    lines = ["id\tlang\tmetric\tdistance\tref_units\tscore"]
    for u in score.per_utterance:
        lines.append(
            f"{u.id}\t{u.lang}\t{score.metric}\t{_render_fraction(u.distance)}"
            f"\t{u.ref_units}\t{float(u.score):.6f}"
        )
    for lang, (dist, units) in score.per_language.items():
        lines.append(
            f"-\t{lang}\t{score.metric}\t{_render_fraction(dist)}\t{units}"
            f"\t{float(dist / units):.6f}"
        )
    total = f"{float(score.score(average)):.6f}" if score.per_utterance else "-"
    lines.append(
        f"corpus\t-\t{score.metric}\t{_render_fraction(score.total_distance)}"
        f"\t{score.total_ref_units}\t{total}"
    )
    if score.failures:
        for utt_id, msg in score.failures:
            lines.append(f"# failed\t{utt_id}\t{msg}")
    return "\n".join(lines) + "\n"


def report_json(score: CorpusScore, *, average: str = "micro") -> str:
    payload = {
        "metric": score.metric,
        "average": average,
        "utterances": [
            {
                "id": u.id,
                "lang": u.lang,
                "distance": _render_fraction(u.distance),
                "ref_units": u.ref_units,
                "score": _render_fraction(u.score),
                "score_float": float(u.score),
            }
            for u in score.per_utterance
        ],
        "languages": {
            lang: {
                "distance": _render_fraction(dist),
                "ref_units": units,
                "score": _render_fraction(dist / units),
                "score_float": float(dist / units),
            }
            for lang, (dist, units) in score.per_language.items()
        },
        "summary": {
            "distance": _render_fraction(score.total_distance),
            "ref_units": score.total_ref_units,
            "score": _render_fraction(score.score(average)) if score.per_utterance else None,
            "score_float": float(score.score(average)) if score.per_utterance else None,
        },
        "failures": [{"id": utt_id, "error": msg} for utt_id, msg in score.failures],
    }
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
