"""Exact CTC machinery over supplied log-probability grids.

Covers the blank-extended forward loss, the incremental blank/non-blank
prefix recursions, the weighted CTC+attention loss combination, and
label-synchronous joint beam search where each extension is scored
``lam * delta(ctc prefix score) + (1 - lam) * attention log-prob``.
Everything stays in log space; nothing here trains a model, attention is a
behavioral contract filled by table-driven scorers in tests.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .features import FeatureTable
from .ipa import MarkClassTable, strip_slashes
from .metrics import score_corpus

BLANK = 0
EOS = -1  # end-of-sequence key in attention distributions

_NEG_INF = float("-inf")


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class LogProbMatrix:
    """A frames x vocabulary grid of log-probabilities; index 0 is blank."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 2:
            raise DecodeError(f"matrix must be 2-D, got shape {arr.shape}")
        t, v = arr.shape
        if t < 1 or v < 2:
            raise DecodeError(f"matrix needs >= 1 frame and >= 2 vocab entries, got {arr.shape}")
        if np.isnan(arr).any():
            raise DecodeError("matrix contains NaN")
        if arr.max() > 1e-6:
            raise DecodeError(f"log-probabilities must be <= 0, max is {arr.max()}")
        rows = np.logaddexp.reduce(arr, axis=1)
        worst = np.abs(rows).max()
        if worst > 1e-6:
            raise DecodeError(f"rows must log-sum-exp to 0, worst deviation {worst}")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def vocab(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_probs(cls, probs) -> "LogProbMatrix":
        with np.errstate(divide="ignore"):
            return cls(values=np.log(np.asarray(probs, dtype=np.float64)))


def ctc_forward_loss(matrix: LogProbMatrix, target: Sequence[int]) -> float:
    """Negative log-likelihood of ``target`` under the CTC path sum."""
    x = matrix.values
    t_max, v = x.shape
    target = list(target)
    for tok in target:
        if not (1 <= tok < v):
            raise DecodeError(f"target token {tok} outside [1, {v})")
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    if t_max < len(target) + repeats:
        raise DecodeError(
            f"target longer than frames allow ({len(target)} labels + {repeats} "
            f"required blanks > {t_max} frames)"
        )
    if not target:
        total = float(x[:, BLANK].sum())
        return -total if total < 0 else 0.0

    ext = [BLANK]
    for tok in target:
        ext.extend((tok, BLANK))
    s_len = len(ext)
    alpha = np.full(s_len, _NEG_INF)
    alpha[0] = x[0, BLANK]
    alpha[1] = x[0, ext[1]]
    for t in range(1, t_max):
        prev = alpha
        alpha = np.full(s_len, _NEG_INF)
        for s in range(s_len):
            acc = prev[s]
            if s >= 1:
                acc = np.logaddexp(acc, prev[s - 1])
            if s >= 2 and ext[s] != BLANK and ext[s] != ext[s - 2]:
                acc = np.logaddexp(acc, prev[s - 2])
            alpha[s] = acc + x[t, ext[s]]
    total = float(np.logaddexp(alpha[-1], alpha[-2]))
    nll = -total
    if -1e-9 < nll < 0:
        nll = 0.0
    return nll


def hybrid_loss(ctc_nll: float, att_nll: float, alpha: float = 0.3) -> float:
    """Weighted loss combination ``alpha * ctc + (1 - alpha) * attention``."""
    if not 0 <= alpha <= 1:
        raise DecodeError(f"alpha must lie in [0, 1], got {alpha}")
    if not (np.isfinite(ctc_nll) and np.isfinite(att_nll)):
        raise DecodeError("losses must be finite")
    if alpha == 0:
        return float(att_nll)
    if alpha == 1:
        return float(ctc_nll)
    return float(alpha * ctc_nll + (1 - alpha) * att_nll)


@dataclass(frozen=True)
class PrefixState:
    """Per-prefix forward mass: ``r_nb[t]``/``r_b[t]`` are log-probabilities
    that frames 0..t collapse to exactly this prefix with the path currently
    on the last label / on blank.  ``log_psi`` is the prefix score: the log
    probability that the full output begins with the prefix."""

    tokens: tuple[int, ...]
    r_nb: np.ndarray
    r_b: np.ndarray
    log_psi: float


class CtcPrefixScorer:
    """Incremental prefix probabilities over one log-prob matrix."""

    def __init__(self, matrix: LogProbMatrix):
        self.matrix = matrix
        self._x = matrix.values

    def initial(self) -> PrefixState:
        t_max = self.matrix.frames
        r_nb = np.full(t_max, _NEG_INF)
        r_b = np.cumsum(self._x[:, BLANK])
        return PrefixState(tokens=(), r_nb=r_nb, r_b=r_b, log_psi=0.0)

    def extend(self, state: PrefixState, token: int) -> PrefixState:
        """State for ``prefix + (token,)``; its ``log_psi`` is the score."""
        x = self._x
        t_max, v = x.shape
        if not (1 <= token < v):
            raise DecodeError(f"token {token} outside [1, {v})")
        last = state.tokens[-1] if state.tokens else None
        # phi[t]: prefix complete by frame t with a fresh `token` legal next.
        if token != last:
            phi = np.logaddexp(state.r_b, state.r_nb)
        else:
            phi = state.r_b

        r_nb = np.full(t_max, _NEG_INF)
        r_b = np.full(t_max, _NEG_INF)
        r_nb[0] = x[0, token] if not state.tokens else _NEG_INF
        psi = r_nb[0]
        for t in range(1, t_max):
            r_nb[t] = np.logaddexp(r_nb[t - 1], phi[t - 1]) + x[t, token]
            r_b[t] = np.logaddexp(r_b[t - 1], r_nb[t - 1]) + x[t, BLANK]
            psi = np.logaddexp(psi, phi[t - 1] + x[t, token])
        return PrefixState(tokens=state.tokens + (token,), r_nb=r_nb, r_b=r_b, log_psi=float(psi))

    def finish(self, state: PrefixState) -> float:
        """Log probability that the output equals the prefix exactly."""
        return float(np.logaddexp(state.r_nb[-1], state.r_b[-1]))

    def prefix_score(self, tokens: Sequence[int]) -> float:
        state = self.initial()
        for tok in tokens:
            state = self.extend(state, tok)
        return state.log_psi


class AttentionScorer(Protocol):
    """Next-token log-probability contract for the attention side.

    Given the emitted prefix, return a log-prob map over candidate next
    tokens including the end key ``EOS``.  Must be deterministic and
    normalized (log-sum-exp 0 within 1e-6).
    """

    def next_log_probs(self, prefix: tuple[int, ...]) -> Mapping[int, float]: ...


class TableAttentionScorer:
    """Deterministic scorer backed by an explicit prefix -> distribution map."""

    def __init__(self, table: Mapping[tuple[int, ...], Mapping[int, float]]):
        self.table = {tuple(k): dict(v) for k, v in table.items()}

    def next_log_probs(self, prefix: tuple[int, ...]) -> dict[int, float]:
        dist = self.table.get(tuple(prefix))
        if dist is None:
            raise DecodeError(f"scorer has no entry for prefix {tuple(prefix)!r}")
        return dist

    @classmethod
    def from_json(cls, obj: Mapping[str, Mapping[str, float]], vocab: Sequence[str]) -> "TableAttentionScorer":
        """Build from the JSON layout: prefix keys are token surfaces joined
        by spaces ("" for the empty prefix), candidate key ``<eos>`` ends a
        hypothesis.  ``vocab`` lists surfaces in index order (0 is blank)."""
        index = {surf: i for i, surf in enumerate(vocab)}

        def to_id(surface: str) -> int:
            if surface == "<eos>":
                return EOS
            if surface not in index:
                raise DecodeError(f"scorer references unknown token {surface!r}")
            return index[surface]

        table: dict[tuple[int, ...], dict[int, float]] = {}
        for key, dist in obj.items():
            prefix = tuple(to_id(s) for s in key.split(" ")) if key else ()
            table[prefix] = {to_id(s): float(lp) for s, lp in dist.items()}
        return cls(table)


class UniformAttentionScorer:
    """Uniform distribution over all labels plus the end token."""

    def __init__(self, vocab_size: int):
        if vocab_size < 2:
            raise DecodeError("vocab size must be >= 2")
        logp = -float(np.log(vocab_size))
        self._dist = {EOS: logp}
        for tok in range(1, vocab_size):
            self._dist[tok] = logp

    def next_log_probs(self, prefix: tuple[int, ...]) -> dict[int, float]:
        return dict(self._dist)


def _validate_distribution(dist: Mapping[int, float]) -> None:
    if not dist:
        raise DecodeError("scorer returned an empty distribution")
    total = float(np.logaddexp.reduce(np.asarray(list(dist.values()), dtype=np.float64)))
    if abs(total) > 1e-6:
        raise DecodeError(f"scorer distribution log-sum-exps to {total}, not 0")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple[int, ...]
    score_ctc: float
    score_att: float
    score_total: float
    finished: bool


@dataclass(frozen=True)
class _Live:
    tokens: tuple[int, ...]
    att: float
    state: PrefixState | None
    psi: float
    total: float


def _combine(lam: float, ctc_score: float, att_score: float) -> float:
    if lam == 0:
        return att_score
    if lam == 1:
        return ctc_score
    return lam * ctc_score + (1 - lam) * att_score


def joint_beam_search(
    matrix: LogProbMatrix,
    scorer: AttentionScorer,
    *,
    lam: float = 0.3,
    beam: int = 3,
    max_len: int | None = None,
    nbest: int | None = None,
) -> list[Hypothesis]:
    """Label-synchronous beam search over the joint CTC/attention score.

    Unfinished hypotheses are ranked by ``lam * prefix_score + (1 - lam) *
    attention_total``; the end token finalizes a hypothesis, switching the
    CTC term to the full-sequence probability.  Ties break toward lower
    token indices, then shorter hypotheses.  If nothing finishes within
    ``max_len`` steps the best unfinished hypotheses are returned flagged.
    """
    if not 0 <= lam <= 1:
        raise DecodeError(f"lam must lie in [0, 1], got {lam}")
    if beam < 1:
        raise DecodeError("beam must be >= 1")
    if max_len is None:
        max_len = matrix.frames
    if max_len < 1:
        raise DecodeError("max_len must be >= 1")
    nbest = nbest if nbest is not None else beam

    use_ctc = lam > 0
    use_att = lam < 1
    ctc = CtcPrefixScorer(matrix) if use_ctc else None
    live = [_Live(tokens=(), att=0.0, state=ctc.initial() if use_ctc else None, psi=0.0, total=0.0)]
    finished: list[Hypothesis] = []

    for step in range(max_len + 1):
        candidates: list[_Live] = []
        for hyp in live:
            if use_att:
                dist = dict(scorer.next_log_probs(hyp.tokens))
                _validate_distribution(dist)
                token_ids = sorted(dist)
            else:
                dist = {}
                token_ids = [EOS] + list(range(1, matrix.vocab))
            for tok in token_ids:
                att_total = hyp.att + dist[tok] if use_att else 0.0
                if tok == EOS:
                    ctc_final = ctc.finish(hyp.state) if use_ctc else 0.0
                    finished.append(
                        Hypothesis(
                            tokens=hyp.tokens,
                            score_ctc=ctc_final,
                            score_att=att_total,
                            score_total=_combine(lam, ctc_final, att_total),
                            finished=True,
                        )
                    )
                    continue
                if step >= max_len:
                    continue
                if use_ctc:
                    state = ctc.extend(hyp.state, tok)
                    psi = state.log_psi
                else:
                    state, psi = None, 0.0
                candidates.append(
                    _Live(
                        tokens=hyp.tokens + (tok,),
                        att=att_total,
                        state=state,
                        psi=psi,
                        total=_combine(lam, psi, att_total),
                    )
                )
        if not candidates:
            break
        candidates.sort(key=lambda h: (-h.total, h.tokens))
        live = candidates[:beam]

    finished.sort(key=lambda h: (-h.score_total, h.tokens))
    if finished:
        return finished[:nbest]
    return [
        Hypothesis(tokens=h.tokens, score_ctc=h.psi, score_att=h.att, score_total=h.total, finished=False)
        for h in live[:nbest]
    ]


@dataclass(frozen=True)
class SweepItem:
    id: str
    matrix: LogProbMatrix
    scorer: AttentionScorer
    reference: str
    lang: str = "unk"


@dataclass(frozen=True)
class SweepCell:
    lam: float
    beam: int
    metric: str
    score: Fraction | None
    ref_units: int
    failures: tuple[tuple[str, str], ...]


def decode_sweep(
    items: Sequence[SweepItem],
    lambdas: Sequence[float],
    beams: Sequence[int],
    vocab: Sequence[str],
    *,
    metric: str = "per",
    table: FeatureTable | None = None,
    marks: MarkClassTable | None = None,
    max_len: int | None = None,
) -> list[SweepCell]:
    """Decode every item under each (lambda, beam) setting and score it.

    Per-item decode errors are collected in the cell, never fatal.  The
    grid is ordered by the given lambda list, then beam list.
    """
    if not lambdas:
        raise DecodeError("empty lambda list")
    if not beams:
        raise DecodeError("empty beam list")
    cells: list[SweepCell] = []
    for lam in lambdas:
        for beam in beams:
            pairs: list[tuple[str, str, str, str]] = []
            failures: list[tuple[str, str]] = []
            for item in items:
                try:
                    hyps = joint_beam_search(item.matrix, item.scorer, lam=lam, beam=beam, max_len=max_len)
                    surfaces = [strip_slashes(vocab[tok]) for tok in hyps[0].tokens]
                except (DecodeError, IndexError) as exc:
                    failures.append((item.id, str(exc)))
                    continue
                pairs.append((item.id, item.lang, " ".join(surfaces), item.reference))
            score = score_corpus(pairs, metric, table, marks=marks)
            failures.extend(score.failures)
            cells.append(
                SweepCell(
                    lam=lam,
                    beam=beam,
                    metric=metric,
                    score=score.score("micro") if score.per_utterance else None,
                    ref_units=score.total_ref_units,
                    failures=tuple(sorted(failures)),
                )
            )
    return cells


def sweep_tsv(cells: Iterable[SweepCell]) -> str:
    lines = ["lambda\tbeam\tmetric\tref_units\tscore\tfailures"]
    for cell in cells:
        rendered = "-" if cell.score is None else f"{float(cell.score):.6f}"
        lines.append(
            f"{cell.lam:g}\t{cell.beam}\t{cell.metric}\t{cell.ref_units}\t{rendered}\t{len(cell.failures)}"
        )
    return "\n".join(lines) + "\n"


MATRIX_MAGIC = int.from_bytes(b"LPMF", "little")
MATRIX_VERSION = 1


def matrix_to_bytes(matrix: LogProbMatrix) -> bytes:
    header = struct.pack("<IIII", MATRIX_MAGIC, MATRIX_VERSION, matrix.frames, matrix.vocab)
    return header + matrix.values.astype("<f8").tobytes(order="C")


def matrix_from_bytes(data: bytes) -> LogProbMatrix:
    if len(data) < 16:
        raise DecodeError("matrix file truncated: missing header")
    magic, version, frames, vocab = struct.unpack_from("<IIII", data)
    if magic != MATRIX_MAGIC:
        raise DecodeError(f"bad magic 0x{magic:08x} (expected 0x{MATRIX_MAGIC:08x})")
    if version != MATRIX_VERSION:
        raise DecodeError(f"unsupported matrix version {version}")
    expected = 16 + frames * vocab * 8
    if len(data) != expected:
        raise DecodeError(f"matrix file has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=16).reshape(frames, vocab)
    return LogProbMatrix(values=values.astype(np.float64))


def write_matrix(dest: IO[bytes] | str, matrix: LogProbMatrix) -> None:
    if isinstance(dest, str):
        with open(dest, "wb") as fh:
            fh.write(matrix_to_bytes(matrix))
    else:
        dest.write(matrix_to_bytes(matrix))


def read_matrix(source: IO[bytes] | str) -> LogProbMatrix:
    if isinstance(source, str):
        if source.endswith(".json"):
            with open(source, encoding="utf-8") as fh:
                return matrix_from_json(fh.read())
        with open(source, "rb") as fh:
            return matrix_from_bytes(fh.read())
    return matrix_from_bytes(source.read())


def matrix_to_json(matrix: LogProbMatrix) -> str:
    payload = {
        "frames": matrix.frames,
        "vocab": matrix.vocab,
        "log_probs": [[float(x) for x in row] for row in matrix.values],
    }
    return json.dumps(payload, sort_keys=True) + "\n"


def matrix_from_json(text: str) -> LogProbMatrix:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DecodeError(f"malformed matrix JSON: {exc.msg}") from None
    try:
        values = np.asarray(obj["log_probs"], dtype=np.float64)
    except (KeyError, TypeError, ValueError):
        raise DecodeError("matrix JSON needs a rectangular 'log_probs' array") from None
    matrix = LogProbMatrix(values=values)
    if matrix.frames != obj.get("frames") or matrix.vocab != obj.get("vocab"):
        raise DecodeError("matrix JSON frames/vocab do not match the array shape")
    return matrix
