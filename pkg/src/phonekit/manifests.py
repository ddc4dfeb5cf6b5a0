"""Corpus ingestion, filtering, four-task example building, and vocabulary.

Each kept utterance becomes exactly four training examples (PR, ASR, G2P,
P2G) sharing one phone rendering and one grapheme tokenization, so the
cross-task identities (PR target = G2P target, P2G prompt = PR target)
hold exactly.  All outputs are byte-deterministic for fixed inputs.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .features import FeatureTable
from .ipa import IpaError, MarkClassTable, strip_suprasegmentals, tokenize
from .refine import refine_english


class CorpusError(ValueError):
    def __init__(self, message: str, *, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


_LANG_RE = re.compile(r"^[a-z]{3}$")

TASKS = ("pr", "asr", "g2p", "p2g")
NA_TOKEN = "<na>"


@dataclass(frozen=True)
class Utterance:
    id: str
    lang: str
    text: str
    ipa: str
    duration_s: float | None = None
    audio: str | None = None

    def __post_init__(self):
        if not self.id:
            raise CorpusError("utterance id must be non-empty")
        if self.lang != "unk" and not _LANG_RE.match(self.lang):
            raise CorpusError(
                f"lang must be three lowercase letters or 'unk', got {self.lang!r}"
            )

    @property
    def lang_token(self) -> str:
        return f"<{self.lang}>"


@dataclass(frozen=True)
class RecordError:
    line: int
    message: str


def read_corpus(lines: Iterable[str]) -> Iterator[Utterance | RecordError]:
    """Parse line-delimited JSON utterances, yielding records in order.

    Bad lines yield ``RecordError`` (with the 1-based line number) and the
    stream continues.
    """
    required = ("id", "lang", "text", "ipa")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield RecordError(line=lineno, message=f"malformed JSON: {exc.msg}")
            continue
        if not isinstance(obj, dict):
            yield RecordError(line=lineno, message="record is not a JSON object")
            continue
        missing = [k for k in required if k not in obj]
        if missing:
            yield RecordError(line=lineno, message=f"missing required field(s): {', '.join(missing)}")
            continue
        try:
            yield Utterance(
                id=str(obj["id"]),
                lang=str(obj["lang"]),
                text=str(obj["text"]),
                ipa=str(obj["ipa"]),
                duration_s=float(obj["duration_s"]) if obj.get("duration_s") is not None else None,
                audio=str(obj["audio"]) if obj.get("audio") is not None else None,
            )
        except (CorpusError, TypeError, ValueError) as exc:
            yield RecordError(line=lineno, message=str(exc))


@dataclass
class DropReport:
    dropped: dict[str, int] = field(default_factory=dict)
    dropped_ids: dict[str, list[str]] = field(default_factory=dict)
    kept: int = 0
    retained_hours: dict[str, float] = field(default_factory=dict)

    def record_drop(self, utt_id: str, reason: str):
        self.dropped[reason] = self.dropped.get(reason, 0) + 1
        self.dropped_ids.setdefault(reason, []).append(utt_id)

    def record_keep(self, utt: Utterance):
        self.kept += 1
        if utt.duration_s is not None:
            self.retained_hours[utt.lang] = (
                self.retained_hours.get(utt.lang, 0.0) + utt.duration_s / 3600.0
            )

    def to_json(self) -> str:
        payload = {
            "kept": self.kept,
            "dropped": dict(sorted(self.dropped.items())),
            "dropped_ids": {k: sorted(v) for k, v in sorted(self.dropped_ids.items())},
            "retained_hours": {k: round(v, 6) for k, v in sorted(self.retained_hours.items())},
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def filter_utterances(
    utts: Iterable[Utterance],
    *,
    max_phones: int = 300,
    lang_blocklist: frozenset[str] | set[str] = frozenset(),
    min_dur_s: float | None = None,
    max_dur_s: float | None = None,
    marks: MarkClassTable | None = None,
) -> tuple[Iterator[Utterance], DropReport]:
    """Drop over-long, blocklisted, or out-of-duration utterances.

    Returns a lazy stream of kept utterances plus a report that is complete
    once the stream has been exhausted.  The phone-count limit is inclusive:
    exactly ``max_phones`` phones is kept.  Repeated ids violate corpus
    uniqueness and are dropped with reason ``duplicate_id``.
    """
    report = DropReport()

    def generate() -> Iterator[Utterance]:
        seen: set[str] = set()
        for utt in utts:
            if utt.id in seen:
                report.record_drop(utt.id, "duplicate_id")
                continue
            seen.add(utt.id)
            if utt.lang in lang_blocklist:
                report.record_drop(utt.id, "lang_blocklist")
                continue
            if utt.duration_s is not None and (
                (min_dur_s is not None and utt.duration_s < min_dur_s)
                or (max_dur_s is not None and utt.duration_s > max_dur_s)
            ):
                report.record_drop(utt.id, "duration")
                continue
            try:
                seq = tokenize(utt.ipa, marks, mode="strict")
            except IpaError:
                report.record_drop(utt.id, "untokenizable")
                continue
            if seq.phone_count > max_phones:
                report.record_drop(utt.id, "max_phones")
                continue
            report.record_keep(utt)
            yield utt

    return generate(), report


@dataclass(frozen=True)
class TaskExample:
    task: str  # "pr" | "asr" | "g2p" | "p2g"
    lang_token: str
    prompt: tuple[str, ...]
    target: tuple[str, ...]
    utterance_id: str

    @property
    def task_token(self) -> str:
        return f"<{self.task}>"

    def to_json(self) -> str:
        payload = {
            "utterance_id": self.utterance_id,
            "task": self.task,
            "task_token": self.task_token,
            "lang_token": self.lang_token,
            "prompt": list(self.prompt),
            "target": list(self.target),
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)


def grapheme_tokens(text: str) -> tuple[str, ...]:
    """Character-level grapheme tokens; joining them restores the text."""
    return tuple(text)


def build_examples(
    utt: Utterance,
    *,
    refine_eng: bool = False,
    table: FeatureTable | None = None,
    marks: MarkClassTable | None = None,
) -> tuple[TaskExample, TaskExample, TaskExample, TaskExample]:
    """Format one utterance as its four task examples (PR, ASR, G2P, P2G)."""
    try:
        seq = tokenize(utt.ipa, marks, mode="strict")
    except IpaError as exc:
        raise CorpusError(f"utterance {utt.id!r}: {exc}") from exc
    if refine_eng and utt.lang == "eng":
        seq = refine_english(seq, table=table, marks=marks)
    phones = tuple(f"/{t.surface}/" for t in seq.tokens)
    graphemes = grapheme_tokens(utt.text)
    na = (NA_TOKEN,)
    common = {"lang_token": utt.lang_token, "utterance_id": utt.id}
    return (
        TaskExample(task="pr", prompt=na, target=phones, **common),
        TaskExample(task="asr", prompt=na, target=graphemes, **common),
        TaskExample(task="g2p", prompt=graphemes, target=phones, **common),
        TaskExample(task="p2g", prompt=phones, target=graphemes, **common),
    )


# <ts> is reserved for timestamp tokens; nothing emits it.
BASE_SPECIALS = ("<blank>", "<unk>", "<sos>", "<eos>", NA_TOKEN, "<pr>", "<asr>", "<g2p>", "<p2g>", "<ts>")


@dataclass(frozen=True)
class Vocabulary:
    specials: tuple[str, ...]
    phones: tuple[str, ...]
    subwords: tuple[str, ...]
    encoder_ctc: tuple[str, ...]  # index 0 is <blank>

    def render(self) -> str:
        lines: list[str] = []
        for header, toks in (
            ("specials", self.specials),
            ("phones", self.phones),
            ("subwords", self.subwords),
            ("encoder_ctc", self.encoder_ctc),
        ):
            lines.append(f"# {header}")
            lines.extend(toks)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Vocabulary":
        sections: dict[str, list[str]] = {}
        current: list[str] | None = None
        for line in text.splitlines():
            if line.startswith("# "):
                current = sections.setdefault(line[2:].strip(), [])
            elif line:
                if current is None:
                    raise CorpusError("vocabulary line before any section header")
                current.append(line)
        try:
            return cls(
                specials=tuple(sections["specials"]),
                phones=tuple(sections["phones"]),
                subwords=tuple(sections.get("subwords", [])),
                encoder_ctc=tuple(sections["encoder_ctc"]),
            )
        except KeyError as exc:
            raise CorpusError(f"vocabulary is missing section {exc.args[0]!r}") from None


class VocabBuilder:
    """Streaming vocabulary accumulator: one pass, bounded memory (the
    distinct-surface sets are all that is retained)."""

    def __init__(self, *, marks: MarkClassTable | None = None, strip_tones: bool = False):
        self.marks = marks
        self.strip_tones = strip_tones
        self._surfaces: set[str] = set()
        self._stripped: set[str] = set()
        self._langs: set[str] = set()

    def add_sequence(self, seq, lang: str | None = None) -> None:
        self._surfaces.update(t.surface for t in seq.tokens)
        reduced = strip_suprasegmentals(seq, self.marks, strip_tones=self.strip_tones)
        self._stripped.update(t.surface for t in reduced.tokens)
        if lang is not None:
            self._langs.add(lang)

    def add_utterance(self, utt: Utterance) -> None:
        self.add_sequence(tokenize(utt.ipa, self.marks, mode="strict"), utt.lang)

    def finish(self, subwords: Iterable[str] = ()) -> Vocabulary:
        if not self._surfaces:
            raise CorpusError("empty phone inventory")
        lang_tokens = tuple(sorted(f"<{lang}>" for lang in self._langs))
        specials = BASE_SPECIALS + tuple(t for t in lang_tokens if t not in BASE_SPECIALS)
        phones = tuple(f"/{s}/" for s in sorted(self._surfaces))
        subword_list = tuple(subwords)

        if len(subword_list) != len(set(subword_list)):
            dupes = sorted({s for s in subword_list if subword_list.count(s) > 1})
            raise CorpusError(f"duplicate subword token(s): {', '.join(dupes)}")
        collisions = sorted(
            (set(specials) & set(phones))
            | (set(specials) & set(subword_list))
            | (set(phones) & set(subword_list))
        )
        if collisions:
            raise CorpusError(f"token collisions across sections: {', '.join(collisions)}")

        encoder = ("<blank>",) + tuple(f"/{s}/" for s in sorted(self._stripped))
        return Vocabulary(
            specials=specials, phones=phones, subwords=subword_list, encoder_ctc=encoder
        )


def build_vocab(
    utts: Iterable[Utterance],
    subwords: Iterable[str] = (),
    *,
    marks: MarkClassTable | None = None,
    strip_tones: bool = False,
) -> Vocabulary:
    """Collect the phone inventory and the reduced encoder set from a corpus.

    The decoder-side sections (specials, phones, subwords) must be disjoint;
    the encoder set is a separate namespace with ``<blank>`` at index 0 whose
    entries are the suprasegmental-stripped images of the phone section.
    """
    builder = VocabBuilder(marks=marks, strip_tones=strip_tones)
    for utt in utts:
        builder.add_utterance(utt)
    return builder.finish(subwords)
