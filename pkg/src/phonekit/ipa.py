"""IPA text handling: NFD normalization, phone tokenization, mark classes.

A phone token is one base letter plus every diacritic or modifier that
attaches to it; tie bars join two bases into a single token (affricates,
double articulations).  The suprasegmental stripper removes length marks,
syllable breaks, and ties, which is the transform used to derive reduced
encoder-side targets from full phone sequences.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable


class IpaError(ValueError):
    """Malformed IPA input; ``index`` is the offending scalar position."""

    def __init__(self, message: str, *, index: int | None = None):
        self.index = index
        if index is not None:
            message = f"{message} (index {index})"
        super().__init__(message)


class MarkClass(str, Enum):
    ATTACHING = "attaching-diacritic"
    LENGTH = "length-mark"
    BREAK_OR_TIE = "break-or-tie"
    TONE = "tone-mark"
    OTHER = "other"


# Length marks: long, half-long, extra-short (combining breve).
_LENGTH = "ːˑ̆"
# Syllable break plus the two tie bars.
_BREAK_OR_TIE = ".͜͡"
# Combining tone diacritics, Chao tone letters, down/upstep.
_TONE = (
    "̀́̂̄̋̌̏"
    "˥˦˧˨˩ꜛꜜ"
)
# Common attaching diacritics (combining) and modifier letters (spacing).
# Anything unlisted still attaches when its Unicode category says it is a
# combining mark or a modifier, so this list is not exhaustive.
_ATTACHING = (
    "̥̤̰̪̺̻̟̠̃̊"
    "̩̯̹̜̝̞̘̙̈̽"
    "̴̬̚"
    "ʰʱʲʳʷˠˤʼⁿˡ˞"
)
# Stress marks and intonation-group bars are not segment material; they are
# rejected in strict mode and skipped in lenient mode.
_OTHER = "ˈˌ|‖"

_DEFAULT_CLASSES: dict[str, MarkClass] = {}
for _chars, _cls in (
    (_LENGTH, MarkClass.LENGTH),
    (_BREAK_OR_TIE, MarkClass.BREAK_OR_TIE),
    (_TONE, MarkClass.TONE),
    (_ATTACHING, MarkClass.ATTACHING),
    (_OTHER, MarkClass.OTHER),
):
    for _ch in _chars:
        _DEFAULT_CLASSES[_ch] = _cls


def normalize_nfd(text: str) -> str:
    """Return the NFD canonical decomposition of ``text``.

    Lone surrogates (the one way a Python str can carry a malformed code
    unit) are rejected with their position.
    """
    for i, ch in enumerate(text):
        if 0xD800 <= ord(ch) <= 0xDFFF:
            raise IpaError("malformed encoding: lone surrogate", index=i)
    return unicodedata.normalize("NFD", text)


@dataclass(frozen=True)
class MarkClassTable:
    """Maps individual scalars to their tokenizer class."""

    classes: dict[str, MarkClass] = field(default_factory=lambda: dict(_DEFAULT_CLASSES))

    def class_of(self, ch: str) -> MarkClass | None:
        return self.classes.get(ch)

    def is_length(self, ch: str) -> bool:
        return self.classes.get(ch) is MarkClass.LENGTH

    def is_tone(self, ch: str) -> bool:
        return self.classes.get(ch) is MarkClass.TONE

    def is_tie(self, ch: str) -> bool:
        return self.classes.get(ch) is MarkClass.BREAK_OR_TIE and unicodedata.combining(ch) != 0

    def is_syllable_break(self, ch: str) -> bool:
        return self.classes.get(ch) is MarkClass.BREAK_OR_TIE and unicodedata.combining(ch) == 0

    @classmethod
    def default(cls) -> "MarkClassTable":
        return _DEFAULT_TABLE

    @classmethod
    def from_lines(cls, lines: Iterable[str], *, base: "MarkClassTable | None" = None) -> "MarkClassTable":
        """Parse override lines of the form ``U+XXXX<TAB>class``.

        Entries are merged over ``base`` (the embedded default unless given).
        """
        classes = dict((base or cls.default()).classes)
        by_value = {c.value: c for c in MarkClass}
        for lineno, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise IpaError(f"mark table line {lineno}: expected 'U+XXXX<TAB>class'")
            code, cls_name = parts[0].strip(), parts[1].strip()
            if not code.upper().startswith("U+"):
                raise IpaError(f"mark table line {lineno}: bad code point {code!r}")
            try:
                ch = chr(int(code[2:], 16))
            except ValueError:
                raise IpaError(f"mark table line {lineno}: bad code point {code!r}") from None
            if cls_name not in by_value:
                raise IpaError(
                    f"mark table line {lineno}: unknown class {cls_name!r} "
                    f"(expected one of {sorted(by_value)})"
                )
            classes[ch] = by_value[cls_name]
        return cls(classes=classes)

    @classmethod
    def from_file(cls, source: IO[str] | str, *, base: "MarkClassTable | None" = None) -> "MarkClassTable":
        if isinstance(source, str):
            with open(source, encoding="utf-8") as fh:
                return cls.from_lines(fh, base=base)
        return cls.from_lines(source, base=base)


_DEFAULT_TABLE = MarkClassTable()


@dataclass(frozen=True)
class PhoneToken:
    """One phone: a base letter plus attached marks, all in NFD order.

    For tie-joined tokens the second base letter sits inside ``marks``
    right after the tie bar, so ``surface`` always reproduces the source
    text exactly.
    """

    base: str
    marks: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.base) != 1:
            raise IpaError(f"token base must be one scalar, got {self.base!r}")
        if unicodedata.combining(self.base) != 0:
            raise IpaError(f"token base may not be a combining mark: {self.base!r}")
        for m in self.marks:
            if m.isspace() or m == "/":
                raise IpaError(f"token marks may not contain whitespace or slashes: {m!r}")

    @property
    def surface(self) -> str:
        return self.base + "".join(self.marks)

    @classmethod
    def from_surface(cls, surface: str) -> "PhoneToken":
        text = normalize_nfd(surface)
        if not text:
            raise IpaError("empty token surface")
        return cls(base=text[0], marks=tuple(text[1:]))

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True)
class Boundary:
    """A word or syllable boundary sitting before token index ``position``."""

    position: int
    kind: str  # "word" | "syllable"
    char: str = " "


@dataclass(frozen=True)
class PhoneSequence:
    tokens: tuple[PhoneToken, ...] = ()
    boundaries: tuple[Boundary, ...] = ()
    # (index, scalar) pairs dropped by lenient tokenization.
    skipped: tuple[tuple[int, str], ...] = ()
    # Provenance marker set by the English refinement pass.  Excluded from
    # equality; it only guards against double refinement (a devoiced
    # word-initial plosive is indistinguishable from a phonemic voiceless
    # one by content alone).
    refined: bool = field(default=False, compare=False)

    @property
    def phone_count(self) -> int:
        return len(self.tokens)

    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)

    def text(self) -> str:
        """Reassemble the source text: token surfaces with boundary chars."""
        parts: list[str] = []
        bi = 0
        for pos in range(len(self.tokens) + 1):
            while bi < len(self.boundaries) and self.boundaries[bi].position == pos:
                parts.append(self.boundaries[bi].char)
                bi += 1
            if pos < len(self.tokens):
                parts.append(self.tokens[pos].surface)
        return "".join(parts)

    def words(self) -> list[list[int]]:
        """Token indices grouped into words (split at word boundaries)."""
        cuts = sorted({b.position for b in self.boundaries if b.kind == "word"})
        groups: list[list[int]] = []
        start = 0
        for cut in cuts:
            groups.append(list(range(start, cut)))
            start = cut
        groups.append(list(range(start, len(self.tokens))))
        return [g for g in groups if g]


def _is_mark_by_category(ch: str) -> bool:
    if unicodedata.combining(ch) != 0:
        return True
    return unicodedata.category(ch) in ("Mn", "Lm", "Sk")


def tokenize(
    ipa: str,
    marks: MarkClassTable | None = None,
    *,
    mode: str = "strict",
) -> PhoneSequence:
    """Split IPA text into phone tokens with attached diacritics/modifiers.

    Whitespace becomes a word boundary, ``.`` a syllable boundary, and a
    tie bar joins the next base letter into the current token.  ``mode``
    is ``"strict"`` (unknown characters raise) or ``"lenient"`` (they are
    skipped and reported on the result).
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"mode must be 'strict' or 'lenient', got {mode!r}")
    table = marks or MarkClassTable.default()
    text = normalize_nfd(ipa)

    tokens: list[PhoneToken] = []
    boundaries: list[Boundary] = []
    skipped: list[tuple[int, str]] = []
    cur: list[str] = []
    pending_tie = False

    def close_current():
        nonlocal pending_tie
        if cur:
            tokens.append(PhoneToken(base=cur[0], marks=tuple(cur[1:])))
            cur.clear()
        pending_tie = False

    def reject(i: int, ch: str, why: str):
        if mode == "strict":
            raise IpaError(why, index=i)
        skipped.append((i, ch))

    for i, ch in enumerate(text):
        cls = table.class_of(ch)
        if ch.isspace():
            close_current()
            boundaries.append(Boundary(position=len(tokens), kind="word", char=ch))
        elif cls is MarkClass.BREAK_OR_TIE:
            if unicodedata.combining(ch) != 0:  # tie bar
                if not cur:
                    reject(i, ch, f"tie bar {ch!r} with no preceding base")
                else:
                    cur.append(ch)
                    pending_tie = True
            else:  # syllable break
                close_current()
                boundaries.append(Boundary(position=len(tokens), kind="syllable", char=ch))
        elif cls in (MarkClass.ATTACHING, MarkClass.LENGTH, MarkClass.TONE) or (
            cls is None and _is_mark_by_category(ch)
        ):
            if not cur:
                reject(i, ch, f"mark {ch!r} with no preceding base")
            else:
                cur.append(ch)
        elif cls is MarkClass.OTHER or not unicodedata.category(ch).startswith("L"):
            # Known non-segment characters and anything that is not a letter.
            close_current()
            reject(i, ch, f"character {ch!r} outside the IPA segment repertoire")
        else:
            if cur and pending_tie:
                cur.append(ch)
                pending_tie = False
            else:
                close_current()
                cur.append(ch)
    close_current()

    return PhoneSequence(tokens=tuple(tokens), boundaries=tuple(boundaries), skipped=tuple(skipped))


def render_slash(seq: PhoneSequence, *, include_boundaries: bool = False) -> str:
    """Render each token as ``/x/`` joined by single spaces.

    Boundaries are dropped by default; with ``include_boundaries`` each
    boundary character appears as its own space-separated unit.
    """
    if not include_boundaries:
        return " ".join(f"/{t.surface}/" for t in seq.tokens)
    parts: list[str] = []
    bi = 0
    for pos in range(len(seq.tokens) + 1):
        while bi < len(seq.boundaries) and seq.boundaries[bi].position == pos:
            parts.append(seq.boundaries[bi].char)
            bi += 1
        if pos < len(seq.tokens):
            parts.append(f"/{seq.tokens[pos].surface}/")
    return " ".join(parts)


def strip_slashes(text: str) -> str:
    """Drop slash delimiters from rendered phone text."""
    return text.replace("/", "")


def strip_suprasegmentals(
    seq: PhoneSequence,
    marks: MarkClassTable | None = None,
    *,
    strip_tones: bool = False,
) -> PhoneSequence:
    """Remove length marks, syllable breaks, and tie bars from a sequence.

    Tie removal splits former tie-joined tokens into their component
    bases.  Tone marks are kept unless ``strip_tones`` is set.  Word
    boundaries survive.
    """
    table = marks or MarkClassTable.default()

    def keep(ch: str) -> bool:
        if table.is_length(ch) or table.is_tie(ch):
            return False
        if strip_tones and table.is_tone(ch):
            return False
        return True

    parts: list[str] = []
    bi = 0
    for pos in range(len(seq.tokens) + 1):
        while bi < len(seq.boundaries) and seq.boundaries[bi].position == pos:
            b = seq.boundaries[bi]
            if b.kind == "word":
                parts.append(b.char)
            bi += 1
        if pos < len(seq.tokens):
            parts.append("".join(ch for ch in seq.tokens[pos].surface if keep(ch)))
    return tokenize("".join(parts), table, mode="strict")


def pter_tokens(seq: PhoneSequence) -> tuple[str, ...]:
    """Every base and mark scalar as its own token, in original order."""
    return tuple(ch for t in seq.tokens for ch in t.surface)
