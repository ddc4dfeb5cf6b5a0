"""English G2P post-processing: plosive VOT, lateral velarization, vowel
nasalization.

Broad English G2P output writes word-initial plosives phonemically, which
mismatches their actual voice-onset timing.  The four rules here adjust
that: (1) word-initial voiceless plosives gain aspiration, (2) word-initial
voiced plosives devoice to plain (unaspirated) voiceless stops, (3)
syllable-final /l/ velarizes to /ɫ/, and (4) vowels nasalize before nasal
consonants.

Every rule reads class membership off the *input* sequence, so a plosive
devoiced by rule 2 is never re-fed into rule 1 within an application.
"""
from __future__ import annotations

import unicodedata
from .features import FeatureTable, UnknownPhoneError
from .ipa import MarkClassTable, PhoneSequence, PhoneToken, normalize_nfd

ASPIRATION = "ʰ"  # ʰ
NASAL_TILDE = "̃"  # combining tilde
VELARIZED_L = "ɫ"  # ɫ

VOICELESS_PLOSIVES = frozenset("ptk")
DEVOICE_MAP = {"b": "p", "d": "t", "ɡ": "k", "g": "k"}
NASAL_BASES = frozenset({"m", "n", "ŋ"})  # m n ŋ

# Fallback vowel inventory used when no feature table is supplied.
VOWEL_BASES = frozenset("iyɨʉɯuɪʏʊeøɘɵɤoəɛœɜɞʌɔæɐaɶɑɒɚɝ")


def _has_second_base(token: PhoneToken) -> bool:
    """True for tie-joined tokens (affricates): a letter sits in the marks."""
    return any(unicodedata.category(m).startswith("L") and unicodedata.category(m) != "Lm"
               for m in token.marks)


def _is_vowel(token: PhoneToken, table: FeatureTable | None) -> bool:
    if _has_second_base(token):
        return False
    if table is not None:
        try:
            result = table.lookup(token, fallback="strip-marks")
        except UnknownPhoneError:
            return token.base in VOWEL_BASES
        syl = result.vector.names.index("syl")
        return result.vector.values[syl] == 1
    return token.base in VOWEL_BASES


def _with_mark_appended(token: PhoneToken, mark: str) -> PhoneToken:
    return PhoneToken.from_surface(normalize_nfd(token.surface + mark))


def _with_combining_mark(token: PhoneToken, mark: str) -> PhoneToken:
    """Insert a combining mark after existing combining marks but before any
    spacing modifiers, then renormalize."""
    combining = [m for m in token.marks if unicodedata.combining(m) != 0]
    spacing = [m for m in token.marks if unicodedata.combining(m) == 0]
    surface = token.base + "".join(combining) + mark + "".join(spacing)
    return PhoneToken.from_surface(normalize_nfd(surface))


def refine_english(
    seq: PhoneSequence,
    *,
    table: FeatureTable | None = None,
    marks: MarkClassTable | None = None,
) -> PhoneSequence:
    """Apply the four English VOT/allophony corrections to a sequence.

    Word boundaries delimit words (a sequence without any is one word).
    Syllable boundaries are honored for rule 3 when present; otherwise /l/
    counts as syllable-final before a consonant, a word boundary, or the
    end of the sequence.  Phones outside the English inventory pass through
    unchanged; phone count is always preserved.

    Sequences already carrying the ``refined`` marker pass through
    untouched, which makes the function idempotent: a devoiced word-initial
    plosive looks exactly like a phonemic voiceless one, so without the
    marker a second pass would aspirate it.
    """
    if seq.refined:
        return seq
    tokens = list(seq.tokens)
    n = len(tokens)
    if n == 0:
        return seq

    words = seq.words()
    word_initial = {w[0] for w in words}
    next_in_word: dict[int, int | None] = {}
    for w in words:
        for a, b in zip(w, w[1:]):
            next_in_word[a] = b
        next_in_word[w[-1]] = None
    syllable_cuts = {b.position for b in seq.boundaries if b.kind == "syllable"}

    original = seq.tokens  # rules classify against this, never the output

    def is_plain(i: int) -> bool:
        return not _has_second_base(original[i])

    # Rule 1: aspirate word-initial voiceless plosives.
    for i in word_initial:
        tok = original[i]
        if tok.base in VOICELESS_PLOSIVES and is_plain(i) and ASPIRATION not in tok.marks:
            tokens[i] = _with_mark_appended(tokens[i], ASPIRATION)

    # Rule 2: devoice word-initial voiced plosives (no aspiration added).
    for i in word_initial:
        tok = original[i]
        if tok.base in DEVOICE_MAP and is_plain(i):
            tokens[i] = PhoneToken(base=DEVOICE_MAP[tok.base], marks=tokens[i].marks)

    # Rule 3: velarize syllable-final /l/.
    for i in range(n):
        tok = original[i]
        if tok.base != "l" or not is_plain(i):
            continue
        nxt = next_in_word.get(i)
        syllable_final = (
            nxt is None
            or (i + 1) in syllable_cuts
            or not _is_vowel(original[nxt], table)
        )
        if syllable_final:
            tokens[i] = PhoneToken(base=VELARIZED_L, marks=tokens[i].marks)

    # Rule 4: nasalize vowels immediately before a nasal consonant.
    for i in range(n):
        tok = original[i]
        nxt = next_in_word.get(i)
        if nxt is None or original[nxt].base not in NASAL_BASES:
            continue
        if _has_second_base(original[nxt]):
            continue
        if _is_vowel(tok, table) and NASAL_TILDE not in tok.marks:
            tokens[i] = _with_combining_mark(tokens[i], NASAL_TILDE)

    return PhoneSequence(
        tokens=tuple(tokens), boundaries=seq.boundaries, skipped=seq.skipped, refined=True
    )
