"""Articulatory feature table: loading, lookup with fallback, vector distance.

The table maps NFD phone surfaces to 24 ternary features (the segment-table
layout popularized by PanPhon).  Every pairwise substitution cost is a
rational k/24, which the metrics layer keeps exact end to end.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import IO, Iterable

from .ipa import MarkClassTable, PhoneToken, normalize_nfd, tokenize

FEATURE_COUNT = 24

_VALUE_CHARS = {"+": 1, "-": -1, "0": 0}
_CHAR_VALUES = {v: k for k, v in _VALUE_CHARS.items()}


class TableError(ValueError):
    """Malformed feature table content; carries the 1-based row number."""

    def __init__(self, message: str, *, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UnknownPhoneError(ValueError):
    """No feature entry found for a phone under the active fallback policy."""

    def __init__(self, surface: str):
        self.surface = surface
        super().__init__(f"no feature entry for phone {surface!r}")


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[int, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) != FEATURE_COUNT:
            raise TableError(f"expected {FEATURE_COUNT} features, got {len(self.values)}")
        if len(self.names) != len(self.values):
            raise TableError("feature names and values differ in length")

    def render(self) -> str:
        return "\t".join(_CHAR_VALUES[v] for v in self.values)


def phone_distance(a: FeatureVector, b: FeatureVector) -> Fraction:
    """Fraction of differing feature positions; any +/-/0 mismatch counts."""
    if a.names != b.names:
        raise TableError("feature vectors come from tables with different headers")
    differing = sum(1 for x, y in zip(a.values, b.values) if x != y)
    return Fraction(differing, FEATURE_COUNT)


@dataclass(frozen=True)
class LookupResult:
    vector: FeatureVector
    matched_surface: str
    degraded: bool  # matched only after stripping trailing marks


@dataclass(frozen=True)
class FeatureTable:
    entries: dict[str, FeatureVector]
    feature_names: tuple[str, ...]
    warnings: tuple[str, ...] = field(default=())

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, phone: PhoneToken | str, *, fallback: str = "strip-marks") -> LookupResult:
        """Find the vector for a phone surface.

        ``fallback="strip-marks"`` retries with trailing marks removed one
        at a time; ``fallback="error"`` only accepts exact matches.
        """
        if fallback not in ("strip-marks", "error"):
            raise ValueError(f"unknown fallback policy {fallback!r}")
        surface = phone.surface if isinstance(phone, PhoneToken) else normalize_nfd(phone)
        vec = self.entries.get(surface)
        if vec is not None:
            return LookupResult(vector=vec, matched_surface=surface, degraded=False)
        if fallback == "strip-marks":
            token = phone if isinstance(phone, PhoneToken) else PhoneToken.from_surface(surface)
            for n in range(len(token.marks) - 1, -1, -1):
                candidate = token.base + "".join(token.marks[:n])
                vec = self.entries.get(candidate)
                if vec is not None:
                    return LookupResult(vector=vec, matched_surface=candidate, degraded=True)
        raise UnknownPhoneError(surface)

    def render(self) -> str:
        """Serialize back to the TSV layout accepted by ``load_table``."""
        lines = ["segment\t" + "\t".join(self.feature_names)]
        for surface, vec in self.entries.items():
            lines.append(surface + "\t" + vec.render())
        return "\n".join(lines) + "\n"


def load_table(
    source: IO[bytes] | IO[str] | Iterable[str],
    *,
    marks: MarkClassTable | None = None,
) -> FeatureTable:
    """Parse a feature table from TSV: header ``segment`` + 24 feature names,
    then one row per phone surface with values from ``{+, -, 0}``.

    Duplicate surfaces keep the last row (with a warning); non-NFD keys are
    normalized (with a warning).
    """
    data = source.read() if hasattr(source, "read") else None
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TableError(f"table is not valid UTF-8: {exc}") from None
    lines = data.splitlines() if data is not None else [ln.rstrip("\n") for ln in source]
    rows = [ln for ln in lines]
    if not rows or not rows[0].strip():
        raise TableError("empty feature table", row=1)

    header = rows[0].split("\t")
    if len(header) != FEATURE_COUNT + 1:
        raise TableError(
            f"expected {FEATURE_COUNT} features, got {len(header) - 1}", row=1
        )
    names = tuple(h.strip() for h in header[1:])

    entries: dict[str, FeatureVector] = {}
    warnings: list[str] = []
    for rowno, line in enumerate(rows[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != FEATURE_COUNT + 1:
            raise TableError(
                f"expected {FEATURE_COUNT + 1} columns, got {len(cols)}", row=rowno
            )
        raw_key = cols[0]
        key = normalize_nfd(raw_key)
        if key != raw_key:
            warnings.append(f"row {rowno}: key {raw_key!r} normalized to NFD")
        seq = tokenize(key, marks, mode="strict")
        if seq.phone_count != 1 or seq.boundaries:
            raise TableError(
                f"key {key!r} does not tokenize to exactly one phone", row=rowno
            )
        values = []
        for col, cell in enumerate(cols[1:], start=1):
            cell = cell.strip()
            if cell not in _VALUE_CHARS:
                raise TableError(
                    f"value {cell!r} in column {col} not one of +, -, 0", row=rowno
                )
            values.append(_VALUE_CHARS[cell])
        if key in entries:
            warnings.append(f"row {rowno}: duplicate surface {key!r}, keeping last")
        entries[key] = FeatureVector(values=tuple(values), names=names)

    return FeatureTable(entries=entries, feature_names=names, warnings=tuple(warnings))


def load_table_file(path: str, *, marks: MarkClassTable | None = None) -> FeatureTable:
    with open(path, "rb") as fh:
        return load_table(fh, marks=marks)


@lru_cache(maxsize=1)
def default_table() -> FeatureTable:
    """The embedded fixture table (a few dozen common segments)."""
    text = resources.files("phonekit").joinpath("data/segments_fixture.tsv").read_text("utf-8")
    return load_table(text.splitlines())
