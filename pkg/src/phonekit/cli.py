"""Command-line surface for corpus preparation, scoring, and decoding.

Subcommands: tokenize, strip, score, refine-g2p, make-manifests, ctc-loss,
decode, sweep.  Exit codes: 0 success, 1 domain/validation error, 2 I/O
error.  ``PHONEKIT_FEATURE_TABLE`` supplies the feature-table path when the
flag is absent; the embedded fixture is the last resort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

from . import __version__
from .ctc import (
    DecodeError,
    SweepItem,
    TableAttentionScorer,
    ctc_forward_loss,
    decode_sweep,
    hybrid_loss,
    joint_beam_search,
    read_matrix,
    sweep_tsv,
)
from .features import FeatureTable, default_table, load_table_file
from .ipa import IpaError, MarkClassTable, render_slash, strip_suprasegmentals, tokenize
from .manifests import (
    RecordError,
    VocabBuilder,
    build_examples,
    filter_utterances,
    read_corpus,
)
from .metrics import METRICS, report_json, report_tsv, score_corpus
from .refine import refine_english

ENV_FEATURE_TABLE = "PHONEKIT_FEATURE_TABLE"


@dataclass(frozen=True)
class CliDefaults:
    alpha: float = 0.3
    lam: float = 0.3
    beam: int = 3
    max_phones: int = 300


DEFAULTS = CliDefaults()


class CliError(ValueError):
    pass


def _version_text() -> str:
    d = DEFAULTS
    return (
        f"phonekit {__version__}\n"
        f"defaults: alpha={d.alpha} lambda={d.lam} beam={d.beam} max-phones={d.max_phones}"
    )


def _open_out(path: str | None) -> IO[str]:
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _close_out(fh: IO[str]) -> None:
    if fh is not sys.stdout:
        fh.close()


def _load_marks(path: str | None) -> MarkClassTable | None:
    if path is None:
        return None
    return MarkClassTable.from_file(path)


def _load_feature_table(path: str | None) -> FeatureTable:
    path = path or os.environ.get(ENV_FEATURE_TABLE)
    if path:
        return load_table_file(path)
    return default_table()


def _iter_input_lines(path: str, *, jsonl: bool) -> Iterator[tuple[int, str]]:
    """Yield (line number, IPA text) pairs from a lines file or utterance JSONL."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if jsonl:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    yield lineno, str(obj["ipa"])
                except (json.JSONDecodeError, KeyError, TypeError):
                    raise CliError(f"line {lineno}: malformed utterance record")
            else:
                yield lineno, line


def _tokenize_line(text: str, lineno: int, marks, mode: str, report_skips: bool):
    try:
        seq = tokenize(text, marks, mode=mode)
    except IpaError as exc:
        col = (exc.index + 1) if exc.index is not None else "?"
        raise CliError(f"line {lineno}:{col}: {exc}") from None
    if report_skips and seq.skipped:
        for idx, ch in seq.skipped:
            print(f"line {lineno}:{idx + 1}: skipped {ch!r}", file=sys.stderr)
    return seq


def cmd_tokenize(args) -> int:
    marks = _load_marks(args.marks_table)
    mode = "lenient" if args.lenient else "strict"
    out = _open_out(args.out)
    try:
        for lineno, text in _iter_input_lines(args.input, jsonl=args.jsonl):
            seq = _tokenize_line(text, lineno, marks, mode, report_skips=True)
            out.write(render_slash(seq) + "\n")
    finally:
        _close_out(out)
    return 0


def cmd_strip(args) -> int:
    marks = _load_marks(args.marks_table)
    mode = "lenient" if args.lenient else "strict"
    out = _open_out(args.out)
    try:
        for lineno, text in _iter_input_lines(args.input, jsonl=args.jsonl):
            seq = _tokenize_line(text, lineno, marks, mode, report_skips=True)
            reduced = strip_suprasegmentals(seq, marks, strip_tones=args.strip_tones)
            out.write(render_slash(reduced) + "\n")
    finally:
        _close_out(out)
    return 0


def cmd_refine_g2p(args) -> int:
    if args.pipeline != "eng-vot-v1":
        raise CliError(f"unknown pipeline {args.pipeline!r} (only 'eng-vot-v1' is available)")
    marks = _load_marks(args.marks_table)
    table = _load_feature_table(args.feature_table)
    out = _open_out(args.out)
    try:
        for lineno, text in _iter_input_lines(args.input, jsonl=args.jsonl):
            seq = _tokenize_line(text, lineno, marks, "strict", report_skips=False)
            refined = refine_english(seq, table=table, marks=marks)
            out.write((render_slash(refined) if args.slashes else refined.text()) + "\n")
    finally:
        _close_out(out)
    return 0


def _read_pairs_file(path: str) -> dict[str, tuple[str, str]]:
    """Lines of ``id<TAB>text`` or ``id<TAB>lang<TAB>text`` keyed by id."""
    pairs: dict[str, tuple[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                utt_id, lang, text = parts[0], "unk", parts[1]
            elif len(parts) == 3:
                utt_id, lang, text = parts
            else:
                raise CliError(f"{path}:{lineno}: expected 2 or 3 tab-separated columns")
            if utt_id in pairs:
                raise CliError(f"{path}:{lineno}: duplicate id {utt_id!r}")
            pairs[utt_id] = (lang, text)
    return pairs


def cmd_score(args) -> int:
    hyp = _read_pairs_file(args.hyp)
    ref = _read_pairs_file(args.ref)
    missing_ref = sorted(set(hyp) - set(ref))
    missing_hyp = sorted(set(ref) - set(hyp))
    if missing_ref or missing_hyp:
        details = []
        if missing_ref:
            details.append(f"ids only in hyp: {', '.join(missing_ref)}")
        if missing_hyp:
            details.append(f"ids only in ref: {', '.join(missing_hyp)}")
        raise CliError("unpaired ids; " + "; ".join(details))

    marks = _load_marks(args.marks_table)
    table = _load_feature_table(args.feature_table) if args.metric == "pfer" else None
    stream = (
        (utt_id, ref[utt_id][0], hyp[utt_id][1], ref[utt_id][1]) for utt_id in sorted(ref)
    )
    score = score_corpus(
        stream,
        args.metric,
        table,
        marks=marks,
        mode="strict" if args.strict_hyp else "lenient",
        fallback=args.fallback,
    )
    out = _open_out(args.out)
    try:
        if args.format == "json":
            out.write(report_json(score, average=args.average))
        else:
            out.write(report_tsv(score, average=args.average))
    finally:
        _close_out(out)
    return 0


def cmd_make_manifests(args) -> int:
    marks = _load_marks(args.marks_table)
    table = _load_feature_table(args.feature_table) if args.refine_english else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    subwords: list[str] = []
    if args.subwords:
        with open(args.subwords, encoding="utf-8") as fh:
            subwords = [line.rstrip("\n") for line in fh if line.strip()]

    blocklist = frozenset(s for s in (args.lang_blocklist or "").split(",") if s)
    record_errors: list[RecordError] = []

    def utterances():
        with open(args.corpus, encoding="utf-8") as fh:
            for item in read_corpus(fh):
                if isinstance(item, RecordError):
                    record_errors.append(item)
                else:
                    yield item

    kept, drop_report = filter_utterances(
        utterances(),
        max_phones=args.max_phones,
        lang_blocklist=blocklist,
        min_dur_s=args.min_dur_s,
        max_dur_s=args.max_dur_s,
        marks=marks,
    )
    builder = VocabBuilder(marks=marks, strip_tones=args.strip_tones)
    with open(out_dir / "examples.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for utt in kept:
            examples = build_examples(utt, refine_eng=args.refine_english, table=table, marks=marks)
            for ex in examples:
                fh.write(ex.to_json() + "\n")
            # Vocabulary reflects exactly what the targets contain.
            pr_target = examples[0].target
            from .ipa import PhoneSequence, PhoneToken  # local import avoids cycle at module load

            seq = PhoneSequence(tokens=tuple(PhoneToken.from_surface(s[1:-1]) for s in pr_target))
            builder.add_sequence(seq, utt.lang)
    vocab = builder.finish(subwords)
    (out_dir / "vocab.txt").write_text(vocab.render(), encoding="utf-8")
    (out_dir / "drop_report.json").write_text(drop_report.to_json(), encoding="utf-8")

    if record_errors:
        for err in record_errors:
            print(f"{args.corpus}:{err.line}: {err.message}", file=sys.stderr)
        print(f"{len(record_errors)} malformed record(s)", file=sys.stderr)
        return 1
    return 0


def _parse_target(spec: str) -> list[int]:
    toks = spec.replace(",", " ").split()
    try:
        return [int(t) for t in toks]
    except ValueError:
        raise CliError(f"target must be integer token indices, got {spec!r}") from None


def _read_matrix_checked(path: str):
    try:
        return read_matrix(path)
    except DecodeError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_ctc_loss(args) -> int:
    matrix = _read_matrix_checked(args.matrix)
    nll = ctc_forward_loss(matrix, _parse_target(args.target))
    out = _open_out(args.out)
    try:
        out.write(f"ctc_nll\t{nll:.17g}\n")
        if args.att_nll is not None:
            out.write(f"hybrid_nll\t{hybrid_loss(nll, args.att_nll, args.alpha):.17g}\n")
    finally:
        _close_out(out)
    return 0


def _read_vocab_surfaces(path: str) -> list[str]:
    """Vocabulary for decoding: sectioned vocab file (encoder_ctc section) or
    a plain one-token-per-line list; index 0 must be the blank token."""
    text = Path(path).read_text(encoding="utf-8")
    if text.startswith("# "):
        from .manifests import Vocabulary

        return list(Vocabulary.parse(text).encoder_ctc)
    return [line for line in text.splitlines() if line]


def _load_scorer(path: str, vocab: list[str]) -> TableAttentionScorer:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CliError(f"{path}: malformed scorer JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise CliError(f"{path}: scorer JSON must be an object")
    return TableAttentionScorer.from_json(obj, vocab)


def _matrix_paths(args) -> list[tuple[str, str]]:
    if args.matrix:
        return [(Path(args.matrix).stem, args.matrix)]
    paths = sorted(Path(args.matrix_dir).iterdir())
    found = [(p.stem, str(p)) for p in paths if p.suffix in (".lpm", ".json", ".bin")]
    if not found:
        raise CliError(f"no matrix files (*.lpm, *.bin, *.json) in {args.matrix_dir}")
    return found


def cmd_decode(args) -> int:
    vocab = _read_vocab_surfaces(args.vocab)
    out = _open_out(args.out)
    try:
        for utt_id, path in _matrix_paths(args):
            matrix = _read_matrix_checked(path)
            scorer = _load_scorer(args.scorer, vocab)
            hyps = joint_beam_search(
                matrix, scorer, lam=args.lam, beam=args.beam,
                max_len=args.max_len, nbest=args.nbest,
            )
            payload = {
                "id": utt_id,
                "nbest": [
                    {
                        "tokens": [vocab[t] for t in h.tokens],
                        "score_total": h.score_total,
                        "score_ctc": h.score_ctc,
                        "score_att": h.score_att,
                        "finished": h.finished,
                    }
                    for h in hyps
                ],
            }
            out.write(json.dumps(payload, ensure_ascii=False, sort_keys=True) + "\n")
    finally:
        _close_out(out)
    return 0


def _parse_floats(spec: str) -> list[float]:
    try:
        return [float(x) for x in spec.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"expected a comma-separated float list, got {spec!r}") from None


def _parse_ints(spec: str) -> list[int]:
    try:
        return [int(x) for x in spec.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"expected a comma-separated int list, got {spec!r}") from None


def cmd_sweep(args) -> int:
    vocab = _read_vocab_surfaces(args.vocab)
    refs = _read_pairs_file(args.refs)
    items = []
    for utt_id, path in _matrix_paths(args):
        if utt_id not in refs:
            raise CliError(f"no reference for matrix {utt_id!r}")
        lang, text = refs[utt_id]
        items.append(
            SweepItem(
                id=utt_id,
                matrix=_read_matrix_checked(path),
                scorer=_load_scorer(args.scorer, vocab),
                reference=text,
                lang=lang,
            )
        )
    marks = _load_marks(args.marks_table)
    table = _load_feature_table(args.feature_table) if args.metric == "pfer" else None
    cells = decode_sweep(
        items,
        _parse_floats(args.lambdas),
        _parse_ints(args.beams),
        vocab,
        metric=args.metric,
        table=table,
        marks=marks,
        max_len=args.max_len,
    )
    out = _open_out(args.out)
    try:
        out.write(sweep_tsv(cells))
    finally:
        _close_out(out)
    return 0


def _add_common_io(p: argparse.ArgumentParser, *, jsonl: bool = True):
    p.add_argument("input", help="input file (one IPA string per line)")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--marks-table", default=None, help="mark-class override file (U+XXXX<TAB>class)")
    if jsonl:
        p.add_argument("--jsonl", action="store_true", help="input is utterance JSONL; read the 'ipa' field")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonekit", description=__doc__)
    parser.add_argument("--version", action="version", version=_version_text())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="split IPA lines into slash-rendered phone tokens")
    _add_common_io(p)
    p.add_argument("--lenient", action="store_true", help="skip unknown characters instead of failing")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("strip", help="remove length marks, breaks, and ties from IPA lines")
    _add_common_io(p)
    p.add_argument("--lenient", action="store_true")
    p.add_argument("--strip-tones", action="store_true", help="also remove tone marks")
    p.set_defaults(func=cmd_strip)

    p = sub.add_parser("refine-g2p", help="apply English VOT/allophony corrections")
    _add_common_io(p)
    p.add_argument("--pipeline", default="eng-vot-v1", help="rule pipeline name")
    p.add_argument("--feature-table", default=None)
    p.add_argument("--slashes", action="store_true", help="emit slash-rendered tokens instead of plain text")
    p.set_defaults(func=cmd_refine_g2p)

    p = sub.add_parser("score", help="score a hypothesis file against a reference file")
    p.add_argument("--hyp", required=True, help="TSV: id<TAB>text or id<TAB>lang<TAB>text")
    p.add_argument("--ref", required=True)
    p.add_argument("--metric", default="pfer", choices=METRICS)
    p.add_argument("--format", default="tsv", choices=("tsv", "json"))
    p.add_argument("--average", default="micro", choices=("micro", "macro"))
    p.add_argument("--feature-table", default=None)
    p.add_argument("--marks-table", default=None)
    p.add_argument("--fallback", default="strip-marks", choices=("strip-marks", "error"))
    p.add_argument("--strict-hyp", action="store_true", help="tokenize hypotheses strictly")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("make-manifests", help="emit four-task examples, vocabulary, and drop report")
    p.add_argument("corpus", help="utterance JSONL")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-phones", type=int, default=DEFAULTS.max_phones)
    p.add_argument("--lang-blocklist", default="", help="comma-separated language codes to drop")
    p.add_argument("--min-dur-s", type=float, default=None)
    p.add_argument("--max-dur-s", type=float, default=None)
    p.add_argument("--refine-english", action="store_true")
    p.add_argument("--strip-tones", action="store_true", help="strip tones in the encoder token set")
    p.add_argument("--subwords", default=None, help="trained subword list, one per line")
    p.add_argument("--feature-table", default=None)
    p.add_argument("--marks-table", default=None)
    p.set_defaults(func=cmd_make_manifests)

    p = sub.add_parser("ctc-loss", help="exact CTC negative log-likelihood of a target")
    p.add_argument("--matrix", required=True, help="log-prob matrix (binary or .json)")
    p.add_argument("--target", required=True, help="token indices, e.g. '1,2,1'")
    p.add_argument("--att-nll", type=float, default=None, help="attention loss to combine")
    p.add_argument("--alpha", type=float, default=DEFAULTS.alpha)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ctc_loss)

    p = sub.add_parser("decode", help="joint CTC/attention beam search over matrices")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", default=None)
    src.add_argument("--matrix-dir", default=None)
    p.add_argument("--scorer", required=True, help="table-driven attention scorer JSON")
    p.add_argument("--vocab", required=True, help="token surfaces in index order (or sectioned vocab file)")
    p.add_argument("--lam", type=float, default=DEFAULTS.lam)
    p.add_argument("--beam", type=int, default=DEFAULTS.beam)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--nbest", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="decode under a lambda x beam grid and score each cell")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--matrix", default=None)
    src.add_argument("--matrix-dir", default=None)
    p.add_argument("--scorer", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--refs", required=True, help="TSV: id<TAB>text or id<TAB>lang<TAB>text")
    p.add_argument("--lambdas", required=True, help="e.g. '0.3,0.7,0.9'")
    p.add_argument("--beams", default="3", help="e.g. '1,3'")
    p.add_argument("--metric", default="per", choices=METRICS)
    p.add_argument("--max-len", type=int, default=None)
    p.add_argument("--feature-table", default=None)
    p.add_argument("--marks-table", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"phonekit: I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"phonekit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
