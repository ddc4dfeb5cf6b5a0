"""Phonetic sequence toolkit.

IPA tokenization with attached diacritics, articulatory-feature error
rates (PFER/PER/PTER plus WER/CER), English G2P refinement rules,
four-task dataset manifests, and exact CTC loss / prefix scoring with
joint CTC-attention beam search over supplied log-probability matrices.
"""

__version__ = "0.1.0"

from .ctc import (
    BLANK,
    EOS,
    AttentionScorer,
    CtcPrefixScorer,
    DecodeError,
    Hypothesis,
    LogProbMatrix,
    SweepCell,
    SweepItem,
    TableAttentionScorer,
    UniformAttentionScorer,
    ctc_forward_loss,
    decode_sweep,
    hybrid_loss,
    joint_beam_search,
    matrix_from_bytes,
    matrix_from_json,
    matrix_to_bytes,
    matrix_to_json,
    read_matrix,
    sweep_tsv,
    write_matrix,
)
from .features import (
    FEATURE_COUNT,
    FeatureTable,
    FeatureVector,
    LookupResult,
    TableError,
    UnknownPhoneError,
    default_table,
    load_table,
    load_table_file,
    phone_distance,
)
from .ipa import (
    Boundary,
    IpaError,
    MarkClass,
    MarkClassTable,
    PhoneSequence,
    PhoneToken,
    normalize_nfd,
    pter_tokens,
    render_slash,
    strip_slashes,
    strip_suprasegmentals,
    tokenize,
)
from .manifests import (
    CorpusError,
    DropReport,
    RecordError,
    TaskExample,
    Utterance,
    VocabBuilder,
    Vocabulary,
    build_examples,
    build_vocab,
    filter_utterances,
    grapheme_tokens,
    read_corpus,
)
from .metrics import (
    METRICS,
    AlignmentResult,
    CorpusScore,
    EditOp,
    MetricError,
    UtteranceScore,
    cer,
    per,
    pfer,
    pfer_alignment,
    pter,
    report_json,
    report_tsv,
    score_corpus,
    weighted_edit_distance,
    wer,
)
from .refine import refine_english

__all__ = [
    "__version__",
    "BLANK",
    "EOS",
    "FEATURE_COUNT",
    "METRICS",
    "AlignmentResult",
    "AttentionScorer",
    "Boundary",
    "CorpusError",
    "CorpusScore",
    "CtcPrefixScorer",
    "DecodeError",
    "DropReport",
    "EditOp",
    "FeatureTable",
    "FeatureVector",
    "Hypothesis",
    "IpaError",
    "LogProbMatrix",
    "LookupResult",
    "MarkClass",
    "MarkClassTable",
    "MetricError",
    "PhoneSequence",
    "PhoneToken",
    "RecordError",
    "SweepCell",
    "SweepItem",
    "TableAttentionScorer",
    "TableError",
    "TaskExample",
    "UniformAttentionScorer",
    "UnknownPhoneError",
    "Utterance",
    "UtteranceScore",
    "VocabBuilder",
    "Vocabulary",
    "build_examples",
    "build_vocab",
    "cer",
    "ctc_forward_loss",
    "decode_sweep",
    "default_table",
    "filter_utterances",
    "grapheme_tokens",
    "hybrid_loss",
    "joint_beam_search",
    "load_table",
    "load_table_file",
    "matrix_from_bytes",
    "matrix_from_json",
    "matrix_to_bytes",
    "matrix_to_json",
    "normalize_nfd",
    "per",
    "pfer",
    "pfer_alignment",
    "phone_distance",
    "pter",
    "pter_tokens",
    "read_corpus",
    "read_matrix",
    "refine_english",
    "render_slash",
    "report_json",
    "report_tsv",
    "score_corpus",
    "strip_slashes",
    "strip_suprasegmentals",
    "sweep_tsv",
    "tokenize",
    "weighted_edit_distance",
    "wer",
    "write_matrix",
]
