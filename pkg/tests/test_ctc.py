import io
import itertools
import json
import math

import numpy as np
import pytest

from phonekit import (
    EOS,
    CtcPrefixScorer,
    DecodeError,
    LogProbMatrix,
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
    sweep_tsv,
)
from conftest import random_log_matrix
from oracles import (
    attention_total,
    brute_ctc_nll,
    brute_joint_argmax,
    brute_prefix_prob,
    brute_sequence_prob,
)

UNIFORM_T1 = LogProbMatrix.from_probs([[0.5, 0.5]])
UNIFORM_T2 = LogProbMatrix.from_probs([[0.5, 0.5], [0.5, 0.5]])


class TestLogProbMatrix:
    def test_shape_properties(self):
        assert UNIFORM_T2.frames == 2 and UNIFORM_T2.vocab == 2

    def test_rejects_unnormalized_rows(self):
        with pytest.raises(DecodeError, match="log-sum-exp"):
            LogProbMatrix(values=np.log(np.array([[0.4, 0.4]])))

    def test_rejects_positive_values(self):
        with pytest.raises(DecodeError, match="<= 0"):
            LogProbMatrix(values=np.array([[0.5, -3.0]]))

    def test_rejects_nan(self):
        with pytest.raises(DecodeError, match="NaN"):
            LogProbMatrix(values=np.array([[np.nan, 0.0]]))

    def test_rejects_1d(self):
        with pytest.raises(DecodeError, match="2-D"):
            LogProbMatrix(values=np.zeros(4))

    def test_certain_rows_allowed(self):
        m = LogProbMatrix.from_probs([[1.0, 0.0], [0.0, 1.0]])
        assert m.values[0, 0] == 0.0 and math.isinf(m.values[0, 1])


class TestForwardLoss:
    def test_single_frame_uniform(self):
        assert ctc_forward_loss(UNIFORM_T1, [1]) == pytest.approx(math.log(2), abs=1e-15)

    def test_two_frames_three_alignments(self):
        assert ctc_forward_loss(UNIFORM_T2, [1]) == pytest.approx(-math.log(0.75), abs=1e-15)

    def test_empty_target_all_blank(self):
        m = LogProbMatrix.from_probs([[0.25, 0.75], [0.5, 0.5]])
        assert ctc_forward_loss(m, []) == pytest.approx(-math.log(0.125), rel=1e-12)

    def test_probability_one_scores_exact_zero(self):
        m = LogProbMatrix.from_probs([[0.0, 1.0]])
        assert ctc_forward_loss(m, [1]) == 0.0

    def test_target_too_long(self):
        with pytest.raises(DecodeError, match="frames allow"):
            ctc_forward_loss(UNIFORM_T1, [1, 1])

    def test_repeat_needs_separating_blank(self):
        with pytest.raises(DecodeError):
            ctc_forward_loss(UNIFORM_T2, [1, 1])  # needs 3 frames

    def test_bad_token_index(self):
        with pytest.raises(DecodeError, match="outside"):
            ctc_forward_loss(UNIFORM_T1, [0])
        with pytest.raises(DecodeError, match="outside"):
            ctc_forward_loss(UNIFORM_T1, [2])

    def test_matches_brute_force_grid(self, rng):
        for frames, vocab in itertools.product((1, 2, 3, 4), (2, 3)):
            for _ in range(4):
                m = random_log_matrix(rng, frames, vocab)
                labels = list(range(1, vocab))
                for size in range(0, 3):
                    for target in itertools.product(labels, repeat=size):
                        repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
                        if frames < size + repeats:
                            continue
                        got = ctc_forward_loss(m, list(target))
                        want = brute_ctc_nll(m.values, target)
                        assert got == pytest.approx(want, rel=1e-9)


class TestHybridLoss:
    def test_arithmetic(self):
        assert hybrid_loss(2.0, 1.0, 0.3) == 0.3 * 2.0 + (1 - 0.3) * 1.0

    def test_alpha_zero_is_attention_exactly(self):
        assert hybrid_loss(123.456, 1.25, 0.0) == 1.25

    def test_alpha_one_is_ctc_exactly(self):
        assert hybrid_loss(123.456, 1.25, 1.0) == 123.456

    def test_alpha_out_of_range(self):
        with pytest.raises(DecodeError):
            hybrid_loss(1.0, 1.0, 1.5)
        with pytest.raises(DecodeError):
            hybrid_loss(1.0, 1.0, -0.1)

    def test_non_finite_rejected(self):
        with pytest.raises(DecodeError):
            hybrid_loss(math.inf, 1.0, 0.3)


class TestPrefixScorer:
    def test_single_frame(self):
        scorer = CtcPrefixScorer(UNIFORM_T1)
        state = scorer.extend(scorer.initial(), 1)
        assert state.log_psi == pytest.approx(math.log(0.5), abs=1e-15)

    def test_two_frames(self):
        scorer = CtcPrefixScorer(UNIFORM_T2)
        state = scorer.extend(scorer.initial(), 1)
        assert state.log_psi == pytest.approx(math.log(0.75), abs=1e-15)

    def test_empty_prefix_scores_one(self):
        scorer = CtcPrefixScorer(UNIFORM_T2)
        assert scorer.initial().log_psi == 0.0

    def test_finish_of_empty_prefix_is_all_blank(self):
        scorer = CtcPrefixScorer(UNIFORM_T2)
        assert scorer.finish(scorer.initial()) == pytest.approx(math.log(0.25), abs=1e-15)

    def test_blank_extension_rejected(self):
        scorer = CtcPrefixScorer(UNIFORM_T2)
        with pytest.raises(DecodeError):
            scorer.extend(scorer.initial(), 0)

    def test_matches_brute_force_all_prefixes(self, rng):
        for frames, vocab in itertools.product((1, 2, 3, 4, 5), (2, 3)):
            m = random_log_matrix(rng, frames, vocab)
            scorer = CtcPrefixScorer(m)
            labels = list(range(1, vocab))
            for size in range(1, frames + 1):
                for prefix in itertools.product(labels, repeat=size):
                    got = scorer.prefix_score(prefix)
                    want = brute_prefix_prob(m.values, prefix)
                    assert math.exp(got) == pytest.approx(want, rel=1e-9, abs=1e-12)
                    got_fin = scorer.finish(
                        # rebuild state to also check finish()
                        _state_for(scorer, prefix)
                    )
                    assert math.exp(got_fin) == pytest.approx(
                        brute_sequence_prob(m.values, prefix), rel=1e-9, abs=1e-12
                    )

    def test_mass_conservation(self, rng):
        for frames, vocab in itertools.product((1, 2, 3, 4, 5), (2, 3)):
            m = random_log_matrix(rng, frames, vocab)
            scorer = CtcPrefixScorer(m)
            states = [scorer.initial()]
            for _ in range(frames):
                next_states = []
                for state in states:
                    total = math.exp(scorer.finish(state))
                    for tok in range(1, vocab):
                        new = scorer.extend(state, tok)
                        total += math.exp(new.log_psi)
                        next_states.append(new)
                    assert total == pytest.approx(math.exp(state.log_psi), abs=1e-6)
                states = next_states

    def test_incremental_state_reuse(self, rng):
        m = random_log_matrix(rng, 4, 3)
        scorer = CtcPrefixScorer(m)
        state = scorer.initial()
        for tok in (1, 2, 2):
            state = scorer.extend(state, tok)
        assert state.log_psi == scorer.prefix_score((1, 2, 2))


def _state_for(scorer, prefix):
    state = scorer.initial()
    for tok in prefix:
        state = scorer.extend(state, tok)
    return state


def make_table_scorer(vocab: int, max_len: int, rng) -> TableAttentionScorer:
    """Random but normalized next-token tables over all prefixes up to max_len."""
    labels = list(range(1, vocab))
    table = {}
    for size in range(max_len + 1):
        for prefix in itertools.product(labels, repeat=size):
            raw = rng.gamma(1.0, 1.0, size=len(labels) + 1) + 1e-3
            probs = raw / raw.sum()
            dist = {EOS: math.log(probs[0])}
            for i, tok in enumerate(labels):
                dist[tok] = math.log(probs[i + 1])
            table[prefix] = dist
    return TableAttentionScorer(table)


class TestJointBeamSearch:
    def test_lambda_zero_equals_attention_argmax(self, rng):
        m = random_log_matrix(rng, 3, 3)
        scorer = make_table_scorer(3, 3, rng)
        hyps = joint_beam_search(m, scorer, lam=0.0, beam=64, max_len=3)
        want_tokens, want_score = brute_joint_argmax(m.values, scorer, 0.0, 3, EOS)
        assert hyps[0].tokens == want_tokens
        assert hyps[0].score_total == pytest.approx(want_score, rel=1e-12)
        assert hyps[0].score_total == pytest.approx(
            attention_total(scorer, hyps[0].tokens, EOS), rel=1e-12
        )

    def test_lambda_one_equals_ctc_argmax(self, rng):
        for frames, vocab in ((2, 2), (3, 3), (4, 3)):
            m = random_log_matrix(rng, frames, vocab)
            scorer = UniformAttentionScorer(vocab)
            hyps = joint_beam_search(m, scorer, lam=1.0, beam=256, max_len=frames)
            want_tokens, want_score = brute_joint_argmax(m.values, scorer, 1.0, frames, EOS)
            assert hyps[0].tokens == want_tokens
            assert hyps[0].score_total == pytest.approx(want_score, rel=1e-9)

    def test_joint_tiny_instances_match_exhaustive(self, rng):
        for frames, vocab in ((2, 2), (3, 3), (4, 3)):
            for lam in (0.3, 0.5, 0.7):
                m = random_log_matrix(rng, frames, vocab)
                scorer = make_table_scorer(vocab, frames, rng)
                hyps = joint_beam_search(m, scorer, lam=lam, beam=10_000, max_len=frames)
                want_tokens, want_score = brute_joint_argmax(m.values, scorer, lam, frames, EOS)
                assert hyps[0].tokens == want_tokens
                assert hyps[0].score_total == pytest.approx(want_score, rel=1e-9)

    def test_hypothesis_score_decomposition(self, rng):
        m = random_log_matrix(rng, 3, 3)
        scorer = make_table_scorer(3, 3, rng)
        for lam in (0.0, 0.3, 1.0):
            for hyp in joint_beam_search(m, scorer, lam=lam, beam=4, max_len=3):
                assert hyp.score_total == pytest.approx(
                    lam * hyp.score_ctc + (1 - lam) * hyp.score_att, rel=1e-12
                )

    def test_monotone_in_beam(self, rng):
        m = random_log_matrix(rng, 4, 3)
        scorer = make_table_scorer(3, 4, rng)
        best = -math.inf
        for beam in (1, 2, 4, 8, 32, 128):
            hyps = joint_beam_search(m, scorer, lam=0.3, beam=beam, max_len=4)
            assert hyps[0].score_total >= best - 1e-12
            best = max(best, hyps[0].score_total)

    def test_deterministic(self, rng):
        m = random_log_matrix(rng, 3, 3)
        scorer = make_table_scorer(3, 3, rng)
        a = joint_beam_search(m, scorer, lam=0.3, beam=3, max_len=3)
        b = joint_beam_search(m, scorer, lam=0.3, beam=3, max_len=3)
        assert a == b

    def test_tie_break_prefers_lower_token_then_shorter(self):
        # uniform matrix and uniform scorer make many scores tie exactly
        m = LogProbMatrix.from_probs([[1 / 3] * 3, [1 / 3] * 3])
        scorer = UniformAttentionScorer(3)
        hyps = joint_beam_search(m, scorer, lam=0.5, beam=64, max_len=2, nbest=64)
        scores = {}
        for h in hyps:
            scores.setdefault(round(h.score_total, 12), []).append(h.tokens)
        for group in scores.values():
            assert group == sorted(group)

    def test_nbest_sorted(self, rng):
        m = random_log_matrix(rng, 3, 3)
        scorer = make_table_scorer(3, 3, rng)
        hyps = joint_beam_search(m, scorer, lam=0.3, beam=8, max_len=3, nbest=8)
        totals = [h.score_total for h in hyps]
        assert totals == sorted(totals, reverse=True)
        assert all(h.finished for h in hyps)

    def test_unfinished_flagged_when_scorer_never_ends(self, rng):
        m = random_log_matrix(rng, 2, 2)
        # normalized distribution without an end key: nothing can finalize
        scorer = TableAttentionScorer({
            (): {1: 0.0},
            (1,): {1: 0.0},
            (1, 1): {1: 0.0},
        })
        hyps = joint_beam_search(m, scorer, lam=0.0, beam=2, max_len=2)
        assert hyps and not hyps[0].finished

    def test_invalid_scorer_distribution(self, rng):
        m = random_log_matrix(rng, 2, 2)
        scorer = TableAttentionScorer({(): {1: math.log(0.4), EOS: math.log(0.4)}})
        with pytest.raises(DecodeError, match="log-sum-exp"):
            joint_beam_search(m, scorer, lam=0.0, beam=2, max_len=2)

    def test_missing_prefix_entry(self, rng):
        m = random_log_matrix(rng, 2, 2)
        scorer = TableAttentionScorer({(): {1: 0.0}})
        with pytest.raises(DecodeError, match="no entry"):
            joint_beam_search(m, scorer, lam=0.3, beam=2, max_len=2)

    def test_parameter_validation(self, rng):
        m = random_log_matrix(rng, 2, 2)
        scorer = UniformAttentionScorer(2)
        with pytest.raises(DecodeError):
            joint_beam_search(m, scorer, lam=1.5)
        with pytest.raises(DecodeError):
            joint_beam_search(m, scorer, beam=0)
        with pytest.raises(DecodeError):
            joint_beam_search(m, scorer, max_len=0)

    def test_default_parameters(self):
        import inspect

        sig = inspect.signature(joint_beam_search)
        assert sig.parameters["lam"].default == 0.3
        assert sig.parameters["beam"].default == 3


class TestTableScorerJson:
    def test_from_json_with_surfaces(self):
        obj = {
            "": {"a": math.log(0.5), "<eos>": math.log(0.5)},
            "a": {"b": math.log(0.25), "a": math.log(0.25), "<eos>": math.log(0.5)},
            "a b": {"<eos>": 0.0},
        }
        scorer = TableAttentionScorer.from_json(obj, ["<blank>", "a", "b"])
        assert scorer.next_log_probs(()) == {1: math.log(0.5), EOS: math.log(0.5)}
        assert scorer.next_log_probs((1, 2)) == {EOS: 0.0}

    def test_unknown_surface_rejected(self):
        with pytest.raises(DecodeError, match="unknown token"):
            TableAttentionScorer.from_json({"": {"zz": 0.0}}, ["<blank>", "a"])


class TestSweep:
    def _items(self, rng, n=3, frames=3, vocab=3):
        items = []
        for i in range(n):
            m = random_log_matrix(rng, frames, vocab)
            scorer = make_table_scorer(vocab, frames, rng)
            items.append(SweepItem(id=f"u{i}", matrix=m, scorer=scorer, reference="a b"))
        return items

    def test_grid_shape(self, rng):
        cells = decode_sweep(self._items(rng), [0.3, 0.7, 0.9], [1], ["<blank>", "a", "b"])
        assert [(c.lam, c.beam) for c in cells] == [(0.3, 1), (0.7, 1), (0.9, 1)]

    def test_empty_lambdas_rejected(self, rng):
        with pytest.raises(DecodeError, match="empty lambda"):
            decode_sweep(self._items(rng), [], [1], ["<blank>", "a", "b"])

    def test_empty_beams_rejected(self, rng):
        with pytest.raises(DecodeError, match="empty beam"):
            decode_sweep(self._items(rng), [0.3], [], ["<blank>", "a", "b"])

    def test_deterministic(self, rng):
        items = self._items(rng)
        a = decode_sweep(items, [0.3, 0.9], [1, 3], ["<blank>", "a", "b"])
        b = decode_sweep(items, [0.3, 0.9], [1, 3], ["<blank>", "a", "b"])
        assert a == b

    def test_cell_failures_nonfatal(self, rng):
        good = self._items(rng, n=1)[0]
        bad = SweepItem(
            id="bad",
            matrix=good.matrix,
            scorer=TableAttentionScorer({(): {1: 0.0}}),  # missing deeper prefixes
            reference="a",
        )
        cells = decode_sweep([good, bad], [0.3], [2], ["<blank>", "a", "b"])
        assert cells[0].failures and cells[0].score is not None

    def test_tsv_layout(self, rng):
        cells = decode_sweep(self._items(rng), [0.3], [1], ["<blank>", "a", "b"])
        lines = sweep_tsv(cells).splitlines()
        assert lines[0] == "lambda\tbeam\tmetric\tref_units\tscore\tfailures"
        assert lines[1].startswith("0.3\t1\tper\t")


class TestMatrixIO:
    def test_binary_round_trip_exact(self, rng):
        m = random_log_matrix(rng, 5, 4)
        again = matrix_from_bytes(matrix_to_bytes(m))
        assert np.array_equal(again.values, m.values)

    def test_bad_magic(self):
        data = b"XXXX" + matrix_to_bytes(UNIFORM_T1)[4:]
        with pytest.raises(DecodeError, match="bad magic"):
            matrix_from_bytes(data)

    def test_truncated(self):
        with pytest.raises(DecodeError, match="truncated"):
            matrix_from_bytes(b"LP")
        data = matrix_to_bytes(UNIFORM_T2)[:-8]
        with pytest.raises(DecodeError, match="expected"):
            matrix_from_bytes(data)

    def test_unsupported_version(self):
        import struct

        good = matrix_to_bytes(UNIFORM_T1)
        data = good[:4] + struct.pack("<I", 9) + good[8:]
        with pytest.raises(DecodeError, match="version"):
            matrix_from_bytes(data)

    def test_json_round_trip(self, rng):
        m = random_log_matrix(rng, 3, 3)
        again = matrix_from_json(matrix_to_json(m))
        assert np.allclose(again.values, m.values, rtol=0, atol=0)

    def test_json_shape_mismatch(self):
        with pytest.raises(DecodeError, match="do not match"):
            matrix_from_json(json.dumps({"frames": 3, "vocab": 2, "log_probs": [[0.0, -800.0]]}))

    def test_json_malformed(self):
        with pytest.raises(DecodeError, match="malformed"):
            matrix_from_json("{nope")
